"""Activation-based classifiers over binary attribute sets.

Two models share one retrieval rule.  The instance-based model (IB) keeps
every training sample as a memory chunk; a query computes, per chunk j,

    A_j = B_j + S_j + P_j

    B_j = beta                                  (constant base level)
    S_j = sum over query attributes a of
              log(|M| / fan(a))   if a in chunk j
              log(1 / |M|)        otherwise
          , divided by |query|                  (spreading activation)
    P_j = mp * |query & chunk| / sqrt(|query| * |chunk|)
                                                (partial matching, "overlap")

where fan(a) counts the training samples containing a.  With
partial_matching="deficit" the last term is shifted to
mp * (overlap - 1), a penalty in [-mp, 0]; ordering is unchanged but the
interaction with tau differs.  Chunks at or above the threshold tau enter a
Boltzmann retrieval distribution

    Pr(j) = exp(A_j / s) / sum_k exp(A_k / s)

computed deterministically (the temperature s stands in for noise; nothing
is sampled) with max-subtraction for numerical stability.  If no chunk
reaches tau, retrieval falls back to the softmax over all chunks and the
prediction is flagged degenerate.  Family probability is the retained
probability mass of the family's chunks; task probability sums the mass of
every family performing the task, thresholded at task_threshold.

The rule-based model (RB) compresses the corpus into per-(attribute, label)
rules.  With add-`smoothing` counts,

    p(a|f)  = (count(a, f) + sm) / (|f| + 2 sm)
    p(a|~f) = (count(a, M-f) + sm) / (|M| - |f| + 2 sm)
    s_{a,f} = log(p(a|f) / p(a|~f))

and a query scores A_f = log prior(f) + w * sum_a s_{a,f} / |query| over the
query attributes that have rules, softmaxed over all labels with the same
temperature (no tau filtering; every label competes).  In direct-task mode
each task gets a binary rule table (samples with the task vs without); the
complement label's association is the exact negation, so the pairwise
softmax reduces to a sigmoid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import (
    ActrParams,
    Corpus,
    Prediction,
    attribute_matrix,
    make_prediction,
)

_MODES = ("family", "direct")


@dataclass(frozen=True)
class Activation:
    """Per-chunk activation, decomposed into its three terms."""

    base: float
    spreading: float
    partial_match: float

    @property
    def total(self) -> float:
        return self.base + self.spreading + self.partial_match


def _overlap(query: frozenset, chunk: frozenset) -> float:
    shared = len(query & chunk)
    return shared / math.sqrt(len(query) * len(chunk))


def _partial_term(overlap: float, params: ActrParams) -> float:
    if params.partial_matching == "deficit":
        return params.mp * (overlap - 1.0)
    return params.mp * overlap


def ib_activation(corpus: Corpus, params: ActrParams, query, j: int) -> Activation:
    """Activation of memory chunk j (corpus.samples[j]) for a query attribute set."""
    query = frozenset(query)
    if not query:
        raise ValueError("query attribute set is empty")
    if not 0 <= j < corpus.size:
        raise IndexError(f"chunk index {j} out of range for corpus of {corpus.size}")
    chunk = corpus.samples[j].attribs
    m = corpus.size
    miss = math.log(1.0 / m)
    spread = 0.0
    for a in query:
        if a in chunk:
            spread += math.log(m / corpus.fan[a])
        else:
            spread += miss
    return Activation(
        base=params.beta,
        spreading=spread / len(query),
        partial_match=_partial_term(_overlap(query, chunk), params),
    )


def _softmax_retained(acts: np.ndarray, params: ActrParams,
                      apply_threshold: bool) -> tuple:
    """Boltzmann distribution over the chunks at or above tau.

    Returns (probs, retained_count, degenerate).  probs is aligned with acts
    and zero outside the retained set.  When nothing reaches tau the softmax
    falls back to all chunks and degenerate is True; retained_count stays 0
    because it counts chunks that actually cleared the threshold.
    """
    if acts.size == 0:
        raise ValueError("no activations to retrieve over")
    if apply_threshold:
        mask = acts >= params.tau
    else:
        mask = np.ones(acts.shape, dtype=bool)
    retained = int(mask.sum()) if apply_threshold else int(acts.size)
    degenerate = False
    if not mask.any():
        mask = np.ones(acts.shape, dtype=bool)
        degenerate = True
        retained = 0
    sub = acts[mask]
    w = np.exp((sub - sub.max()) / params.s)
    probs = np.zeros(acts.shape)
    probs[mask] = w / w.sum()
    return probs, retained, degenerate


def retrieval_probs(activations: Sequence[float], params: ActrParams,
                    apply_threshold: bool = True) -> tuple:
    """Retrieval probabilities for a list of activations.

    Returns (probs, degenerate) with probs aligned to the input (zero for
    chunks excluded by tau).
    """
    acts = np.asarray(list(activations), dtype=float)
    probs, _, degenerate = _softmax_retained(acts, params, apply_threshold)
    return list(probs), degenerate


class IbModel:
    """Instance-based model: the training corpus held as retrievable memory."""

    def __init__(self, corpus: Corpus, params: ActrParams | None = None,
                 mode: str = "family"):
        if mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")
        if corpus.size == 0:
            raise ValueError("cannot build memory from an empty corpus")
        self.corpus = corpus
        self.params = params or ActrParams()
        self.mode = mode
        vocab, col, x = attribute_matrix(corpus)
        self._col = col
        self._x = x
        self._sizes = x.sum(axis=1)
        m = corpus.size
        fan = np.array([corpus.fan[a] for a in vocab], dtype=float)
        self._log_hit = np.log(m / fan)
        self._log_miss = math.log(1.0 / m)
        if mode == "family":
            self._labels = sorted(corpus.families)
            self._label_tasks = dict(corpus.families)
            self._groups = [np.array(corpus.members(f), dtype=int) for f in self._labels]
        else:
            self._labels = sorted(corpus.tasks)
            self._label_tasks = None
            self._groups = [
                np.array([i for i, s in enumerate(corpus.samples) if t in s.tasks],
                         dtype=int)
                for t in self._labels
            ]

    def activations(self, query) -> np.ndarray:
        """Total activation of every memory chunk for the query."""
        query = frozenset(query)
        if not query:
            raise ValueError("query attribute set is empty")
        cols = [self._col[a] for a in query if a in self._col]
        nq = len(query)
        if cols:
            xq = self._x[:, cols]
            shared = xq.sum(axis=1)
            hits = xq @ self._log_hit[cols]
        else:
            shared = np.zeros(self.corpus.size)
            hits = np.zeros(self.corpus.size)
        spread = (hits + (nq - shared) * self._log_miss) / nq
        overlap = shared / np.sqrt(nq * self._sizes)
        if self.params.partial_matching == "deficit":
            partial = self.params.mp * (overlap - 1.0)
        else:
            partial = self.params.mp * overlap
        return self.params.beta + spread + partial

    def predict(self, query) -> Prediction:
        acts = self.activations(query)
        probs, retained, degenerate = _softmax_retained(acts, self.params, True)
        class_probs = {
            label: float(probs[g].sum()) for label, g in zip(self._labels, self._groups)
        }
        return make_prediction(
            class_probs,
            self._label_tasks,
            mode=self.mode,
            task_threshold=self.params.task_threshold,
            retained_chunks=retained,
            degenerate=degenerate,
        )


def ib_predict(corpus: Corpus, params: ActrParams | None, query,
               mode: str = "family") -> Prediction:
    """One-shot instance-based prediction (builds the memory, then queries it)."""
    return IbModel(corpus, params, mode).predict(query)


@dataclass(frozen=True)
class RuleTable:
    """Per-(attribute, label) presence rules compressed from a corpus.

    given[a][f] is the smoothed p(attribute a present | label f) and
    not_given[a][f] the smoothed p(a present | not f).  priors hold label
    base rates (family mode: sums to 1; direct mode: per-task incidence).
    """

    mode: str
    labels: tuple
    priors: Mapping[str, float]
    given: Mapping[str, Mapping[str, float]]
    not_given: Mapping[str, Mapping[str, float]]
    label_tasks: Mapping[str, frozenset]
    smoothing: float


def rb_train(corpus: Corpus, smoothing: float = 1.0, mode: str = "family") -> RuleTable:
    """Compress a corpus into smoothed presence rules per label."""
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")
    if smoothing <= 0:
        raise ValueError(f"smoothing must be positive, got {smoothing}")
    if corpus.size == 0:
        raise ValueError("cannot build rules from an empty corpus")
    m = corpus.size
    if mode == "family":
        labels = sorted(corpus.families)
        label_sets = {
            f: frozenset(corpus.members(f)) for f in labels
        }
        for f, ix in label_sets.items():
            if not ix:
                raise ValueError(f"family {f!r} has no samples")
        label_tasks = {f: corpus.families[f] for f in labels}
    else:
        labels = sorted(corpus.tasks)
        label_sets = {
            t: frozenset(i for i, s in enumerate(corpus.samples) if t in s.tasks)
            for t in labels
        }
        for t, ix in label_sets.items():
            if not ix:
                raise ValueError(f"task {t!r} has no samples")
        label_tasks = {t: frozenset((t,)) for t in labels}

    counts: dict[str, dict[str, int]] = {}
    for s in corpus.samples:
        s_labels = (s.family,) if mode == "family" else s.tasks
        for a in s.attribs:
            row = counts.setdefault(a, {})
            for label in s_labels:
                row[label] = row.get(label, 0) + 1

    sm = smoothing
    priors = {label: len(label_sets[label]) / m for label in labels}
    given: dict[str, dict[str, float]] = {}
    not_given: dict[str, dict[str, float]] = {}
    for a in sorted(counts):
        row = counts[a]
        total = corpus.fan[a]
        given[a] = {}
        not_given[a] = {}
        for label in labels:
            n_label = len(label_sets[label])
            inside = row.get(label, 0)
            given[a][label] = (inside + sm) / (n_label + 2 * sm)
            not_given[a][label] = ((total - inside) + sm) / ((m - n_label) + 2 * sm)
    return RuleTable(
        mode=mode,
        labels=tuple(labels),
        priors=priors,
        given=given,
        not_given=not_given,
        label_tasks=label_tasks,
        smoothing=sm,
    )


def _rb_association(rules: RuleTable, query: frozenset, label: str) -> float:
    """Summed log-likelihood-ratio association of the query with a label.

    Attributes without a rule row (never seen in training) are skipped; the
    normalization still divides by the full query size.
    """
    s_sum = 0.0
    for a in query:
        row = rules.given.get(a)
        if row is None:
            continue
        s_sum += math.log(row[label] / rules.not_given[a][label])
    return s_sum / len(query)


def _pair_prob(a_pos: float, a_neg: float, s: float) -> float:
    """Two-way Boltzmann probability of the positive alternative."""
    top = max(a_pos, a_neg)
    wp = math.exp((a_pos - top) / s)
    wn = math.exp((a_neg - top) / s)
    return wp / (wp + wn)


def rb_predict(rules: RuleTable, params: ActrParams, query) -> Prediction:
    """Score a query against a rule table."""
    query = frozenset(query)
    if not query:
        raise ValueError("query attribute set is empty")
    params = params or ActrParams()
    if rules.mode == "family":
        acts = []
        for f in rules.labels:
            assoc = _rb_association(rules, query, f)
            acts.append(math.log(rules.priors[f]) + params.w * assoc)
        probs, _ = retrieval_probs(acts, params, apply_threshold=False)
        class_probs = dict(zip(rules.labels, probs))
        return make_prediction(
            class_probs,
            dict(rules.label_tasks),
            mode="family",
            task_threshold=params.task_threshold,
            retained_chunks=len(rules.labels),
            degenerate=False,
        )
    class_probs = {}
    for t in rules.labels:
        prior = rules.priors[t]
        if prior <= 0.0 or prior >= 1.0:
            class_probs[t] = float(prior)
            continue
        assoc = params.w * _rb_association(rules, query, t)
        a_pos = math.log(prior) + assoc
        a_neg = math.log(1.0 - prior) - assoc
        class_probs[t] = _pair_prob(a_pos, a_neg, params.s)
    return make_prediction(
        class_probs,
        None,
        mode="direct",
        task_threshold=params.task_threshold,
        retained_chunks=len(rules.labels),
        degenerate=False,
    )
