"""From-scratch baseline classifiers over binary attribute sets.

Bernoulli naive Bayes, an information-gain decision tree, a random forest
over those trees, and multinomial logistic regression, each trainable in
family mode (one multiclass model) or direct-task mode (one binary model per
task, binary relevance).  All of them consume the same boolean design matrix
(`core.attribute_matrix`) and produce Predictions through the same
task-thresholding path as the activation models.

Conventions shared across the baselines:
  - attribute absence is informative for NB (the Bernoulli event model);
  - query attributes never seen in training contribute the smoothing floor
    to NB and carry zero weight elsewhere;
  - the tree splits on presence/absence with natural-log information gain,
    never reuses an attribute on a path, breaks gain ties toward the
    lexicographically smallest attribute, and never splits a node holding
    fewer than 5% of the training samples;
  - the forest bootstraps |M| samples per tree and draws
    ceil(sqrt(|attributes|)) candidate attributes per node (both togglable,
    so a single full-data, full-feature tree reproduces the plain tree);
  - logistic regression is full-batch gradient ascent on the mean
    log-likelihood with an L2 penalty on the weights (bias unpenalized).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import ActrParams, Corpus, Prediction, attribute_matrix, make_prediction

_MODES = ("family", "direct")


class TrainingError(RuntimeError):
    """Optimization produced a non-finite objective."""


def _check_mode(mode: str) -> None:
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")


def _labels_and_targets(corpus: Corpus, mode: str) -> tuple:
    """Sorted label list plus, per label, the sample indices carrying it."""
    if mode == "family":
        labels = sorted(corpus.families)
        groups = {f: np.array(corpus.members(f), dtype=int) for f in labels}
        label_tasks = dict(corpus.families)
    else:
        labels = sorted(corpus.tasks)
        groups = {
            t: np.array([i for i, s in enumerate(corpus.samples) if t in s.tasks],
                        dtype=int)
            for t in labels
        }
        label_tasks = None
    return labels, groups, label_tasks


def _query_cols(col: Mapping[str, int], query) -> tuple:
    """(known column indices, number of unseen attributes) for a query."""
    query = frozenset(query)
    if not query:
        raise ValueError("query attribute set is empty")
    cols = sorted(col[a] for a in query if a in col)
    return np.array(cols, dtype=int), len(query) - len(cols)


# ---------------------------------------------------------------- naive Bayes

@dataclass(frozen=True)
class NbModel:
    """Bernoulli naive Bayes, family-multiclass or per-task binary."""

    mode: str
    labels: tuple
    vocab: tuple
    smoothing: float
    label_tasks: Mapping[str, frozenset] | None
    _col: Mapping[str, int]
    _class_counts: np.ndarray       # family: (K,); direct: positives per task (T,)
    _cond: np.ndarray               # family: p(a|f) (K,d); direct: p(a|t) (T,d)
    _cond_neg: np.ndarray | None    # direct only: p(a|~t) (T,d)
    _n_train: int

    @property
    def priors(self) -> dict:
        return {
            label: float(self._class_counts[i]) / self._n_train
            for i, label in enumerate(self.labels)
        }

    def cond_prob(self, attribute: str, label: str) -> float:
        """Smoothed p(attribute present | label)."""
        i = self.labels.index(label)
        j = self._col.get(attribute)
        if j is None:
            sm = self.smoothing
            return sm / (self._class_counts[i] + 2 * sm)
        return float(self._cond[i, j])


def _presence_counts(x: np.ndarray, groups: Sequence[np.ndarray]) -> np.ndarray:
    return np.stack([x[g].sum(axis=0) for g in groups]).astype(float)


def nb_train(corpus: Corpus, smoothing: float = 1.0, mode: str = "family") -> NbModel:
    _check_mode(mode)
    if smoothing <= 0:
        raise ValueError(f"smoothing must be positive, got {smoothing}")
    vocab, col, x = attribute_matrix(corpus)
    labels, groups, label_tasks = _labels_and_targets(corpus, mode)
    m = corpus.size
    sm = smoothing
    counts = np.array([groups[label].size for label in labels], dtype=float)
    present = _presence_counts(x, [groups[label] for label in labels])
    cond = (present + sm) / (counts[:, None] + 2 * sm)
    cond_neg = None
    if mode == "direct":
        absent_present = x.sum(axis=0)[None, :] - present
        cond_neg = (absent_present + sm) / ((m - counts)[:, None] + 2 * sm)
    return NbModel(
        mode=mode,
        labels=tuple(labels),
        vocab=tuple(vocab),
        smoothing=sm,
        label_tasks=label_tasks,
        _col=col,
        _class_counts=counts,
        _cond=cond,
        _cond_neg=cond_neg,
        _n_train=m,
    )


def nb_predict(model: NbModel, query, task_threshold: float = 0.5) -> Prediction:
    cols, n_unseen = _query_cols(model._col, query)
    sm = model.smoothing
    log_cond = np.log(model._cond)
    log_not = np.log1p(-model._cond)
    if model.mode == "family":
        floor = math.log(sm) - np.log(model._class_counts + 2 * sm)
        scores = (
            np.log(model._class_counts / model._n_train)
            + log_not.sum(axis=1)
            + (log_cond[:, cols] - log_not[:, cols]).sum(axis=1)
            + n_unseen * floor
        )
        shifted = np.exp(scores - scores.max())
        post = shifted / shifted.sum()
        class_probs = {label: float(p) for label, p in zip(model.labels, post)}
        return make_prediction(
            class_probs, dict(model.label_tasks), mode="family",
            task_threshold=task_threshold, retained_chunks=len(model.labels),
        )
    pos_counts = model._class_counts
    neg_counts = model._n_train - pos_counts
    log_cond_n = np.log(model._cond_neg)
    log_not_n = np.log1p(-model._cond_neg)
    floor_delta = np.log(neg_counts + 2 * sm) - np.log(pos_counts + 2 * sm)
    with np.errstate(divide="ignore"):
        log_odds_prior = np.log(pos_counts) - np.log(neg_counts)
    delta = (
        log_odds_prior
        + (log_not - log_not_n).sum(axis=1)
        + ((log_cond[:, cols] - log_not[:, cols])
           - (log_cond_n[:, cols] - log_not_n[:, cols])).sum(axis=1)
        + n_unseen * floor_delta
    )
    p = np.where(
        pos_counts == 0, 0.0,
        np.where(neg_counts == 0, 1.0, 1.0 / (1.0 + np.exp(-delta))),
    )
    class_probs = {label: float(v) for label, v in zip(model.labels, p)}
    return make_prediction(
        class_probs, None, mode="direct",
        task_threshold=task_threshold, retained_chunks=len(model.labels),
    )


# ---------------------------------------------------------------- decision tree

@dataclass
class TreeNode:
    attr_col: int | None            # None marks a leaf
    dist: np.ndarray                # class distribution at this node
    n: int
    present: "TreeNode | None" = None
    absent: "TreeNode | None" = None


def _entropy(counts: np.ndarray) -> float:
    total = counts.sum()
    if total <= 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-(p * np.log(p)).sum())


def _row_entropy(counts: np.ndarray) -> np.ndarray:
    totals = counts.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(totals > 0, counts / totals, 0.0)
        logs = np.where(p > 0, np.log(p), 0.0)
    return -(p * logs).sum(axis=1)


_GAIN_TOL = 1e-12


def _grow_tree(x: np.ndarray, y: np.ndarray, n_classes: int, idx: np.ndarray,
               avail: np.ndarray, min_count: float,
               rng: np.random.Generator | None, max_features: int | None) -> TreeNode:
    counts = np.bincount(y[idx], minlength=n_classes).astype(float)
    node = TreeNode(attr_col=None, dist=counts / idx.size, n=int(idx.size))
    if idx.size < min_count or (counts > 0).sum() <= 1 or not avail.any():
        return node
    cand = np.flatnonzero(avail)
    if rng is not None and max_features is not None and cand.size > max_features:
        cand = np.sort(rng.choice(cand, size=max_features, replace=False))
    onehot = (y[idx][:, None] == np.arange(n_classes)).astype(float)
    xc = x[np.ix_(idx, cand)]
    present_counts = xc.T.astype(float) @ onehot           # (c, K)
    absent_counts = counts[None, :] - present_counts
    n_p = present_counts.sum(axis=1)
    n_a = idx.size - n_p
    parent_h = _entropy(counts)
    child_h = (n_p * _row_entropy(present_counts)
               + n_a * _row_entropy(absent_counts)) / idx.size
    gains = parent_h - child_h
    best = int(np.argmax(gains))                           # first max: smallest column
    if gains[best] <= _GAIN_TOL:
        return node
    split_col = int(cand[best])
    mask = x[idx, split_col]
    child_avail = avail.copy()
    child_avail[split_col] = False
    node.attr_col = split_col
    node.present = _grow_tree(x, y, n_classes, idx[mask], child_avail,
                              min_count, rng, max_features)
    node.absent = _grow_tree(x, y, n_classes, idx[~mask], child_avail,
                             min_count, rng, max_features)
    return node


def _walk(node: TreeNode, qcols: set) -> np.ndarray:
    while node.attr_col is not None:
        node = node.present if node.attr_col in qcols else node.absent
    return node.dist


@dataclass(frozen=True)
class DtModel:
    mode: str
    labels: tuple
    vocab: tuple
    label_tasks: Mapping[str, frozenset] | None
    _col: Mapping[str, int]
    _roots: tuple                   # family: (root,); direct: one root per task

    def depth(self) -> int:
        def d(node):
            if node.attr_col is None:
                return 0
            return 1 + max(d(node.present), d(node.absent))
        return max(d(r) for r in self._roots)


_MIN_LEAF_FRAC = 0.05


def _fit_targets(corpus: Corpus, mode: str, fit_one) -> tuple:
    """Run a binary/multiclass fitter per the mode; returns (labels, label_tasks, fits)."""
    labels, groups, label_tasks = _labels_and_targets(corpus, mode)
    if mode == "family":
        y = np.empty(corpus.size, dtype=int)
        for i, label in enumerate(labels):
            y[groups[label]] = i
        fits = (fit_one(y, len(labels)),)
    else:
        fits = []
        for label in labels:
            y = np.zeros(corpus.size, dtype=int)
            y[groups[label]] = 1
            fits.append(fit_one(y, 2))
        fits = tuple(fits)
    return labels, label_tasks, fits


def dt_train(corpus: Corpus, mode: str = "family") -> DtModel:
    _check_mode(mode)
    vocab, col, x = attribute_matrix(corpus)
    min_count = _MIN_LEAF_FRAC * corpus.size
    idx = np.arange(corpus.size)

    def fit_one(y, k):
        return _grow_tree(x, y, k, idx, np.ones(len(vocab), dtype=bool),
                          min_count, None, None)

    labels, label_tasks, roots = _fit_targets(corpus, mode, fit_one)
    return DtModel(mode=mode, labels=tuple(labels), vocab=tuple(vocab),
                   label_tasks=label_tasks, _col=col, _roots=roots)


def _tree_class_probs(model, query) -> dict:
    query = frozenset(query)
    if not query:
        raise ValueError("query attribute set is empty")
    qcols = {model._col[a] for a in query if a in model._col}
    if model.mode == "family":
        dist = _walk(model._roots[0], qcols)
        return {label: float(p) for label, p in zip(model.labels, dist)}
    return {
        label: float(_walk(root, qcols)[1])
        for label, root in zip(model.labels, model._roots)
    }


def dt_predict(model: DtModel, query, task_threshold: float = 0.5) -> Prediction:
    class_probs = _tree_class_probs(model, query)
    label_tasks = dict(model.label_tasks) if model.mode == "family" else None
    return make_prediction(
        class_probs, label_tasks, mode=model.mode,
        task_threshold=task_threshold, retained_chunks=len(model.labels),
    )


# ---------------------------------------------------------------- random forest

@dataclass(frozen=True)
class RfModel:
    mode: str
    labels: tuple
    vocab: tuple
    label_tasks: Mapping[str, frozenset] | None
    n_trees: int
    _col: Mapping[str, int]
    _forests: tuple                 # family: (trees,); direct: one tuple per task


def rf_train(corpus: Corpus, n_trees: int = 100, seed: int = 0,
             mode: str = "family", bootstrap: bool = True,
             max_features: int | None = None) -> RfModel:
    """Bagged information-gain trees with per-node attribute subsampling.

    max_features=None draws ceil(sqrt(|vocab|)) candidates per node; pass the
    vocabulary size (and bootstrap=False) to reproduce the plain tree.
    """
    _check_mode(mode)
    if n_trees < 1:
        raise ValueError(f"n_trees must be >= 1, got {n_trees}")
    vocab, col, x = attribute_matrix(corpus)
    m = corpus.size
    min_count = _MIN_LEAF_FRAC * m
    mf = max_features if max_features is not None else math.ceil(math.sqrt(len(vocab)))
    master = np.random.default_rng(seed)

    def fit_one(y, k):
        trees = []
        for _ in range(n_trees):
            rng = np.random.default_rng(int(master.integers(2**63 - 1)))
            idx = rng.integers(0, m, size=m) if bootstrap else np.arange(m)
            trees.append(_grow_tree(x, y, k, idx, np.ones(len(vocab), dtype=bool),
                                    min_count, rng, mf))
        return tuple(trees)

    labels, label_tasks, forests = _fit_targets(corpus, mode, fit_one)
    return RfModel(mode=mode, labels=tuple(labels), vocab=tuple(vocab),
                   label_tasks=label_tasks, n_trees=n_trees, _col=col,
                   _forests=forests)


def rf_predict(model: RfModel, query, task_threshold: float = 0.5) -> Prediction:
    query = frozenset(query)
    if not query:
        raise ValueError("query attribute set is empty")
    qcols = {model._col[a] for a in query if a in model._col}
    if model.mode == "family":
        dist = np.mean([_walk(t, qcols) for t in model._forests[0]], axis=0)
        class_probs = {label: float(p) for label, p in zip(model.labels, dist)}
        label_tasks = dict(model.label_tasks)
    else:
        class_probs = {
            label: float(np.mean([_walk(t, qcols)[1] for t in forest]))
            for label, forest in zip(model.labels, model._forests)
        }
        label_tasks = None
    return make_prediction(
        class_probs, label_tasks, mode=model.mode,
        task_threshold=task_threshold, retained_chunks=len(model.labels),
    )


# ------------------------------------------------------- logistic regression

@dataclass(frozen=True)
class LogRegModel:
    mode: str
    labels: tuple
    vocab: tuple
    label_tasks: Mapping[str, frozenset] | None
    epochs: int
    grad_norm: float                # gradient norm at the last epoch
    _col: Mapping[str, int]
    _w: np.ndarray                  # family: (K,d); direct: per-task deltas (T,d)
    _b: np.ndarray                  # family: (K,); direct: (T,)


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    shifted = np.exp(z - z.max(axis=1, keepdims=True))
    return shifted / shifted.sum(axis=1, keepdims=True)


def logreg_objective(w: np.ndarray, b: np.ndarray, x: np.ndarray,
                     y_onehot: np.ndarray, l2: float) -> tuple:
    """Mean log-likelihood minus L2 penalty, with analytic gradients.

    Returns (objective, grad_w, grad_b) for gradient *ascent*; the bias is
    not penalized.
    """
    n = x.shape[0]
    z = x @ w.T + b
    p = _softmax_rows(z)
    eps = np.finfo(float).tiny
    ll = float(np.sum(y_onehot * np.log(p + eps)) / n)
    obj = ll - 0.5 * l2 * float((w * w).sum())
    resid = y_onehot - p
    grad_w = resid.T @ x / n - l2 * w
    grad_b = resid.mean(axis=0)
    return obj, grad_w, grad_b


def _fit_logreg(x: np.ndarray, y: np.ndarray, k: int, lr: float, l2: float,
                epochs: int) -> tuple:
    n, d = x.shape
    y_onehot = (y[:, None] == np.arange(k)).astype(float)
    w = np.zeros((k, d))
    b = np.zeros(k)
    xf = x.astype(float)
    grad_norm = math.inf
    for epoch in range(epochs):
        obj, gw, gb = logreg_objective(w, b, xf, y_onehot, l2)
        if not math.isfinite(obj):
            raise TrainingError(f"non-finite objective at epoch {epoch}")
        w += lr * gw
        b += lr * gb
        grad_norm = math.sqrt(float((gw * gw).sum()) + float((gb * gb).sum()))
    return w, b, grad_norm


def logreg_train(corpus: Corpus, learning_rate: float = 0.1, l2: float = 1e-3,
                 epochs: int = 500, seed: int = 0, mode: str = "family") -> LogRegModel:
    _check_mode(mode)
    if learning_rate <= 0 or epochs < 1 or l2 < 0:
        raise ValueError("learning_rate must be > 0, epochs >= 1, l2 >= 0")
    del seed  # full-batch from zero init is deterministic; kept for API symmetry
    vocab, col, x = attribute_matrix(corpus)

    worst = 0.0
    results = []

    def fit_one(y, k):
        nonlocal worst
        w, b, gn = _fit_logreg(x, y, k, learning_rate, l2, epochs)
        worst = max(worst, gn)
        results.append((w, b))
        return len(results) - 1

    labels, label_tasks, handles = _fit_targets(corpus, mode, fit_one)
    if mode == "family":
        w, b = results[handles[0]]
    else:
        w = np.stack([results[h][0][1] - results[h][0][0] for h in handles])
        b = np.array([results[h][1][1] - results[h][1][0] for h in handles])
    return LogRegModel(mode=mode, labels=tuple(labels), vocab=tuple(vocab),
                       label_tasks=label_tasks, epochs=epochs, grad_norm=worst,
                       _col=col, _w=w, _b=b)


def logreg_predict(model: LogRegModel, query, task_threshold: float = 0.5) -> Prediction:
    cols, _ = _query_cols(model._col, query)
    qvec = np.zeros(len(model.vocab))
    qvec[cols] = 1.0
    z = model._w @ qvec + model._b
    if model.mode == "family":
        p = _softmax_rows(z[None, :])[0]
        class_probs = {label: float(v) for label, v in zip(model.labels, p)}
        label_tasks = dict(model.label_tasks)
    else:
        p = 1.0 / (1.0 + np.exp(-z))
        class_probs = {label: float(v) for label, v in zip(model.labels, p)}
        label_tasks = None
    return make_prediction(
        class_probs, label_tasks, mode=model.mode,
        task_threshold=task_threshold, retained_chunks=len(model.labels),
    )
