"""Method registry: one constructor path from (name, corpus) to a predictor.

Every classifier is reachable by a short method id; training returns a
closure mapping a query attribute set to a Prediction.  The evaluation
protocols and the CLI both go through here so a method id means the same
model everywhere.
"""

from __future__ import annotations

from typing import Callable

from . import actr, baselines
from .core import ActrParams, Corpus, Prediction

METHODS = ("actr-ib", "actr-r", "nb", "dt", "rf", "logreg")

Predictor = Callable[[frozenset], Prediction]


def train_method(method: str, corpus: Corpus, mode: str = "family",
                 params: ActrParams | None = None, seed: int = 0,
                 hyper: dict | None = None) -> Predictor:
    """Train `method` on `corpus` and return its query -> Prediction closure.

    `params` carries the activation parameters and the shared task
    threshold; `hyper` overrides method-specific training knobs (rb/nb
    `smoothing`, rf `n_trees`/`bootstrap`/`max_features`, logreg
    `learning_rate`/`l2`/`epochs`).
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    params = params or ActrParams()
    hyper = dict(hyper or {})
    threshold = params.task_threshold

    if method == "actr-ib":
        model = actr.IbModel(corpus, params, mode=mode)
        return model.predict
    if method == "actr-r":
        table = actr.rb_train(corpus, smoothing=hyper.pop("smoothing", 1.0), mode=mode)
        _check_unused(method, hyper)
        return lambda q: actr.rb_predict(table, params, q)
    if method == "nb":
        nb = baselines.nb_train(corpus, smoothing=hyper.pop("smoothing", 1.0), mode=mode)
        _check_unused(method, hyper)
        return lambda q: baselines.nb_predict(nb, q, task_threshold=threshold)
    if method == "dt":
        _check_unused(method, hyper)
        dt = baselines.dt_train(corpus, mode=mode)
        return lambda q: baselines.dt_predict(dt, q, task_threshold=threshold)
    if method == "rf":
        rf = baselines.rf_train(
            corpus,
            n_trees=hyper.pop("n_trees", 100),
            seed=seed,
            mode=mode,
            bootstrap=hyper.pop("bootstrap", True),
            max_features=hyper.pop("max_features", None),
        )
        _check_unused(method, hyper)
        return lambda q: baselines.rf_predict(rf, q, task_threshold=threshold)
    lr = baselines.logreg_train(
        corpus,
        learning_rate=hyper.pop("learning_rate", 0.1),
        l2=hyper.pop("l2", 1e-3),
        epochs=hyper.pop("epochs", 500),
        seed=seed,
        mode=mode,
    )
    _check_unused(method, hyper)
    return lambda q: baselines.logreg_predict(lr, q, task_threshold=threshold)


def _check_unused(method: str, leftover: dict) -> None:
    if leftover:
        raise ValueError(f"unknown hyperparameters for {method}: {sorted(leftover)}")
