"""Precision/recall metrics and the year-blocked cross-validation driver.

Curve convention: one point per distinct predicted probability, visited in
descending order, preceded by the no-prediction endpoint
``(threshold=inf, precision=1, recall=0)``.

* AP  = sum_n (R_n - R_{n-1}) * P_n along that curve.
* AR  = recall averaged with precision-increment weights: the data points
  (endpoint excluded) are visited by ascending precision, ties by descending
  recall, and AR = sum_n max(P_n - P_{n-1}, 0) * R_n / max_n P_n with P_0 = 0.
* PR-AUC = trapezoidal area under precision over recall.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import Encoder, split_by_year
from .errors import ArgumentError, EvaluationError, TrainingError
from .forest import ForestParams, predict_proba, train_forest

AR_DEFINITION = (
    "AR: recall averaged over the precision-recall curve with weights equal to the "
    "precision increments when points are visited by ascending precision "
    "(ties by descending recall), normalised by the maximum precision."
)


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0


def _check(probs, labels):
    probs = np.asarray(probs, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    if probs.shape != labels.shape:
        raise ArgumentError(f"probs and labels differ in length ({probs.size} vs {labels.size})")
    return probs, labels


def confusion_at(probs, labels, threshold: float) -> Confusion:
    probs, labels = _check(probs, labels)
    pred = probs >= threshold
    pos = labels == 1
    tp = int(np.count_nonzero(pred & pos))
    fp = int(np.count_nonzero(pred & ~pos))
    fn = int(np.count_nonzero(~pred & pos))
    return Confusion(tp, fp, fn, int(labels.size - tp - fp - fn))


def f1(c: Confusion) -> float:
    if c.tp == 0:
        return 0.0
    p, r = c.precision, c.recall
    return 2 * p * r / (p + r)


@dataclass
class PrCurve:
    thresholds: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    tp: np.ndarray = None
    fp: np.ndarray = None

    @property
    def points(self):
        return list(zip(self.thresholds.tolist(), self.precision.tolist(), self.recall.tolist()))

    def __len__(self):
        return int(self.thresholds.size)

    @classmethod
    def from_points(cls, recall, precision, thresholds=None) -> "PrCurve":
        recall = np.asarray(recall, dtype=float)
        precision = np.asarray(precision, dtype=float)
        if thresholds is None:
            thresholds = np.linspace(1.0, 0.0, recall.size)
        return cls(np.asarray(thresholds, dtype=float), precision, recall)


def pr_curve(probs, labels) -> PrCurve:
    probs, labels = _check(probs, labels)
    n_pos = int(np.count_nonzero(labels))
    if n_pos == 0:
        raise EvaluationError("precision-recall curve undefined without positive labels")
    order = np.argsort(-probs, kind="stable")
    p_sorted = probs[order]
    tp = np.cumsum(labels[order] == 1)
    fp = np.cumsum(labels[order] == 0)
    # last index of each run of equal probabilities
    last = np.flatnonzero(np.r_[p_sorted[1:] != p_sorted[:-1], True])
    tp, fp = tp[last], fp[last]
    thresholds = p_sorted[last]
    precision = tp / (tp + fp)
    recall = tp / n_pos
    return PrCurve(
        thresholds=np.r_[math.inf, thresholds],
        precision=np.r_[1.0, precision],
        recall=np.r_[0.0, recall],
        tp=np.r_[0, tp],
        fp=np.r_[0, fp],
    )


def f1_grid(probs, labels):
    """F-1 at every distinct probability threshold: ``(thresholds, f1s)``, descending."""
    c = pr_curve(probs, labels)
    p, r = c.precision[1:], c.recall[1:]
    with np.errstate(invalid="ignore"):
        scores = np.where(c.tp[1:] > 0, 2 * p * r / (p + r), 0.0)
    return c.thresholds[1:], scores


def best_f1(probs, labels):
    """Highest F-1 over thresholds; the highest such threshold on ties."""
    thresholds, scores = f1_grid(probs, labels)
    i = int(np.argmax(scores))
    return float(scores[i]), float(thresholds[i])


def average_precision(probs, labels) -> float:
    c = pr_curve(probs, labels)
    return float(np.sum(np.diff(c.recall) * c.precision[1:]))


def average_recall(probs, labels) -> float:
    c = pr_curve(probs, labels)
    p, r = c.precision[1:], c.recall[1:]
    order = np.lexsort((-r, p))
    p, r = p[order], r[order]
    steps = np.maximum(np.diff(np.r_[0.0, p]), 0.0)
    return float(np.sum(steps * r) / p.max())


def auc_pr(curve: PrCurve) -> float:
    if len(curve) < 2:
        raise EvaluationError("PR-AUC needs at least two curve points")
    r, p = curve.recall, curve.precision
    return float(np.sum((r[1:] - r[:-1]) * (p[1:] + p[:-1]) / 2.0))


# ---------------------------------------------------------------- blocked CV

@dataclass
class FoldReport:
    test_year: int
    variant: str
    mode: str
    n_test: int
    n_pos: int
    prevalence: float
    f1_05: float | None = None
    f1_best: float | None = None
    best_threshold: float | None = None
    ap: float | None = None
    ar: float | None = None
    auc_pr: float | None = None
    curve: PrCurve | None = field(default=None, repr=False)
    train_years: tuple = ()
    na_reason: str | None = None
    model: object = field(default=None, repr=False, compare=False)

    @property
    def is_na(self) -> bool:
        return self.na_reason is not None


def score_fold(probs, labels) -> dict:
    curve = pr_curve(probs, labels)
    f1b, thr = best_f1(probs, labels)
    return {
        "f1_05": f1(confusion_at(probs, labels, 0.5)),
        "f1_best": f1b,
        "best_threshold": thr,
        "ap": average_precision(probs, labels),
        "ar": average_recall(probs, labels),
        "auc_pr": auc_pr(curve),
        "curve": curve,
    }


def block_cv(rows, params: ForestParams, variable_set="all", mode="strict", threads=1, keep_models=False):
    """Leave-one-year-out CV: encoder and forest are fit on the training years only."""
    if not rows:
        raise ArgumentError("no rows to cross-validate")
    years = np.array([r.year for r in rows])
    reports = []
    for fold in split_by_year(years):
        train = [rows[i] for i in fold.train]
        test = [rows[i] for i in fold.test]
        n_pos = sum(r.label for r in test)
        rep = FoldReport(
            test_year=fold.year, variant=variable_set, mode=mode,
            n_test=len(test), n_pos=n_pos, prevalence=n_pos / len(test),
            train_years=tuple(sorted({r.year for r in train})),
        )
        reports.append(rep)
        if n_pos == 0:
            rep.na_reason = "no positive rows in test year"
            continue
        encoder = Encoder.fit(train, variable_set)
        m_train = encoder.transform(train)
        try:
            model = train_forest(m_train.rows, m_train.labels, params, m_train.feature_names, threads=threads)
        except TrainingError as exc:
            rep.na_reason = str(exc)
            continue
        m_test = encoder.transform(test)
        probs = predict_proba(model, m_test.rows)
        for k, v in score_fold(probs, m_test.labels).items():
            setattr(rep, k, v)
        if keep_models:
            rep.model = model
    return reports
