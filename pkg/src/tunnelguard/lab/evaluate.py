"""Detection-quality evaluation: ROC sweep, AUC and a confusion matrix."""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ..classifier import Classifier, ClassifierConfig
from .corpus import RNG_ALGORITHM


class SingleClassCorpus(ValueError):
    pass


@dataclass
class EvalReport:
    scores: list[float]
    labels: list[int]
    fpr: list[float]
    tpr: list[float]
    thresholds: list[float]
    auc: float
    threshold: float
    confusion: dict[str, int]
    tpr_at_fpr: dict[str, float] = field(default_factory=dict)
    runtime_s: float = 0.0
    rng_algorithm: str = RNG_ALGORITHM
    names: list[str] = field(default_factory=list)

    def to_json(self, per_name: bool = True) -> str:
        doc = asdict(self)
        if per_name:
            doc["per_name"] = [
                {"qname": n, "score": s, "label": y} for n, s, y in zip(self.names, self.scores, self.labels)
            ]
        for key in ("scores", "labels", "names"):
            doc.pop(key)
        return json.dumps(doc, indent=2)

    def roc_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["threshold", "fpr", "tpr"])
        for t, f, p in zip(self.thresholds, self.fpr, self.tpr):
            w.writerow([repr(t), repr(f), repr(p)])
        return buf.getvalue()


def roc_curve(scores: Sequence[float], labels: Sequence[int]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """ROC points for "positive iff score >= t", t swept over the observed scores.

    Tied scores move together, so the trapezoid area counts ties as one half.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=int)
    pos = int(y.sum())
    neg = len(y) - pos
    if pos == 0 or neg == 0:
        raise SingleClassCorpus("both classes are needed for an ROC curve")
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    # last index of each run of equal scores
    ends = np.r_[np.nonzero(np.diff(s))[0], len(s) - 1]
    tp = np.cumsum(y)[ends]
    fp = (ends + 1) - tp
    tpr = np.r_[0.0, tp / pos]
    fpr = np.r_[0.0, fp / neg]
    thresholds = np.r_[np.inf, s[ends]]
    return fpr, tpr, thresholds


def trapezoid_auc(fpr: np.ndarray, tpr: np.ndarray) -> float:
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def tpr_at_fpr(fpr: np.ndarray, tpr: np.ndarray, max_fpr: float) -> float:
    ok = fpr <= max_fpr + 1e-12
    return float(tpr[ok].max())


def confusion(scores: Sequence[float], labels: Sequence[int], threshold: float) -> dict[str, int]:
    """Counts for the classifier's own rule: flagged iff score > threshold."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=int).astype(bool)
    flagged = s > threshold
    return {
        "tp": int(np.sum(flagged & y)),
        "fp": int(np.sum(flagged & ~y)),
        "tn": int(np.sum(~flagged & ~y)),
        "fn": int(np.sum(~flagged & y)),
    }


def report_from_scores(
    names: Sequence[str], scores: Sequence[float], labels: Sequence[int], threshold: float
) -> EvalReport:
    fpr, tpr, thr = roc_curve(scores, labels)
    return EvalReport(
        scores=[float(x) for x in scores],
        labels=[int(y) for y in labels],
        fpr=fpr.tolist(),
        tpr=tpr.tolist(),
        thresholds=thr.tolist(),
        auc=trapezoid_auc(fpr, tpr),
        threshold=threshold,
        confusion=confusion(scores, labels, threshold),
        tpr_at_fpr={
            "0.01": tpr_at_fpr(fpr, tpr, 0.01),
            "0.05": tpr_at_fpr(fpr, tpr, 0.05),
            "0.10": tpr_at_fpr(fpr, tpr, 0.10),
        },
        names=list(names),
    )


def evaluate(
    corpus: Sequence[tuple[str, int]], cfg: ClassifierConfig | Classifier
) -> EvalReport:
    """Score a labelled corpus on the feature path alone (1 = tunnel)."""
    start = time.perf_counter()
    clf = cfg if isinstance(cfg, Classifier) else Classifier(cfg)
    names = [n for n, _ in corpus]
    labels = [int(y) for _, y in corpus]
    if len(set(labels)) < 2:
        raise SingleClassCorpus("both benign and tunnel names are required")
    scores = [clf.score(n) for n in names]
    report = report_from_scores(names, scores, labels, clf.config.weights.score_threshold)
    report.runtime_s = time.perf_counter() - start
    return report
