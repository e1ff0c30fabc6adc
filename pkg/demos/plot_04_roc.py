"""
Scoring a labelled corpus
=========================

Generate the standard synthetic corpus, score it with the shipped
configuration and read off the ROC curve.
"""

import numpy as np

from tunnelguard.classifier import ClassifierConfig
from tunnelguard.lab import evaluate, standard_corpus

corpus = standard_corpus(seed=2016, count=1000)
report = evaluate(corpus, ClassifierConfig.default())
print(f"AUC {report.auc:.4f}, runtime {report.runtime_s:.2f}s")
print("TPR at FPR limits:", report.tpr_at_fpr)
print("confusion at the 0.5 threshold:", report.confusion)

# score distributions per class
scores = np.array(report.scores)
labels = np.array(report.labels)
for y, title in [(0, "benign"), (1, "tunnel")]:
    s = scores[labels == y]
    print(f"{title:7s} min {s.min():.3f}  median {np.median(s):.3f}  max {s.max():.3f}")

# a coarse text histogram of both classes
bins = np.linspace(0, 1, 11)
for y, mark in [(0, "b"), (1, "t")]:
    counts, _ = np.histogram(scores[labels == y], bins)
    print(" ".join(f"{c:4d}" for c in counts), mark)
