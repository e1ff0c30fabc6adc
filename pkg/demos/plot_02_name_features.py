"""
What makes a query name look like a tunnel
==========================================

Compare the lexical features of a few everyday names with a base32 payload
name, then see how the logistic units fold them into one score.
"""

import numpy as np

from tunnelguard.classifier import ClassifierConfig
from tunnelguard.features import FEATURE_NAMES, extract_features, feature_units, load_dictionary, suspicion_score
from tunnelguard.lab.corpus import CorpusSpec, gen_tunnel

words = load_dictionary()
cfg = ClassifierConfig.default()

names = ["www.example.com", "mail.google.com", "support-portal.bigcorp.co.uk"]
names += gen_tunnel(CorpusSpec("tunnel", 2, seed=1, payload_bytes=(60, 180)))

# one row per name, one column per feature
table = np.array([[getattr(extract_features(n, words), f) for f in FEATURE_NAMES] for n in names])
np.set_printoptions(precision=2, suppress=True, linewidth=140)
print(FEATURE_NAMES)
print(table)

# every unit maps to [0, 1]; the score is their weighted mean
for n in names:
    f = extract_features(n, words)
    units = feature_units(f, cfg.weights)
    print(f"{suspicion_score(f, cfg.weights):.3f}  {n[:60]}")
    print("      ", {k: round(v, 2) for k, v in units.items() if cfg.weights.units[k].weight})
