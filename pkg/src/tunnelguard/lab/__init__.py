from .corpus import CorpusSpec, gen_benign, gen_tunnel, standard_corpus
from .evaluate import EvalReport, SingleClassCorpus, evaluate
from .stub import Behavior, StubUpstream, stub_upstream

__all__ = [
    "Behavior",
    "CorpusSpec",
    "EvalReport",
    "SingleClassCorpus",
    "StubUpstream",
    "evaluate",
    "gen_benign",
    "gen_tunnel",
    "standard_corpus",
    "stub_upstream",
]
