"""Suppes-Bayes causal networks for discrimination discovery.

Pipeline: ``dataset`` (schema, one-hot Bernoulli matrix, contingency tables)
-> ``primafacie`` (temporal priority and probability raising) -> ``sbcn``
(BIC hill climbing, edge weights, JSON/DOT) -> ``walker`` (random-walk
scores), ``pagerank`` (record scores) and ``community`` (walktrap).
``synth`` generates synthetic ground truths; ``cli`` ties it together.
"""

__version__ = "0.1.0"

from .dataset import (Attribute, BernoulliMatrix, ContingencyTable, Decision, Schema,
                      Variable, contingency, load_and_binarize)
from .errors import SbcnError
from .primafacie import CandidateGraph, prima_facie_graph
from .sbcn import HillClimbConfig, Node, Sbcn, bic, hill_climb, learn
from .walker import WalkConfig, explainable_fraction, group_score, score_all
from .pagerank import PprConfig, generalized_score, personalized_pagerank, score_records
from .community import Partition, modularity, walktrap
from .synth import GroundTruthDag, sample_dag, sample_data, structural_metrics

__all__ = [
    "Attribute", "BernoulliMatrix", "CandidateGraph", "ContingencyTable", "Decision",
    "GroundTruthDag", "HillClimbConfig", "Node", "Partition", "PprConfig", "SbcnError",
    "Sbcn", "Schema", "Variable", "WalkConfig", "bic", "contingency", "explainable_fraction",
    "generalized_score", "group_score", "hill_climb", "learn", "load_and_binarize",
    "modularity", "personalized_pagerank", "prima_facie_graph", "sample_dag", "sample_data",
    "score_all", "score_records", "structural_metrics", "walktrap",
]
