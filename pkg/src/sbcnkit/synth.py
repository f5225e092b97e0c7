"""Synthetic conjunctive causal models for structure-recovery experiments.

Roots fire independently; every other node fires iff all of its parents
fire. Observation noise then flips each cell independently.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dataset import Attribute, BernoulliMatrix, Schema, Variable
from .errors import GenerationError, ValidationError
from .sbcn import Sbcn, find_cycle


@dataclass(frozen=True)
class GroundTruthDag:
    names: tuple[str, ...]
    levels: tuple[int, ...]
    arcs: frozenset[tuple[int, int]]
    root_probs: tuple[float | None, ...]
    false_positive_rate: float = 0.0
    false_negative_rate: float = 0.0

    def __post_init__(self):
        n = len(self.names)
        if len(self.levels) != n or len(self.root_probs) != n:
            raise ValidationError("names, levels and root_probs must have equal length")
        for u, v in self.arcs:
            if self.levels[u] >= self.levels[v]:
                raise ValidationError(f"arc {self.names[u]}->{self.names[v]} does not respect levels")
        if find_cycle(n, self.arcs) is not None:
            raise ValidationError("ground truth must be acyclic")
        for rate in (self.false_positive_rate, self.false_negative_rate):
            if not 0.0 <= rate < 1.0:
                raise ValidationError("noise rates must lie in [0, 1)")
        for i in range(n):
            has_parent = any(v == i for _, v in self.arcs)
            p = self.root_probs[i]
            if has_parent != (p is None):
                raise ValidationError(f"{self.names[i]}: root probability iff no parents")
            if p is not None and not 0.0 < p < 1.0:
                raise ValidationError(f"{self.names[i]}: root probability outside (0, 1)")

    @property
    def n(self) -> int:
        return len(self.names)

    def parents(self, v: int) -> list[int]:
        return sorted(u for u, w in self.arcs if w == v)

    def with_noise(self, false_positive_rate: float, false_negative_rate: float) -> "GroundTruthDag":
        return GroundTruthDag(self.names, self.levels, self.arcs, self.root_probs,
                              false_positive_rate, false_negative_rate)

    def topological_levels(self) -> tuple[int, ...]:
        """A total order (distinct level per node) compatible with the arcs."""
        order = sorted(range(self.n), key=lambda i: (self.levels[i], i))
        rank = [0] * self.n
        for r, i in enumerate(order):
            rank[i] = r
        return tuple(rank)

    def schema(self, total_order: bool = False) -> Schema:
        """Event schema (no decision attribute) for the CSV of ``to_csv``."""
        levels = self.topological_levels() if total_order else self.levels
        return Schema(tuple(Attribute(n, int(lvl), "event") for n, lvl in zip(self.names, levels)))

    def to_graph_json(self) -> str:
        nodes = [{"id": f"{n}_1", "attribute": n, "value": "1", "level": lvl, "role": "plain"}
                 for n, lvl in zip(self.names, self.levels)]
        arcs = [{"src": f"{self.names[u]}_1", "dst": f"{self.names[v]}_1", "weight": 1.0}
                for u, v in sorted(self.arcs)]
        doc = {"format_version": 1, "nodes": nodes, "arcs": arcs,
               "provenance": {"kind": "ground_truth",
                              "root_probs": list(self.root_probs),
                              "false_positive_rate": self.false_positive_rate,
                              "false_negative_rate": self.false_negative_rate}}
        return json.dumps(doc, indent=2) + "\n"


def sample_dag(n_nodes: int, n_levels: int, edge_density: float, rng_seed: int,
               false_positive_rate: float = 0.0, false_negative_rate: float = 0.0) -> GroundTruthDag:
    """Random level-respecting DAG.

    Every pair of nodes on distinct levels is joined (lower to higher) with
    probability ``edge_density``. Nodes left without parents become roots,
    whatever their level.
    """
    if n_levels < 2:
        raise GenerationError("n_levels must be at least 2")
    if not 0.0 < edge_density <= 1.0:
        raise GenerationError("edge_density must lie in (0, 1]")
    if n_nodes < n_levels:
        raise GenerationError("need at least one node per level")
    rng = np.random.default_rng(rng_seed)
    levels = list(range(n_levels)) + rng.integers(0, n_levels, n_nodes - n_levels).tolist()
    levels.sort()
    arcs = set()
    for v in range(n_nodes):
        lower = [u for u in range(n_nodes) if levels[u] < levels[v]]
        if not lower:
            continue
        arcs.update((u, v) for u in lower if rng.random() < edge_density)
    has_parent = {v for _, v in arcs}
    probs = tuple(None if v in has_parent else float(rng.uniform(0.2, 0.8))
                  for v in range(n_nodes))
    names = tuple(f"n{i}" for i in range(n_nodes))
    return GroundTruthDag(names, tuple(levels), frozenset(arcs), probs,
                          false_positive_rate, false_negative_rate)


def sample_clean(dag: GroundTruthDag, s: int, rng: np.random.Generator) -> np.ndarray:
    x = np.zeros((dag.n, s), dtype=bool)
    for v in sorted(range(dag.n), key=lambda i: (dag.levels[i], i)):
        pa = dag.parents(v)
        if pa:
            x[v] = np.logical_and.reduce(x[pa], axis=0)
        else:
            x[v] = rng.random(s) < dag.root_probs[v]
    return x


def sample_data(dag: GroundTruthDag, s: int, rng_seed: int, total_order: bool = False,
                drop_constant: bool = True) -> BernoulliMatrix:
    """Noisy observations, one Bernoulli variable ``name=1`` per node.

    Each cell flips 1 -> 0 with the false-negative rate and 0 -> 1 with the
    false-positive rate. Variable levels follow the truth (or a compatible
    total order). Constant columns are dropped unless ``drop_constant`` is False.
    """
    if s < 1:
        raise GenerationError("sample count must be positive")
    rng = np.random.default_rng(rng_seed)
    x = sample_clean(dag, s, rng)
    flip = rng.random(x.shape)
    noisy = np.where(x, flip >= dag.false_negative_rate, flip < dag.false_positive_rate)
    levels = dag.topological_levels() if total_order else dag.levels
    keep = [i for i in range(dag.n)
            if not drop_constant or 0 < noisy[i].sum() < s]
    variables = [Variable(dag.names[i], "1", int(levels[i])) for i in keep]
    return BernoulliMatrix.from_binary(variables, noisy[keep].astype(np.uint8))


def to_csv(matrix: BernoulliMatrix) -> str:
    lines = [",".join(v.attribute for v in matrix.variables)]
    for col in matrix.data.T:
        lines.append(",".join(str(int(b)) for b in col))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class RecoveryReport:
    true_positives: int
    false_positives: int
    false_negatives: int
    precision: float
    recall: float
    f1: float
    no_predictions: bool = False


def structural_metrics(truth: GroundTruthDag, learned: Sbcn) -> RecoveryReport:
    """Arc-level confusion counts of a learned network against the truth.

    Learned nodes are matched to truth nodes by attribute name. With no
    predicted arcs, precision is reported as 1 and ``no_predictions`` is set.
    """
    name_of = {}
    for i, node in enumerate(learned.nodes):
        if node.attribute not in truth.names:
            raise ValidationError(f"learned node {node.id} has no counterpart in the truth")
        name_of[i] = node.attribute
    learned_arcs = {(name_of[u], name_of[v]) for u, v in learned.arcs}
    true_arcs = {(truth.names[u], truth.names[v]) for u, v in truth.arcs}
    tp = len(learned_arcs & true_arcs)
    fp = len(learned_arcs - true_arcs)
    fn = len(true_arcs - learned_arcs)
    no_pred = not learned_arcs
    precision = 1.0 if no_pred else tp / (tp + fp)
    recall = 1.0 if not true_arcs else tp / (tp + fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return RecoveryReport(tp, fp, fn, precision, recall, f1, no_pred)
