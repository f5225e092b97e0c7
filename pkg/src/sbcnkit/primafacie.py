"""Candidate arcs allowed by temporal priority, pruned by probability raising."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import BernoulliMatrix, Schema

# columns per block when accumulating pair counts; bounds memory at large s
BLOCK = 8192


@dataclass(frozen=True, eq=False)
class CandidateGraph:
    """Arc sets over the m Bernoulli variables of a matrix.

    ``temporal`` and ``prima_facie`` are (m, m) boolean adjacency matrices,
    ``[u, v]`` meaning the arc u -> v. ``undefined`` lists temporal arcs
    dropped because one of their conditionals had an empty conditioning event.
    """

    levels: np.ndarray
    temporal: np.ndarray
    prima_facie: np.ndarray | None = None
    undefined: tuple[tuple[int, int], ...] = field(default=())

    @property
    def m(self) -> int:
        return len(self.levels)

    def temporal_arcs(self) -> list[tuple[int, int]]:
        return [tuple(map(int, a)) for a in np.argwhere(self.temporal)]

    def prima_facie_arcs(self) -> list[tuple[int, int]]:
        if self.prima_facie is None:
            return []
        return [tuple(map(int, a)) for a in np.argwhere(self.prima_facie)]


def temporal_graph(matrix: BernoulliMatrix, schema: Schema | None = None) -> CandidateGraph:
    """All arcs u -> v between different attributes with level(u) <= level(v)."""
    if schema is not None:
        lvl = {a.name: a.temporal_level for a in schema.attributes}
        levels = np.array([lvl[v.attribute] for v in matrix.variables], dtype=np.int64)
    else:
        levels = np.array([v.level for v in matrix.variables], dtype=np.int64)
    attr = matrix.var_attr
    temporal = (levels[:, None] <= levels[None, :]) & (attr[:, None] != attr[None, :])
    return CandidateGraph(levels, temporal)


def pair_counts(matrix: BernoulliMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Co-occurrence counts in one pass over the samples.

    Returns ``joint[u, v] = #(u=1, v=1)`` and ``with_obs[v, a] = #(v=1, attribute a
    observed)``, both int64. Partial sums stay below 2**24, so float32 products are
    exact.
    """
    m, s = matrix.data.shape
    h = matrix.observed.shape[0]
    joint = np.zeros((m, m), dtype=np.int64)
    with_obs = np.zeros((m, h), dtype=np.int64)
    dtype = np.float32 if s < 2**24 else np.float64
    for start in range(0, s, BLOCK):
        x = matrix.data[:, start:start + BLOCK].astype(dtype)
        o = matrix.observed[:, start:start + BLOCK].astype(dtype)
        joint += np.rint(x @ x.T).astype(np.int64)
        with_obs += np.rint(x @ o.T).astype(np.int64)
    return joint, with_obs


def raising_matrix(matrix: BernoulliMatrix) -> tuple[np.ndarray, np.ndarray]:
    """For all pairs, whether P(v|u) > P(v|not u), compared on integer counts.

    Returns ``(raises, defined)``, both (m, m) boolean indexed ``[u, v]``.
    """
    joint, with_obs = pair_counts(matrix)
    attr = matrix.var_attr
    n_u = matrix.counts[:, None]
    obs_count = matrix.observed.sum(axis=1, dtype=np.int64)
    n_not_u = (obs_count[attr] - matrix.counts)[:, None]
    n_uv = joint
    # #(v=1, u=0, attribute of u observed)
    n_v_not_u = with_obs[:, attr].T - joint
    defined = (n_u > 0) & (n_not_u > 0)
    raises = defined & (n_uv * n_not_u > n_v_not_u * n_u)
    return raises, defined


def probability_raising_filter(graph: CandidateGraph, matrix: BernoulliMatrix) -> CandidateGraph:
    """Keep the temporal arcs u -> v with P(v|u) > P(v|not u) strictly."""
    raises, defined = raising_matrix(matrix)
    undefined = graph.temporal & ~defined
    return replace(graph, prima_facie=graph.temporal & raises,
                   undefined=tuple(tuple(map(int, a)) for a in np.argwhere(undefined)))


def prima_facie_graph(matrix: BernoulliMatrix, schema: Schema | None = None) -> CandidateGraph:
    return probability_raising_filter(temporal_graph(matrix, schema), matrix)
