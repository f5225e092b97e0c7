"""Walktrap community detection on the undirected projection of the network.

Communities are merged agglomeratively by the smallest increase in the
walk-distance criterion; the dendrogram is cut where modularity peaks.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .sbcn import Sbcn


def projection(sbcn: Sbcn, weighted: bool = True) -> np.ndarray:
    """Symmetric adjacency; weights of opposite arcs are summed."""
    A = np.zeros((sbcn.m, sbcn.m))
    for (u, v), w in sorted(sbcn.arcs.items()):
        w = w if weighted else 1.0
        A[u, v] += w
        A[v, u] += w
    return A


@dataclass(frozen=True)
class Partition:
    communities: tuple[tuple[int, ...], ...]
    modularity: float

    def membership(self) -> dict[int, int]:
        return {node: c for c, members in enumerate(self.communities) for node in members}

    def community_of(self, node: int) -> int:
        return self.membership()[node]

    def tsv(self, sbcn: Sbcn) -> str:
        lines = ["community_id\tnode"]
        for c, members in enumerate(self.communities):
            lines.extend(f"{c}\t{sbcn.nodes[i].id}" for i in members)
        return "\n".join(lines) + "\n"


def _canonical(groups) -> tuple[tuple[int, ...], ...]:
    groups = [tuple(sorted(g)) for g in groups]
    return tuple(sorted(groups, key=lambda g: (-len(g), g[0])))


def _validate(m: int, communities) -> None:
    seen: set[int] = set()
    for group in communities:
        if not group:
            raise ValidationError("partition contains an empty community")
        for node in group:
            if not 0 <= node < m:
                raise ValidationError(f"partition references unknown node {node}")
            if node in seen:
                raise ValidationError(f"node {node} appears in two communities")
            seen.add(node)
    if len(seen) != m:
        raise ValidationError("partition does not cover every node")


def modularity_of(A: np.ndarray, communities) -> float:
    """Newman modularity of a symmetric weighted adjacency matrix."""
    _validate(A.shape[0], communities)
    two_w = A.sum()
    if two_w == 0:
        return 0.0
    strength = A.sum(axis=1)
    q = 0.0
    for group in communities:
        idx = list(group)
        q += A[np.ix_(idx, idx)].sum() / two_w - (strength[idx].sum() / two_w) ** 2
    return float(q)


def modularity(sbcn: Sbcn, partition, weighted: bool = True) -> float:
    communities = partition.communities if isinstance(partition, Partition) else partition
    return modularity_of(projection(sbcn, weighted), communities)


def walktrap(sbcn: Sbcn, steps: int = 8, weighted: bool = True) -> Partition:
    """Partition the nodes using random walks of length ``steps``."""
    if steps < 1:
        raise ValidationError("steps must be >= 1")
    m = sbcn.m
    if m == 0:
        raise ValidationError("walktrap needs a nonempty graph")
    A = projection(sbcn, weighted)
    # every vertex carries a loop weighing the mean of its incident edges
    deg = (A > 0).sum(axis=1)
    loop = np.where(deg > 0, A.sum(axis=1) / np.maximum(deg, 1), 1.0)
    Al = A + np.diag(loop)
    D = Al.sum(axis=1)
    Pt = np.linalg.matrix_power(Al / D[:, None], steps)
    inv_d = 1.0 / D

    vec = {i: Pt[i] for i in range(m)}
    size = {i: 1 for i in range(m)}
    members = {i: [i] for i in range(m)}
    nbrs = {i: set(np.nonzero(A[i])[0].tolist()) - {i} for i in range(m)}

    def delta(a, b):
        diff = vec[a] - vec[b]
        return size[a] * size[b] / (size[a] + size[b]) * float(diff @ (diff * inv_d)) / m

    heap = [(delta(a, b), a, b) for a in range(m) for b in nbrs[a] if a < b]
    heapq.heapify(heap)
    alive = set(range(m))
    levels = [[[i] for i in range(m)]]
    next_id = m
    while heap:
        _, a, b = heapq.heappop(heap)
        if a not in alive or b not in alive:
            continue
        c = next_id
        next_id += 1
        size[c] = size[a] + size[b]
        vec[c] = (size[a] * vec[a] + size[b] * vec[b]) / size[c]
        members[c] = members[a] + members[b]
        nbrs[c] = (nbrs[a] | nbrs[b]) - {a, b}
        alive -= {a, b}
        for x in nbrs[c]:
            nbrs[x] -= {a, b}
            nbrs[x].add(c)
        alive.add(c)
        for x in sorted(nbrs[c]):
            heapq.heappush(heap, (delta(x, c), x, c))
        levels.append([members[k] for k in sorted(alive)])

    best, best_q = None, -np.inf
    for groups in levels:
        q = modularity_of(A, groups)
        if q > best_q + 1e-12:
            best, best_q = groups, q
    return Partition(_canonical(best), float(best_q))
