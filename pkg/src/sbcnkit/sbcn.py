"""BIC scoring, constrained hill climbing, edge confidence weights, and the
weighted network type with its JSON/DOT interchange formats.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .dataset import BernoulliMatrix, Schema, conditional
from .errors import SbcnError, StructureError, ValidationError
from .primafacie import CandidateGraph, prima_facie_graph

FORMAT_VERSION = 1


def _parent_map(m: int, arcs: Iterable[tuple[int, int]]) -> list[tuple[int, ...]]:
    parents: list[list[int]] = [[] for _ in range(m)]
    for u, v in arcs:
        parents[v].append(u)
    return [tuple(sorted(p)) for p in parents]


def find_cycle(m: int, arcs: Iterable[tuple[int, int]]) -> list[int] | None:
    """Return one directed cycle as a node list, or None when acyclic."""
    children: list[list[int]] = [[] for _ in range(m)]
    for u, v in arcs:
        children[u].append(v)
    state = [0] * m  # 0 new, 1 on stack, 2 done
    for root in range(m):
        if state[root]:
            continue
        stack = [(root, iter(children[root]))]
        path = [root]
        state[root] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                path.pop()
                state[node] = 2
            elif state[nxt] == 1:
                return path[path.index(nxt):] + [nxt]
            elif state[nxt] == 0:
                state[nxt] = 1
                stack.append((nxt, iter(children[nxt])))
                path.append(nxt)
    return None


class BicScorer:
    """Decomposable BIC over a Bernoulli matrix with per-family caching.

    The local term of node v with parents Pa is its maximum-likelihood
    log-likelihood minus (log s / 2) * 2**|Pa|.
    """

    def __init__(self, matrix: BernoulliMatrix):
        self.matrix = matrix
        self.penalty = math.log(matrix.sample_count) / 2.0
        self._data = matrix.data.astype(np.int64)
        self._ll_cache: dict[tuple[int, tuple[int, ...]], float] = {}

    def local_ll(self, v: int, parents: tuple[int, ...]) -> float:
        key = (v, parents)
        hit = self._ll_cache.get(key)
        if hit is not None:
            return hit
        x = self._data[v]
        cfg = np.zeros_like(x)
        for bit, p in enumerate(parents):
            cfg |= self._data[p] << bit
        counts = np.bincount(cfg * 2 + x, minlength=2 << len(parents)).reshape(-1, 2)
        n_pa = np.broadcast_to(counts.sum(axis=1, keepdims=True), counts.shape)
        nz = counts > 0
        c = counts[nz].astype(float)
        ll = float(np.sum(c * np.log(c / n_pa[nz])))
        self._ll_cache[key] = ll
        return ll

    def local_score(self, v: int, parents: tuple[int, ...]) -> float:
        return self.local_ll(v, parents) - self.penalty * (1 << len(parents))

    def log_likelihood(self, arcs) -> float:
        pm = self._checked_parents(arcs)
        return math.fsum(self.local_ll(v, pa) for v, pa in enumerate(pm))

    def bic(self, arcs) -> float:
        pm = self._checked_parents(arcs)
        return math.fsum(self.local_score(v, pa) for v, pa in enumerate(pm))

    def _checked_parents(self, arcs):
        arcs = list(arcs)
        m = self.matrix.m
        for u, v in arcs:
            if not (0 <= u < m and 0 <= v < m) or u == v:
                raise StructureError(f"invalid arc ({u}, {v})")
        cycle = find_cycle(m, arcs)
        if cycle is not None:
            raise StructureError(f"graph has a cycle through nodes {cycle}")
        return _parent_map(m, arcs)


def dimension(m: int, arcs) -> int:
    """Free parameters of binary CPTs: sum over nodes of 2**|parents|."""
    return sum(1 << len(pa) for pa in _parent_map(m, arcs))


def log_likelihood(matrix: BernoulliMatrix, arcs) -> float:
    return BicScorer(matrix).log_likelihood(arcs)


def bic(matrix: BernoulliMatrix, arcs) -> float:
    return BicScorer(matrix).bic(arcs)


@dataclass(frozen=True)
class HillClimbConfig:
    rng_seed: int = 0
    max_iterations: int = 100_000
    patience: int = 2_000
    restarts: int = 1

    def __post_init__(self):
        for name in ("max_iterations", "patience", "restarts"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        if self.rng_seed < 0:
            raise ValidationError("rng_seed must be non-negative")


@dataclass(frozen=True)
class HillClimbResult:
    arcs: frozenset[tuple[int, int]]
    score: float
    iterations: int
    accepted_scores: tuple[float, ...] = field(repr=False)
    local_optimum: bool = False


def _reaches(children: list[set[int]], start: int, target: int) -> bool:
    stack, seen = [start], {start}
    while stack:
        node = stack.pop()
        if node == target:
            return True
        for nxt in children[node]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return False


def _climb_once(candidates, scorer: BicScorer, config: HillClimbConfig, rng) -> HillClimbResult:
    m = scorer.matrix.m
    parents: list[set[int]] = [set() for _ in range(m)]
    children: list[set[int]] = [set() for _ in range(m)]
    local = [scorer.local_score(v, ()) for v in range(m)]
    total = math.fsum(local)
    accepted = [total]
    k = len(candidates)
    # Proposals are drawn uniformly among neighbours not yet tried since the last
    # accepted move; an exhausted pool certifies a local optimum.
    pool = list(range(k))
    stale = 0
    it = 0
    while it < config.max_iterations and stale < config.patience and pool:
        it += 1
        j = int(rng.integers(len(pool)))
        pool[j], pool[-1] = pool[-1], pool[j]
        u, v = candidates[pool.pop()]
        if u in parents[v]:
            new_pa = parents[v] - {u}
        elif _reaches(children, v, u):
            stale += 1
            continue
        else:
            new_pa = parents[v] | {u}
        new_local = scorer.local_score(v, tuple(sorted(new_pa)))
        trial = local.copy()
        trial[v] = new_local
        new_total = math.fsum(trial)
        if new_total > total:
            if u in parents[v]:
                parents[v].discard(u)
                children[u].discard(v)
            else:
                parents[v].add(u)
                children[u].add(v)
            local, total = trial, new_total
            accepted.append(total)
            pool = list(range(k))
            stale = 0
        else:
            stale += 1
    arcs = frozenset((u, v) for v in range(m) for u in parents[v])
    return HillClimbResult(arcs, total, it, tuple(accepted), local_optimum=not pool)


def hill_climb(prima_facie: CandidateGraph, matrix: BernoulliMatrix,
               config: HillClimbConfig = HillClimbConfig(),
               scorer: BicScorer | None = None) -> HillClimbResult:
    """Maximize BIC over acyclic subsets of the prima facie arcs.

    Each restart starts from the empty graph and proposes single-arc additions
    or removals restricted to the prima facie arcs, accepting only strict BIC
    improvements. Cycle-creating additions are rejected. The best restart is
    returned (earliest on ties).
    """
    scorer = scorer or BicScorer(matrix)
    candidates = sorted(prima_facie.prima_facie_arcs())
    best = None
    for r in range(config.restarts):
        rng = np.random.default_rng([config.rng_seed, r])
        res = _climb_once(candidates, scorer, config, rng)
        if best is None or res.score > best.score:
            best = res
    return best


@dataclass(frozen=True)
class Node:
    id: str
    attribute: str
    value: str
    level: int
    role: str = "plain"

    @property
    def label(self) -> str:
        return f"{self.attribute}={self.value}"


@dataclass(frozen=True, eq=False)
class Sbcn:
    """Weighted causal DAG over Bernoulli variables.

    ``arcs`` maps ``(src, dst)`` node indices to weights in (0, 1].
    """

    nodes: tuple[Node, ...]
    arcs: Mapping[tuple[int, int], float]
    delta_minus: int | None = None
    delta_plus: int | None = None
    provenance: Mapping = field(default_factory=dict)

    def __post_init__(self):
        m = len(self.nodes)
        for (u, v), w in self.arcs.items():
            if not (0 <= u < m and 0 <= v < m):
                raise StructureError(f"arc ({u}, {v}) references a missing node")
            if not 0.0 < w <= 1.0:
                raise StructureError(f"weight {w} of arc {self.nodes[u].id}->{self.nodes[v].id} "
                                     "outside (0, 1]")
        cycle = find_cycle(m, self.arcs)
        if cycle is not None:
            raise StructureError("network is not acyclic: "
                                 + " -> ".join(self.nodes[i].id for i in cycle))

    @property
    def m(self) -> int:
        return len(self.nodes)

    def successors(self, u: int) -> list[tuple[int, float]]:
        return sorted((v, w) for (a, v), w in self.arcs.items() if a == u)

    def out_lists(self) -> list[list[tuple[int, float]]]:
        out: list[list[tuple[int, float]]] = [[] for _ in self.nodes]
        for (u, v), w in sorted(self.arcs.items()):
            out[u].append((v, w))
        return out

    def has_arc(self, src, dst) -> bool:
        return (self.resolve(src), self.resolve(dst)) in self.arcs

    def resolve(self, key) -> int:
        """Node index from an index, an id ``attr_value``, or ``attr=value``.

        Ambiguous or unknown names raise ``KeyError``; nothing is guessed.
        """
        if isinstance(key, (int, np.integer)):
            if not 0 <= key < self.m:
                raise KeyError(f"node index {key} out of range")
            return int(key)
        hits = [i for i, n in enumerate(self.nodes) if key in (n.id, n.label)]
        if len(hits) == 1:
            return hits[0]
        if hits:
            raise KeyError(f"node name {key!r} is ambiguous")
        raise KeyError(f"no node named {key!r}")

    def to_json(self) -> str:
        doc = {
            "format_version": FORMAT_VERSION,
            "nodes": [
                {"id": n.id, "attribute": n.attribute, "value": n.value, "level": n.level,
                 "role": n.role}
                for n in self.nodes
            ],
            "arcs": [
                {"src": self.nodes[u].id, "dst": self.nodes[v].id, "weight": w}
                for (u, v), w in sorted(self.arcs.items())
            ],
            "provenance": self.provenance,
        }
        return json.dumps(doc, indent=2, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text) -> "Sbcn":
        try:
            doc = json.loads(text)
            nodes = tuple(Node(str(n["id"]), str(n["attribute"]), str(n["value"]),
                               int(n["level"]), str(n.get("role", "plain")))
                          for n in doc["nodes"])
            ids = {n.id: i for i, n in enumerate(nodes)}
            if len(ids) != len(nodes):
                raise SbcnError("duplicate node ids in graph JSON")
            arcs = {(ids[a["src"]], ids[a["dst"]]): float(a["weight"]) for a in doc["arcs"]}
        except (KeyError, TypeError, ValueError) as exc:
            raise SbcnError(f"malformed graph JSON: {exc}") from None
        roles = [n.role for n in nodes]
        for role in ("delta_minus", "delta_plus"):
            if roles.count(role) > 1:
                raise SbcnError(f"graph JSON marks more than one {role} node")
        neg = roles.index("delta_minus") if "delta_minus" in roles else None
        pos = roles.index("delta_plus") if "delta_plus" in roles else None
        return cls(nodes, arcs, neg, pos, doc.get("provenance", {}))

    @classmethod
    def load(cls, path) -> "Sbcn":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    def to_dot(self, communities: Mapping[int, int] | None = None) -> str:
        return to_dot(self, communities)


PALETTE = ["#8dd3c7", "#ffffb3", "#bebada", "#fb8072", "#80b1d3", "#fdb462", "#b3de69",
           "#fccde5", "#d9d9d9", "#bc80bd", "#ccebc5", "#ffed6f"]


def _q(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(sbcn: Sbcn, communities: Mapping[int, int] | None = None) -> str:
    """Graphviz digraph with weights as 3-decimal edge labels.

    ``communities`` maps node index to community id; nodes are then filled
    with one palette colour per community.
    """
    lines = ["digraph sbcn {", "  rankdir=LR;"]
    for i, n in enumerate(sbcn.nodes):
        attrs = [f"label={_q(n.label)}"]
        if n.role != "plain":
            attrs.append("shape=box")
            attrs.append("peripheries=2")
        if communities is not None and i in communities:
            c = communities[i]
            attrs.append("style=filled")
            attrs.append(f"fillcolor={_q(PALETTE[c % len(PALETTE)])}")
            attrs.append(f"community={c}")
        lines.append(f"  {_q(n.id)} [{', '.join(attrs)}];")
    for (u, v), w in sorted(sbcn.arcs.items()):
        lines.append(f"  {_q(sbcn.nodes[u].id)} -> {_q(sbcn.nodes[v].id)} "
                     f"[label=\"{w:.3f}\", weight={w!r}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_graph(sbcn: Sbcn, format: str = "json") -> bytes:
    if format == "json":
        return sbcn.to_json().encode("utf-8")
    if format == "dot":
        return to_dot(sbcn).encode("utf-8")
    raise ValueError(f"unknown export format {format!r}")


def import_graph(data: bytes | str) -> Sbcn:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return Sbcn.from_json(data)


def edge_weight(matrix: BernoulliMatrix, src: int, dst: int) -> float:
    """Confidence P(dst | src) - P(dst | not src)."""
    return conditional(matrix, dst, src) - conditional(matrix, dst, src, negated=True)


def nodes_from_matrix(matrix: BernoulliMatrix) -> tuple[tuple[Node, ...], int | None, int | None]:
    has_decision = matrix.schema is not None and matrix.schema.decision is not None
    neg, pos = matrix.decision_indices() if has_decision else (None, None)
    nodes = []
    for i, v in enumerate(matrix.variables):
        role = "delta_minus" if i == neg else "delta_plus" if i == pos else "plain"
        nodes.append(Node(v.id, v.attribute, v.value, v.level, role))
    return tuple(nodes), neg, pos


def weigh_edges(arcs, matrix: BernoulliMatrix, provenance: Mapping | None = None) -> Sbcn:
    """Attach confidence weights to the selected arcs and mark decision nodes."""
    weights = {}
    for u, v in sorted(arcs):
        w = edge_weight(matrix, u, v)
        if not w > 0.0:
            raise SbcnError(f"internal consistency: arc {matrix.variables[u].id} -> "
                            f"{matrix.variables[v].id} has non-positive weight {w}")
        weights[(u, v)] = w
    nodes, neg, pos = nodes_from_matrix(matrix)
    return Sbcn(nodes, weights, neg, pos, dict(provenance or {}))


def learn(matrix: BernoulliMatrix, config: HillClimbConfig = HillClimbConfig(),
          schema: Schema | None = None) -> Sbcn:
    """Full pipeline: prima facie graph, BIC hill climbing, weighting."""
    pf = prima_facie_graph(matrix, schema)
    scorer = BicScorer(matrix)
    res = hill_climb(pf, matrix, config, scorer)
    arcs = sorted(res.arcs)
    provenance = {
        "bic_score": res.score,
        "ll": scorer.log_likelihood(arcs),
        "dim": dimension(matrix.m, arcs),
        "seed": config.rng_seed,
        "iterations": res.iterations,
        "restarts": config.restarts,
        "patience": config.patience,
        "max_iterations": config.max_iterations,
        "local_optimum": res.local_optimum,
        "samples": matrix.sample_count,
        "prima_facie_arcs": int(pf.prima_facie.sum()),
        "temporal_arcs": int(pf.temporal.sum()),
        "dropped_variables": [v.id for v in matrix.dropped],
    }
    if matrix.schema is not None:
        provenance["schema"] = matrix.schema.to_dict()
    return weigh_edges(arcs, matrix, provenance)
