"""Monte Carlo absorbing random walks from a group node to the decision nodes.

Each walk moves along out-arcs with probability proportional to their
weights, is absorbed at either decision node, and restarts from its source
whenever it lands on any other node without out-arcs.

Randomness: walk ``i`` from source ``v`` consumes the uniforms of row ``i`` in
consecutive 64-column blocks, block ``b`` drawn from
``PCG64(SeedSequence([seed, v, b]))``. A walk's trajectory depends only on
``(seed, v, i)``, so results do not change with the number of workers.
"""

from __future__ import annotations

import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import UnreachableDecisionError, ValidationError
from .sbcn import Sbcn

BLOCK = 64
NEG, POS, NONTERM = 0, 1, -1


@dataclass(frozen=True)
class WalkConfig:
    n_walks: int = 10_000
    max_total_steps: int = 10_000
    rng_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.n_walks <= 0 or self.max_total_steps <= 0 or self.workers <= 0:
            raise ValidationError("n_walks, max_total_steps and workers must be positive")
        if self.rng_seed < 0:
            raise ValidationError("rng_seed must be non-negative")


def _uniform_block(seed: int, source: int, block: int, start: int, stop: int) -> np.ndarray:
    bitgen = np.random.PCG64(np.random.SeedSequence([seed, source, block]))
    bitgen.advance(start * BLOCK)
    return np.random.Generator(bitgen).random((stop - start, BLOCK))


class WalkStream:
    """The uniform sequence of a single walk, drawn lazily block by block."""

    def __init__(self, seed: int, source: int, index: int):
        self.seed, self.source, self.index = seed, source, index
        self._block = -1
        self._buf = None
        self._pos = BLOCK

    def random(self) -> float:
        if self._pos == BLOCK:
            self._block += 1
            self._buf = _uniform_block(self.seed, self.source, self._block,
                                       self.index, self.index + 1)[0]
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return float(u)


class _Tables:
    """Padded successor / cumulative-probability tables for vectorized moves."""

    def __init__(self, sbcn: Sbcn):
        if sbcn.delta_minus is None or sbcn.delta_plus is None:
            raise ValidationError("random walks need both decision nodes")
        out = sbcn.out_lists()
        m = sbcn.m
        deg = np.array([len(o) for o in out], dtype=np.intp)
        width = max(1, int(deg.max()) if m else 1)
        self.succ = np.zeros((m, width), dtype=np.intp)
        self.cum = np.full((m, width), np.inf)
        self.cum_lists: list[list[float]] = []
        for u, arcs in enumerate(out):
            if not arcs:
                self.cum_lists.append([])
                continue
            w = np.array([a[1] for a in arcs])
            c = np.cumsum(w) / w.sum()
            c[-1] = 1.0
            self.succ[u, :len(arcs)] = [a[0] for a in arcs]
            self.cum[u, :len(arcs)] = c
            self.cum_lists.append(c.tolist())
        self.out = out
        self.deg = deg
        self.is_decision = np.zeros(m, dtype=bool)
        self.is_decision[[sbcn.delta_minus, sbcn.delta_plus]] = True
        self.is_sink = (deg == 0) & ~self.is_decision
        self.delta_minus = sbcn.delta_minus
        self.delta_plus = sbcn.delta_plus

    def step(self, cur: np.ndarray, u: np.ndarray) -> np.ndarray:
        k = (self.cum[cur] <= u[:, None]).sum(axis=1)
        return self.succ[cur, k]


def _reaches_decision(tables: _Tables, source: int) -> bool:
    seen = {source}
    queue = deque([source])
    while queue:
        node = queue.popleft()
        if tables.is_decision[node]:
            return True
        for nxt, _ in tables.out[node]:
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return False


@dataclass(frozen=True)
class WalkOutcome:
    absorbed_at: int | None  # node index, None when nonterminating
    final_segment_steps: int
    total_steps: int
    visited: frozenset
    restarts: int

    @property
    def terminated(self) -> bool:
        return self.absorbed_at is not None


def walk_once(sbcn: Sbcn, source, rng, max_total_steps: int = 10_000,
              _tables: _Tables | None = None) -> WalkOutcome:
    """One walk from ``source``; ``rng`` needs a ``random()`` method.

    ``visited`` covers the final segment only (after the last restart) and
    includes the source.
    """
    t = _tables or _Tables(sbcn)
    src = sbcn.resolve(source)
    if t.is_decision[src]:
        return WalkOutcome(src, 0, 0, frozenset({src}), 0)
    cur, seg, total, restarts = src, 0, 0, 0
    visited = {src}
    if not _reaches_decision(t, src):
        return WalkOutcome(None, 0, 0, frozenset(visited), 0)
    while total < max_total_steps:
        u = rng.random()
        cum = t.cum_lists[cur]
        k = 0
        while cum[k] <= u:
            k += 1
        cur = t.out[cur][k][0]
        seg += 1
        total += 1
        visited.add(cur)
        if t.is_decision[cur]:
            return WalkOutcome(cur, seg, total, frozenset(visited), restarts)
        if t.is_sink[cur]:
            cur, seg = src, 0
            restarts += 1
            visited = {src}
    return WalkOutcome(None, seg, total, frozenset(visited), restarts)


@dataclass
class _Batch:
    absorbed: np.ndarray  # NEG / POS / NONTERM
    seg_steps: np.ndarray
    total_steps: np.ndarray
    restarts: np.ndarray
    passed: np.ndarray  # final segment touched one of the ``via`` nodes


def _simulate(t: _Tables, src: int, start: int, stop: int, seed: int, max_steps: int,
              via_mask: np.ndarray) -> _Batch:
    n = stop - start
    absorbed = np.full(n, NONTERM, dtype=np.int8)
    seg = np.zeros(n, dtype=np.int64)
    total = np.zeros(n, dtype=np.int64)
    restarts = np.zeros(n, dtype=np.int64)
    passed = np.full(n, bool(via_mask[src]))
    if t.is_decision[src]:
        absorbed[:] = NEG if src == t.delta_minus else POS
        return _Batch(absorbed, seg, total, restarts, passed)
    if not _reaches_decision(t, src):
        return _Batch(absorbed, seg, total, restarts, passed)
    active = np.arange(n)
    cur = np.full(n, src, dtype=np.intp)
    block = None
    for k in range(max_steps):
        if active.size == 0:
            break
        if k % BLOCK == 0:
            block = _uniform_block(seed, src, k // BLOCK, start, stop)
        nxt = t.step(cur, block[active, k % BLOCK])
        seg[active] += 1
        total[active] += 1
        passed[active] |= via_mask[nxt]
        hit_neg = nxt == t.delta_minus
        hit_pos = nxt == t.delta_plus
        absorbed[active[hit_neg]] = NEG
        absorbed[active[hit_pos]] = POS
        sink = t.is_sink[nxt]
        if sink.any():
            idx = active[sink]
            nxt[sink] = src
            seg[idx] = 0
            restarts[idx] += 1
            passed[idx] = via_mask[src]
        keep = ~(hit_neg | hit_pos)
        active = active[keep]
        cur = nxt[keep]
    return _Batch(absorbed, seg, total, restarts, passed)


def simulate(sbcn: Sbcn, source, config: WalkConfig, via: Iterable = ()) -> _Batch:
    """Run ``config.n_walks`` walks, split over ``config.workers`` threads."""
    t = _Tables(sbcn)
    src = sbcn.resolve(source)
    via_mask = np.zeros(sbcn.m, dtype=bool)
    for node in via:
        via_mask[sbcn.resolve(node)] = True
    n = config.n_walks
    bounds = np.linspace(0, n, min(config.workers, n) + 1).astype(int)
    chunks = list(zip(bounds[:-1], bounds[1:]))

    def run(chunk):
        return _simulate(t, src, int(chunk[0]), int(chunk[1]), config.rng_seed,
                         config.max_total_steps, via_mask)

    if len(chunks) == 1:
        parts = [run(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(run, chunks))
    return _Batch(*(np.concatenate([getattr(p, f) for p in parts])
                    for f in ("absorbed", "seg_steps", "total_steps", "restarts", "passed")))


@dataclass(frozen=True)
class GroupScore:
    """Walk-based scores of one node.

    ``ds_minus``/``ds_plus`` are fractions of terminating walks absorbed at the
    negative/positive decision; ``as_minus``/``as_plus`` the mean final-segment
    length of those walks (None when no walk was absorbed there).
    """

    node: str
    ds_minus: float
    ds_plus: float
    as_minus: float | None
    as_plus: float | None
    n: int
    n_effective: int
    nonterminating: int
    rw_minus: int
    rw_plus: int
    mean_total_steps: float

    TSV_HEADER = "node\tds_minus\tds_plus\tas_minus\tas_plus\tn\tnonterminating"

    def tsv_row(self) -> str:
        return "\t".join([self.node, _fmt(self.ds_minus), _fmt(self.ds_plus),
                          _fmt(self.as_minus), _fmt(self.as_plus), str(self.n_effective),
                          str(self.nonterminating)])


def _fmt(x) -> str:
    return "NA" if x is None else f"{x:.6f}"


def _score_from_batch(name: str, b: _Batch) -> GroupScore:
    neg = b.absorbed == NEG
    pos = b.absorbed == POS
    rw_minus, rw_plus = int(neg.sum()), int(pos.sum())
    n_eff = rw_minus + rw_plus
    if n_eff == 0:
        raise UnreachableDecisionError(f"no walk from {name} reached a decision node")
    ds_minus = rw_minus / n_eff
    return GroupScore(
        node=name,
        ds_minus=ds_minus,
        ds_plus=1.0 - ds_minus,
        as_minus=float(b.seg_steps[neg].mean()) if rw_minus else None,
        as_plus=float(b.seg_steps[pos].mean()) if rw_plus else None,
        n=len(b.absorbed),
        n_effective=n_eff,
        nonterminating=len(b.absorbed) - n_eff,
        rw_minus=rw_minus,
        rw_plus=rw_plus,
        mean_total_steps=float(b.total_steps[neg | pos].mean()),
    )


def group_score(sbcn: Sbcn, v, config: WalkConfig = WalkConfig()) -> GroupScore:
    """Discrimination score ds- of node ``v`` and the average steps as-/as+."""
    src = sbcn.resolve(v)
    return _score_from_batch(sbcn.nodes[src].id, simulate(sbcn, src, config))


def score_all(sbcn: Sbcn, config: WalkConfig = WalkConfig()) -> list[tuple[str, GroupScore | None]]:
    """Group score of every node; None where no walk reaches a decision."""
    out = []
    for i, node in enumerate(sbcn.nodes):
        try:
            out.append((node.id, group_score(sbcn, i, config)))
        except UnreachableDecisionError:
            out.append((node.id, None))
    return out


def group_scores_tsv(scores) -> str:
    lines = [GroupScore.TSV_HEADER]
    for name, sc in scores:
        if sc is None:
            lines.append(f"{name}\tNA\tNA\tNA\tNA\t0\tNA")
        else:
            lines.append(sc.tsv_row())
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ExplainableScore:
    """Share of decision-reaching walks whose final segment passed ``via``.

    ``fed_minus`` is None when no walk was absorbed at the negative decision
    (likewise ``fed_plus``).
    """

    node: str
    via: tuple[str, ...]
    fed_minus: float | None
    fed_plus: float | None
    rw_minus: int
    rw_plus: int
    via_minus: int
    via_plus: int

    TSV_HEADER = "node\tvia\tfed_minus\tfed_plus\trw_minus\trw_plus"

    def tsv_row(self) -> str:
        return "\t".join([self.node, ",".join(self.via), _fmt(self.fed_minus),
                          _fmt(self.fed_plus), str(self.rw_minus), str(self.rw_plus)])


def explainable_fraction(sbcn: Sbcn, v, via, config: WalkConfig = WalkConfig()) -> ExplainableScore:
    """Fraction of explainable discrimination of ``v`` through ``via``.

    ``via`` is one node or an iterable of nodes (a walk counts when its final
    segment touched any of them).
    """
    if isinstance(via, (str, int, np.integer)):
        via = [via]
    via_idx = [sbcn.resolve(x) for x in via]
    if not via_idx:
        raise ValidationError("explainable_fraction needs at least one intermediate node")
    for i in via_idx:
        if i in (sbcn.delta_minus, sbcn.delta_plus):
            raise ValidationError("intermediate node must not be a decision node")
    src = sbcn.resolve(v)
    b = simulate(sbcn, src, config, via=via_idx)
    neg = b.absorbed == NEG
    pos = b.absorbed == POS
    rw_minus, rw_plus = int(neg.sum()), int(pos.sum())
    via_minus = int((neg & b.passed).sum())
    via_plus = int((pos & b.passed).sum())
    return ExplainableScore(
        node=sbcn.nodes[src].id,
        via=tuple(sbcn.nodes[i].id for i in via_idx),
        fed_minus=via_minus / rw_minus if rw_minus else None,
        fed_plus=via_plus / rw_plus if rw_plus else None,
        rw_minus=rw_minus, rw_plus=rw_plus, via_minus=via_minus, via_plus=via_plus,
    )


def binomial_se(p: float, n: int) -> float:
    return math.sqrt(p * (1.0 - p) / n)
