"""Personalized PageRank over the network and the generalized discrimination
score of individuals and subgroups.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .dataset import Schema, categorize, read_table
from .errors import ConvergenceError, UndefinedScoreError, ValidationError
from .sbcn import Sbcn


@dataclass(frozen=True)
class PprConfig:
    damping: float = 0.85
    tolerance: float = 1e-9
    max_iterations: int = 1000

    def __post_init__(self):
        if not 0.0 < self.damping < 1.0:
            raise ValidationError("damping must lie in (0, 1)")
        if self.tolerance <= 0 or self.max_iterations <= 0:
            raise ValidationError("tolerance and max_iterations must be positive")


def transition_matrix(sbcn: Sbcn) -> tuple[sp.csr_matrix, np.ndarray]:
    """Row-stochastic weight-proportional transitions and the dangling mask.

    Rows of nodes without out-arcs are all zero; their mass is redirected to
    the seed vector during iteration.
    """
    m = sbcn.m
    rows, cols, vals = [], [], []
    out_w = np.zeros(m)
    for (u, v), w in sbcn.arcs.items():
        out_w[u] += w
    for (u, v), w in sorted(sbcn.arcs.items()):
        rows.append(u)
        cols.append(v)
        vals.append(w / out_w[u])
    P = sp.csr_matrix((vals, (rows, cols)), shape=(m, m))
    return P, out_w == 0


def seed_vector(sbcn: Sbcn, seeds: Iterable) -> np.ndarray:
    idx = sorted({sbcn.resolve(s) for s in seeds})
    if not idx:
        raise ValidationError("personalized PageRank needs at least one seed node")
    vec = np.zeros(sbcn.m)
    vec[idx] = 1.0 / len(idx)
    return vec


def _power_iterate(PT: sp.csr_matrix, dangling: np.ndarray, S: np.ndarray,
                   config: PprConfig) -> np.ndarray:
    """Iterate every row of the (k, m) seed matrix ``S`` to its own fixed point."""
    d = config.damping
    X = S.copy()
    active = np.arange(S.shape[0])
    residual = np.inf
    for _ in range(config.max_iterations):
        Xa, Sa = X[active], S[active]
        dang = Xa[:, dangling].sum(axis=1, keepdims=True)
        new = d * (PT @ Xa.T).T + (d * dang + (1.0 - d)) * Sa
        change = np.abs(new - Xa).sum(axis=1)
        X[active] = new
        done = change < config.tolerance
        residual = float(change.max())
        active = active[~done]
        if active.size == 0:
            return X
    raise ConvergenceError(
        f"personalized PageRank did not converge in {config.max_iterations} iterations "
        f"(L1 residual {residual:.3e})", residual)


def personalized_pagerank(sbcn: Sbcn, seeds: Iterable, config: PprConfig = PprConfig()) -> np.ndarray:
    """PageRank vector teleporting uniformly to ``seeds`` (damping = continue prob)."""
    P, dangling = transition_matrix(sbcn)
    return _power_iterate(P.T.tocsr(), dangling, seed_vector(sbcn, seeds)[None, :], config)[0]


@dataclass(frozen=True)
class GeneralizedScore:
    gds_minus: float
    gds_plus: float
    ppr_minus: float
    ppr_plus: float


def _gds(ppr_minus: float, ppr_plus: float) -> GeneralizedScore:
    total = ppr_minus + ppr_plus
    if not total > 0.0:
        raise UndefinedScoreError("neither decision node receives PageRank mass from the seeds")
    g = ppr_minus / total
    return GeneralizedScore(g, 1.0 - g, ppr_minus, ppr_plus)


def generalized_score(sbcn: Sbcn, seeds: Iterable, config: PprConfig = PprConfig()) -> GeneralizedScore:
    """gds- = ppr(neg) / (ppr(neg) + ppr(pos)) personalized on ``seeds``."""
    if sbcn.delta_minus is None or sbcn.delta_plus is None:
        raise ValidationError("generalized score needs both decision nodes")
    x = personalized_pagerank(sbcn, seeds, config)
    return _gds(float(x[sbcn.delta_minus]), float(x[sbcn.delta_plus]))


def schema_for(sbcn: Sbcn, schema: Schema | None = None) -> Schema:
    """The schema with resolved cutpoints recorded at learning time, if any."""
    doc = sbcn.provenance.get("schema") if sbcn.provenance else None
    if doc is not None:
        return Schema.from_dict(doc)
    if schema is None:
        raise ValidationError("network carries no schema; pass one explicitly")
    return schema


def record_seeds(sbcn: Sbcn, record: dict, include_decision: bool = False,
                 decision_attribute: str | None = None) -> list[int]:
    """Nodes matching a categorized record's attribute values."""
    lookup = {(n.attribute, n.value): i for i, n in enumerate(sbcn.nodes)}
    seeds = []
    for attr, value in record.items():
        if value is None or (not include_decision and attr == decision_attribute):
            continue
        i = lookup.get((attr, value))
        if i is not None:
            seeds.append(i)
    return sorted(set(seeds))


@dataclass(frozen=True)
class RecordScore:
    row_id: int
    seeds: tuple[int, ...]
    score: GeneralizedScore | None

    TSV_HEADER = "row_id\tppr_minus\tppr_plus\tgds_minus"

    def tsv_row(self) -> str:
        if self.score is None:
            return f"{self.row_id}\tNA\tNA\tNA"
        s = self.score
        return f"{self.row_id}\t{s.ppr_minus:.9g}\t{s.ppr_plus:.9g}\t{s.gds_minus:.9g}"


def score_seed_sets(sbcn: Sbcn, seed_sets: Sequence[Sequence[int]],
                    config: PprConfig = PprConfig(), batch: int = 256) -> list[GeneralizedScore | None]:
    """Generalized scores for many seed sets; None for empty or undefined ones."""
    P, dangling = transition_matrix(sbcn)
    PT = P.T.tocsr()
    uniq = sorted({tuple(s) for s in seed_sets if s})
    result: dict[tuple, GeneralizedScore | None] = {}
    for start in range(0, len(uniq), batch):
        chunk = uniq[start:start + batch]
        S = np.zeros((len(chunk), sbcn.m))
        for r, seeds in enumerate(chunk):
            S[r, list(seeds)] = 1.0 / len(seeds)
        X = _power_iterate(PT, dangling, S, config)
        for r, seeds in enumerate(chunk):
            try:
                result[seeds] = _gds(float(X[r, sbcn.delta_minus]), float(X[r, sbcn.delta_plus]))
            except UndefinedScoreError:
                result[seeds] = None
    return [result.get(tuple(s)) if s else None for s in seed_sets]


def score_records(sbcn: Sbcn, csv_source, schema: Schema | None = None,
                  config: PprConfig = PprConfig(), include_decision: bool = False) -> list[RecordScore]:
    """Score each CSV record by seeding the nodes of its attribute values.

    The decision attribute is left out of the seeds unless ``include_decision``.
    """
    schema = schema_for(sbcn, schema)
    if schema.decision is None:
        raise ValidationError("record scoring needs a schema with a decision attribute")
    cols, nrows = read_table(csv_source, schema)
    cat = categorize(schema, cols)
    names = [a.name for a in schema.attributes]
    dec = schema.decision.attribute_name
    seed_sets = [record_seeds(sbcn, {a: cat[a][r] for a in names}, include_decision, dec)
                 for r in range(nrows)]
    scores = score_seed_sets(sbcn, seed_sets, config)
    return [RecordScore(r + 1, tuple(s), sc) for r, (s, sc) in enumerate(zip(seed_sets, scores))]
