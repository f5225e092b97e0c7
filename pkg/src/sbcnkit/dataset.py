"""Decision-record ingestion: schema, discretization, one-hot Bernoulli expansion,
and the empirical probability estimates used by the rest of the package.

All estimates are computed from exact integer counts; division happens only at
query time.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import warnings
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
import yaml

from .errors import (
    DegenerateTableError,
    IngestionError,
    SchemaError,
    UndefinedProbabilityError,
)

log = logging.getLogger(__name__)

DEFAULT_QUANTILES = 4
DEFAULT_MISSING = ("", "?", "NA")
KINDS = ("categorical", "numeric", "event")


@dataclass(frozen=True)
class Attribute:
    """One column of the decision table.

    ``kind`` is ``categorical``, ``numeric`` (bucketed by ``cutpoints``) or
    ``event`` (a 0/1 column where only the value ``1`` becomes a variable).
    ``quantiles`` requests automatic k-quantile cutpoints; it is cleared once
    the cutpoints are resolved against data.
    """

    name: str
    temporal_level: int
    kind: str = "categorical"
    cutpoints: tuple[float, ...] | None = None
    quantiles: int | None = None


@dataclass(frozen=True)
class Decision:
    attribute_name: str
    positive_value: str
    negative_value: str


@dataclass(frozen=True)
class Schema:
    attributes: tuple[Attribute, ...]
    decision: Decision | None = None
    missing_values: tuple[str, ...] = DEFAULT_MISSING

    def __post_init__(self):
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise SchemaError(f"duplicate attribute names: {dup}")
        by_name = {a.name: a for a in self.attributes}
        dec = None
        if self.decision is not None:
            dec = by_name.get(self.decision.attribute_name)
            if dec is None:
                raise SchemaError(
                    f"decision attribute {self.decision.attribute_name!r} not in attribute list")
            if self.decision.positive_value == self.decision.negative_value:
                raise SchemaError("positive and negative decision values must differ")
        for a in self.attributes:
            if a.kind not in KINDS:
                raise SchemaError(f"attribute {a.name!r}: unknown kind {a.kind!r}")
            if not isinstance(a.temporal_level, int) or a.temporal_level < 0:
                raise SchemaError(f"attribute {a.name!r}: temporal_level must be a non-negative integer")
            if a.kind != "numeric" and (a.cutpoints is not None or a.quantiles is not None):
                raise SchemaError(f"attribute {a.name!r}: only numeric attributes take cutpoints")
            if a.kind == "numeric":
                if a.cutpoints is None and a.quantiles is None:
                    raise SchemaError(f"attribute {a.name!r}: numeric attribute needs cutpoints")
                if a.cutpoints is not None:
                    cuts = a.cutpoints
                    if any(not math.isfinite(c) for c in cuts):
                        raise SchemaError(f"attribute {a.name!r}: cutpoints must be finite")
                    if any(b <= a_ for a_, b in zip(cuts, cuts[1:])):
                        raise SchemaError(f"attribute {a.name!r}: cutpoints must be strictly ascending")
                if a.quantiles is not None and a.quantiles < 2:
                    raise SchemaError(f"attribute {a.name!r}: quantiles must be >= 2")
            if dec is not None and a is not dec and a.temporal_level >= dec.temporal_level:
                raise SchemaError(
                    f"decision attribute {dec.name!r} must have a strictly higher "
                    f"temporal_level than {a.name!r}")

    def attribute(self, name: str) -> Attribute:
        for a in self.attributes:
            if a.name == name:
                return a
        raise KeyError(name)

    @classmethod
    def from_dict(cls, doc: dict) -> "Schema":
        if not isinstance(doc, dict) or "attributes" not in doc:
            raise SchemaError("schema needs a top-level 'attributes' key")
        attrs = []
        for entry in doc["attributes"]:
            try:
                name = str(entry["name"])
                level = entry["temporal_level"]
            except (KeyError, TypeError) as exc:
                raise SchemaError(f"attribute entry {entry!r} lacks {exc}") from None
            kind = entry.get("kind", "categorical")
            cuts = entry.get("cutpoints")
            quantiles = entry.get("quantiles")
            if cuts == "auto":
                cuts, quantiles = None, quantiles or DEFAULT_QUANTILES
            elif isinstance(cuts, dict):
                quantiles = int(cuts.get("auto", DEFAULT_QUANTILES))
                cuts = None
            elif cuts is not None:
                try:
                    cuts = tuple(float(c) for c in cuts)
                except (TypeError, ValueError):
                    raise SchemaError(f"attribute {name!r}: cutpoints must be numbers") from None
            attrs.append(Attribute(name, level, kind, cuts, quantiles))
        dec = doc.get("decision")
        decision = None
        if dec is not None:
            try:
                decision = Decision(str(dec["attribute_name"]), str(dec["positive_value"]),
                                    str(dec["negative_value"]))
            except (KeyError, TypeError) as exc:
                raise SchemaError(f"decision entry lacks {exc}") from None
        missing = tuple(str(x) for x in doc.get("missing_values", DEFAULT_MISSING))
        return cls(tuple(attrs), decision, missing)

    @classmethod
    def from_yaml(cls, text: str) -> "Schema":
        try:
            doc = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise SchemaError(f"schema is not valid YAML: {exc}") from None
        return cls.from_dict(doc)

    @classmethod
    def load(cls, path) -> "Schema":
        with open(path, encoding="utf-8") as fh:
            return cls.from_yaml(fh.read())

    def to_dict(self) -> dict:
        attrs = []
        for a in self.attributes:
            entry = {"name": a.name, "temporal_level": a.temporal_level, "kind": a.kind}
            if a.cutpoints is not None:
                entry["cutpoints"] = list(a.cutpoints)
            elif a.quantiles is not None:
                entry["cutpoints"] = {"auto": a.quantiles}
            attrs.append(entry)
        doc = {"attributes": attrs}
        if self.decision is not None:
            doc["decision"] = {
                "attribute_name": self.decision.attribute_name,
                "positive_value": self.decision.positive_value,
                "negative_value": self.decision.negative_value,
            }
        doc["missing_values"] = list(self.missing_values)
        return doc


def _fmt_cut(c: float) -> str:
    s = format(c, "g")
    return s.replace("-", "m").replace(".", "d")


def bin_labels(cutpoints: Sequence[float]) -> list[str]:
    """Labels for the intervals (-inf, c1], (c1, c2], ..., (ck, inf)."""
    if not cutpoints:
        return ["all"]
    labels = [f"le_{_fmt_cut(cutpoints[0])}"]
    for lo, hi in zip(cutpoints, cutpoints[1:]):
        labels.append(f"from_{_fmt_cut(lo)}_le_{_fmt_cut(hi)}")
    labels.append(f"gt_{_fmt_cut(cutpoints[-1])}")
    return labels


def quantile_cutpoints(values: np.ndarray, k: int) -> tuple[float, ...]:
    """Cutpoints at the interior k-quantiles, rounded to 4 significant digits."""
    values = values[np.isfinite(values)]
    if values.size == 0:
        return ()
    qs = np.quantile(values, np.arange(1, k) / k)
    cuts = sorted({float(f"{q:.4g}") for q in qs})
    # a cut at or above the maximum would leave an empty top bin
    return tuple(c for c in cuts if c < values.max())


def discretize(values: Iterable[float], cutpoints: Sequence[float]) -> list[str]:
    labels = bin_labels(cutpoints)
    idx = np.searchsorted(np.asarray(cutpoints, dtype=float), np.asarray(list(values), dtype=float),
                          side="left")
    return [labels[i] for i in idx]


@dataclass(frozen=True)
class Variable:
    """A Bernoulli event ``attribute = value``."""

    attribute: str
    value: str
    level: int

    @property
    def id(self) -> str:
        return f"{self.attribute}_{self.value}"

    @property
    def label(self) -> str:
        return f"{self.attribute}={self.value}"


@dataclass(frozen=True, eq=False)
class BernoulliMatrix:
    """m Bernoulli variables observed on s samples.

    ``data`` is an (m, s) uint8 array; ``observed`` is an (h, s) boolean array
    telling, per attribute, which samples carry a value. ``var_attr[i]`` is the
    row of ``observed`` belonging to variable ``i``.
    """

    variables: tuple[Variable, ...]
    data: np.ndarray
    attributes: tuple[str, ...]
    observed: np.ndarray
    var_attr: np.ndarray
    dropped: tuple[Variable, ...] = ()
    schema: Schema | None = None
    counts: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.uint8)
        data.flags.writeable = False
        observed = np.ascontiguousarray(self.observed, dtype=bool)
        observed.flags.writeable = False
        var_attr = np.asarray(self.var_attr, dtype=np.intp)
        var_attr.flags.writeable = False
        if data.ndim != 2 or data.shape[0] != len(self.variables):
            raise ValueError("data must be (m, s) with one row per variable")
        if observed.shape != (len(self.attributes), data.shape[1]):
            raise ValueError("observed must be (h, s)")
        counts = data.sum(axis=1, dtype=np.int64)
        counts.flags.writeable = False
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "observed", observed)
        object.__setattr__(self, "var_attr", var_attr)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_binary(cls, variables: Sequence[Variable], data, schema=None) -> "BernoulliMatrix":
        """Wrap a fully observed 0/1 matrix, one attribute per variable."""
        data = np.asarray(data)
        attrs = tuple(v.attribute for v in variables)
        if len(set(attrs)) != len(attrs):
            raise ValueError("from_binary expects one variable per attribute")
        observed = np.ones((len(variables), data.shape[1]), dtype=bool)
        return cls(tuple(variables), data, attrs, observed, np.arange(len(variables)), schema=schema)

    @property
    def m(self) -> int:
        return len(self.variables)

    @property
    def sample_count(self) -> int:
        return self.data.shape[1]

    s = sample_count

    def index(self, key) -> int:
        """Resolve a variable by index, ``Variable``, id ``attr_value`` or ``attr=value``."""
        if isinstance(key, (int, np.integer)):
            if not 0 <= key < self.m:
                raise IndexError(key)
            return int(key)
        if isinstance(key, Variable):
            return self.variables.index(key)
        hits = [i for i, v in enumerate(self.variables) if key in (v.id, v.label)]
        if len(hits) != 1:
            raise KeyError(f"variable {key!r} " + ("is ambiguous" if hits else "not found"))
        return hits[0]

    def decision_indices(self) -> tuple[int, int]:
        """Return (negative, positive) decision variable indices."""
        if self.schema is None or self.schema.decision is None:
            raise SchemaError("matrix has no decision attribute; decision nodes unknown")
        d = self.schema.decision
        return (self.index(f"{d.attribute_name}={d.negative_value}"),
                self.index(f"{d.attribute_name}={d.positive_value}"))


def _open_text(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, newline="", encoding="utf-8")
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8"), newline="")
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="utf-8", newline="")


def read_table(source, schema: Schema) -> tuple[dict[str, list], int]:
    """Read a CSV into per-attribute columns of strings (None for missing)."""
    fh = _open_text(source)
    try:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError("CSV is empty; a header row is required") from None
        missing_cols = [a.name for a in schema.attributes if a.name not in header]
        if missing_cols:
            raise SchemaError(f"CSV header lacks schema attributes: {missing_cols}")
        pos = {a.name: header.index(a.name) for a in schema.attributes}
        miss = set(schema.missing_values)
        cols: dict[str, list] = {a.name: [] for a in schema.attributes}
        nrows = 0
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise IngestionError(
                    f"row {lineno}: expected {len(header)} fields, got {len(row)}", row=lineno)
            for a in schema.attributes:
                cell = row[pos[a.name]].strip()
                cols[a.name].append(None if cell in miss else cell)
            nrows += 1
    finally:
        if isinstance(source, (str, os.PathLike, bytes, bytearray)):
            fh.close()
    return cols, nrows


def resolve_cutpoints(schema: Schema, cols: dict[str, list]) -> Schema:
    """Replace auto-quantile requests with concrete cutpoints from the data."""
    attrs = []
    for a in schema.attributes:
        if a.kind == "numeric" and a.cutpoints is None:
            vals = np.array([_parse_float(x, None, a.name) for x in cols[a.name] if x is not None])
            a = replace(a, cutpoints=quantile_cutpoints(vals, a.quantiles), quantiles=None)
        attrs.append(a)
    return replace(schema, attributes=tuple(attrs))


def _parse_float(cell, row, column) -> float:
    try:
        value = float(cell)
    except ValueError:
        where = f"row {row}, " if row is not None else ""
        raise IngestionError(f"{where}column {column!r}: cannot parse {cell!r} as a number",
                             row=row, column=column) from None
    if math.isnan(value):
        raise IngestionError(f"column {column!r}: NaN is not a value; declare it missing",
                             row=row, column=column)
    return value


def categorize(schema: Schema, cols: dict[str, list]) -> dict[str, list]:
    """Map every cell to its categorical label (numeric cells to their bin)."""
    out = {}
    for a in schema.attributes:
        col = cols[a.name]
        if a.kind == "numeric":
            labels = bin_labels(a.cutpoints)
            cuts = np.asarray(a.cutpoints, dtype=float)
            cat = []
            for r, x in enumerate(col):
                if x is None:
                    cat.append(None)
                else:
                    v = _parse_float(x, r + 2, a.name)
                    cat.append(labels[int(np.searchsorted(cuts, v, side="left"))])
            out[a.name] = cat
        else:
            out[a.name] = list(col)
    return out


def _value_order(kind, cutpoints, seen):
    if kind == "numeric":
        return [lab for lab in bin_labels(cutpoints) if lab in seen]
    if kind == "event":
        return [v for v in ("1",) if v in seen]
    return sorted(seen)


def binarize(schema: Schema, cat: dict[str, list], nrows: int) -> BernoulliMatrix:
    """One-hot expand categorized columns, dropping constant variables."""
    variables, rows, dropped = [], [], []
    observed = np.zeros((len(schema.attributes), nrows), dtype=bool)
    var_attr = []
    for h, a in enumerate(schema.attributes):
        col = cat[a.name]
        obs = np.fromiter((x is not None for x in col), dtype=bool, count=nrows)
        observed[h] = obs
        values = np.array([x if x is not None else "" for x in col], dtype=object)
        for val in _value_order(a.kind, a.cutpoints, {x for x in col if x is not None}):
            bits = (values == val).astype(np.uint8)
            var = Variable(a.name, val, a.temporal_level)
            n = int(bits.sum())
            if n == 0 or n == nrows:
                dropped.append(var)
                continue
            variables.append(var)
            rows.append(bits)
            var_attr.append(h)
    d = schema.decision
    kept = {(v.attribute, v.value) for v in variables}
    for val in (d.negative_value, d.positive_value) if d is not None else ():
        if (d.attribute_name, val) not in kept:
            raise SchemaError(
                f"decision variable {d.attribute_name}={val} is absent or constant in the data")
    if dropped:
        msg = "dropped constant variables: " + ", ".join(v.label for v in dropped)
        warnings.warn(msg, stacklevel=3)
        log.warning(msg)
    data = np.vstack(rows) if rows else np.zeros((0, nrows), dtype=np.uint8)
    return BernoulliMatrix(tuple(variables), data, tuple(a.name for a in schema.attributes),
                           observed, np.array(var_attr, dtype=np.intp), tuple(dropped), schema)


def load_and_binarize(csv_source, schema: Schema) -> BernoulliMatrix:
    """Read decision records and expand them into a Bernoulli matrix.

    ``csv_source`` may be a path, bytes, or a binary/text stream. Numeric
    attributes are bucketed by their cutpoints (auto-quantile cutpoints are
    resolved here and recorded in ``matrix.schema``). Constant variables are
    dropped with a warning; a constant decision column is an error.
    """
    cols, nrows = read_table(csv_source, schema)
    if nrows == 0:
        raise IngestionError("CSV has a header but no records")
    schema = resolve_cutpoints(schema, cols)
    return binarize(schema, categorize(schema, cols), nrows)


def marginal(matrix: BernoulliMatrix, v) -> float:
    """Empirical P(v) = count(v=1) / s."""
    i = matrix.index(v)
    return int(matrix.counts[i]) / matrix.sample_count


def conditional_counts(matrix: BernoulliMatrix, u, v, negated: bool = False) -> tuple[int, int]:
    """(numerator, denominator) counts behind P(u | v) or P(u | not v).

    Samples whose ``v`` attribute is missing are excluded from the negated
    event; they cannot be said to lack ``v``.
    """
    i, j = matrix.index(u), matrix.index(v)
    xu = matrix.data[i].astype(bool)
    xv = matrix.data[j].astype(bool)
    if negated:
        cond = matrix.observed[matrix.var_attr[j]] & ~xv
    else:
        cond = xv
    return int(np.count_nonzero(xu & cond)), int(np.count_nonzero(cond))


def conditional(matrix: BernoulliMatrix, u, v, negated: bool = False) -> float:
    num, den = conditional_counts(matrix, u, v, negated)
    if den == 0:
        which = "not " if negated else ""
        raise UndefinedProbabilityError(
            f"P({matrix.variables[matrix.index(u)].id} | {which}"
            f"{matrix.variables[matrix.index(v)].id}) is undefined: empty conditioning event")
    return num / den


@dataclass(frozen=True)
class ContingencyTable:
    """Group versus decision counts.

    a = group & negative, b = group & positive, c = rest & negative,
    d = rest & positive.
    """

    group: str
    a: int
    b: int
    c: int
    d: int

    @property
    def p1_exact(self) -> Fraction:
        return Fraction(self.a, self.a + self.b)

    @property
    def p2_exact(self) -> Fraction:
        return Fraction(self.c, self.c + self.d)

    @property
    def rd_exact(self) -> Fraction:
        return self.p1_exact - self.p2_exact

    @property
    def p1(self) -> float:
        return float(self.p1_exact)

    @property
    def p2(self) -> float:
        return float(self.p2_exact)

    @property
    def rd(self) -> float:
        return float(self.rd_exact)

    @property
    def total(self) -> int:
        return self.a + self.b + self.c + self.d

    TSV_HEADER = "group\ta\tb\tc\td\tp1\tp2\trd"

    def tsv_row(self) -> str:
        return (f"{self.group}\t{self.a}\t{self.b}\t{self.c}\t{self.d}\t"
                f"{self.p1:.6f}\t{self.p2:.6f}\t{self.rd:.6f}")


def contingency(matrix: BernoulliMatrix, group, decision_neg, decision_pos) -> ContingencyTable:
    """Risk-difference table for ``group`` against the two decision outcomes.

    Only samples with an observed decision and an observed group attribute
    are counted.
    """
    g, n, p = matrix.index(group), matrix.index(decision_neg), matrix.index(decision_pos)
    if g in (n, p):
        raise ValueError("group must differ from the decision variables")
    xg = matrix.data[g].astype(bool)
    xn = matrix.data[n].astype(bool)
    xp = matrix.data[p].astype(bool)
    keep = (xn | xp) & matrix.observed[matrix.var_attr[g]]
    a = int(np.count_nonzero(keep & xg & xn))
    b = int(np.count_nonzero(keep & xg & xp))
    c = int(np.count_nonzero(keep & ~xg & xn))
    d = int(np.count_nonzero(keep & ~xg & xp))
    name = matrix.variables[g].id
    if a + b == 0:
        raise DegenerateTableError(f"group {name} has no records with a decision")
    if c + d == 0:
        raise DegenerateTableError(f"complement of group {name} has no records with a decision")
    return ContingencyTable(name, a, b, c, d)
