"""Countably indexed nonnegative integer matrices.

A :class:`CountableMatrix` is a finite block of exceptional entries laid over a
parametric tail rule. Entries are evaluated lazily, so matrices with infinite
rows (a full first row, an upper-triangular fill) are first-class citizens.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property, reduce
from typing import Iterable, Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import sequences as seq
from .sequences import ASequence


class DomainError(ValueError):
    """Index outside the declared index set."""


# --------------------------------------------------------------------------
# index sets


@dataclass(frozen=True)
class IndexSet:
    """One-sided (``"n"``: 0, 1, 2, ...) or two-sided (``"z"``) index set.

    Two-sided sets are enumerated by the spiral 0, 1, -1, 2, -2, ... so that
    every initial segment is a centered window. ``size`` makes a one-sided set
    finite.
    """

    kind: str = "n"
    size: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("n", "z"):
            raise ValueError(f"index set kind must be 'n' or 'z', got {self.kind!r}")
        if self.size is not None and (self.kind != "n" or self.size < 1):
            raise ValueError("only one-sided index sets may be finite, with size >= 1")

    def enumerate(self, k: int) -> int:
        if k < 0 or (self.size is not None and k >= self.size):
            raise DomainError(f"enumeration position {k} out of range")
        if self.kind == "n":
            return k
        return (k + 1) // 2 if k % 2 else -(k // 2)

    def position(self, i: int) -> int:
        self.check(i)
        if self.kind == "n":
            return i
        return 2 * i - 1 if i > 0 else -2 * i

    def contains(self, i) -> bool:
        if not isinstance(i, (int, np.integer)) or isinstance(i, bool):
            return False
        if self.kind == "n":
            return i >= 0 and (self.size is None or i < self.size)
        return True

    def check(self, i):
        if not self.contains(i):
            raise DomainError(f"index {i!r} is not in the {self.describe()} index set")

    def window(self, N: int) -> list[int]:
        if self.size is not None:
            N = min(N, self.size)
        return [self.enumerate(k) for k in range(N)]

    @property
    def finite(self) -> bool:
        return self.size is not None

    def describe(self) -> str:
        if self.kind == "z":
            return "two-sided"
        return "one-sided" if self.size is None else f"finite({self.size})"

    def clip_range(self, lo: Optional[int], hi: Optional[int]):
        """Intersect the index interval [lo, hi] (None = unbounded) with the set."""
        if self.kind == "n":
            lo = 0 if lo is None else max(lo, 0)
            if self.size is not None:
                hi = self.size - 1 if hi is None else min(hi, self.size - 1)
        return lo, hi


# --------------------------------------------------------------------------
# tail rules
#
# Every rule provides entry(i, j), row_support(i), col_support(j) where a
# support is a sorted tuple of indices or None when it is infinite. Supports
# may list cells whose value is zero only if they are not in the index set;
# callers intersect with the index set.


def _stencil_tuple(stencil) -> tuple:
    items = stencil.items() if isinstance(stencil, dict) else stencil
    return tuple(sorted((int(d), int(c)) for d, c in items if int(c) != 0))


@dataclass(frozen=True)
class Banded:
    """m_ij = stencil[j - i]."""

    stencil: tuple

    def __post_init__(self):
        object.__setattr__(self, "stencil", _stencil_tuple(self.stencil))
        if any(c < 0 for _, c in self.stencil):
            raise ValueError("stencil coefficients must be nonnegative")

    kind = "banded"

    @cached_property
    def coef(self) -> dict:
        return dict(self.stencil)

    def entry(self, i, j):
        return self.coef.get(j - i, 0)

    def row_support(self, i):
        return tuple(i + d for d, _ in self.stencil)

    def col_support(self, j):
        return tuple(sorted(j - d for d, _ in self.stencil))

    @property
    def finite_rows(self):
        return True

    def to_json(self):
        return {"kind": "banded", "stencil": {str(d): c for d, c in self.stencil}}


@dataclass(frozen=True)
class RowFormula:
    """Closed-form rows indexed by a sequence a_n.

    ``tent_perturbation``: row 0 is all ones, row n >= 1 has a_n at column n-1.
    ``ruette``: row 0 is (1, 1+2a_1, 1+2a_2, ...), row n >= 1 has 1 at n-1.
    """

    name: str
    a: ASequence = ASequence()

    kind = "row_formula"
    NAMES = ("tent_perturbation", "ruette")

    def __post_init__(self):
        if self.name not in self.NAMES:
            raise ValueError(f"unknown row formula {self.name!r}")

    def entry(self, i, j):
        if i == 0:
            if self.name == "tent_perturbation":
                return 1
            return 1 if j == 0 else 1 + 2 * self.a(j)
        if j == i - 1:
            return self.a(i) if self.name == "tent_perturbation" else 1
        return 0

    def row_support(self, i):
        if i == 0:
            return None
        return (i - 1,)

    def col_support(self, j):
        return (0, j + 1)

    @property
    def finite_rows(self):
        return False

    def to_json(self):
        return {"kind": "row_formula", "name": self.name, "params": {"a": seq.to_json(self.a)}}


@dataclass(frozen=True)
class UpperHull:
    """Self-similar upper-triangular rule on the one-sided index set.

    Row r < len(first_rows) is ``prefix`` followed by ``fill`` forever. Every
    later row i has ``lower[d]`` at column i+d (d < 0) and ``upper`` at every
    column j >= i. Deleting the first row and column of a matrix with no first
    rows reproduces the same matrix.
    """

    first_rows: tuple = ()
    lower: tuple = ()
    upper: int = 0

    kind = "upper_hull"

    def __post_init__(self):
        rows = [(tuple(int(x) for x in p), int(f)) for p, f in self.first_rows]
        lower = _stencil_tuple(self.lower)
        if any(d >= 0 for d, _ in lower):
            raise ValueError("upper_hull lower offsets must be negative")
        rows = [self._trim(p, f) for p, f in rows]
        # drop trailing first rows that coincide with the tail formula
        while rows and rows[-1] == self._trim(*self._tail_row(len(rows) - 1, lower)):
            rows.pop()
        object.__setattr__(self, "first_rows", tuple(rows))
        object.__setattr__(self, "lower", lower)

    @staticmethod
    def _trim(prefix, fill):
        prefix = list(prefix)
        while prefix and prefix[-1] == fill:
            prefix.pop()
        return tuple(prefix), fill

    def _tail_row(self, r, lower=None):
        lower = dict(self.lower if lower is None else lower)
        return tuple(lower.get(j - r, 0) for j in range(r)), self.upper

    @cached_property
    def low(self) -> dict:
        return dict(self.lower)

    def entry(self, i, j):
        if i < len(self.first_rows):
            prefix, fill = self.first_rows[i]
            return prefix[j] if j < len(prefix) else fill
        if j >= i:
            return self.upper
        return self.low.get(j - i, 0)

    def row_support(self, i):
        if i < len(self.first_rows):
            prefix, fill = self.first_rows[i]
            if fill:
                return None
            return tuple(j for j, x in enumerate(prefix) if x)
        if self.upper:
            return None
        return tuple(i + d for d, _ in self.lower)

    def col_support(self, j):
        rows = [r for r in range(len(self.first_rows)) if self.entry(r, j)]
        start = len(self.first_rows)
        reach = max((-d for d, _ in self.lower), default=0)
        rows += [i for i in range(start, j + reach + 1) if self.entry(i, j)]
        return tuple(sorted(set(rows)))

    @property
    def finite_rows(self):
        return not self.upper and all(f == 0 for _, f in self.first_rows)

    def to_json(self):
        return {"kind": "upper_hull",
                "first_rows": [[list(p), f] for p, f in self.first_rows],
                "lower": {str(d): c for d, c in self.lower},
                "upper": self.upper}


@dataclass(frozen=True)
class Affine:
    """k * inner + l * E for rules that cannot be folded into a band."""

    k: int
    l: int
    inner: object

    kind = "affine"

    def entry(self, i, j):
        return self.k * self.inner.entry(i, j) + (self.l if i == j else 0)

    def row_support(self, i):
        s = self.inner.row_support(i)
        if s is None:
            return None
        return tuple(sorted(set(s) | ({i} if self.l else set())))

    def col_support(self, j):
        s = self.inner.col_support(j)
        return tuple(sorted(set(s) | ({j} if self.l else set())))

    @property
    def finite_rows(self):
        return self.inner.finite_rows

    def to_json(self):
        return {"kind": "affine", "k": self.k, "l": self.l, "inner": self.inner.to_json()}


@dataclass(frozen=True)
class Patched:
    """Inner rule after partition refinements and row replacements.

    ``splits`` is a sequence of (e, p): element e (in the coordinates current
    at that step) was cut into p consecutive elements e, ..., e+p-1 and every
    later index moved up by p-1. ``rows`` replaces whole rows by lists of
    (lo, hi, mult) column ranges in final coordinates (hi None = unbounded).
    Unpatched rows follow the inner rule on the unsplit elements; a column that
    belongs to a split element inherits the entry of its parent.
    """

    inner: object
    splits: tuple = ()
    rows: tuple = ()

    kind = "patched"

    def __post_init__(self):
        splits = tuple((int(e), int(p)) for e, p in self.splits)
        if any(p < 1 for _, p in splits):
            raise ValueError("split part counts must be >= 1")
        rows = tuple(sorted(
            (int(i), tuple((int(lo), None if hi is None else int(hi), int(m)) for lo, hi, m in ranges))
            for i, ranges in self.rows))
        object.__setattr__(self, "splits", splits)
        object.__setattr__(self, "rows", rows)

    @cached_property
    def row_map(self) -> dict:
        return dict(self.rows)

    def to_base(self, x: int) -> int:
        """Final index -> inner index (parts map to their parent)."""
        for e, p in reversed(self.splits):
            if x >= e + p:
                x -= p - 1
            elif x >= e:
                x = e
        return x

    def is_split_part(self, x: int) -> bool:
        for e, p in reversed(self.splits):
            if x >= e + p:
                x -= p - 1
            elif x >= e:
                return True
        return False

    def from_base(self, b: int) -> list[int]:
        """Inner index -> all final indices it became."""
        xs = [b]
        for e, p in self.splits:
            out = []
            for x in xs:
                if x > e:
                    out.append(x + p - 1)
                elif x == e:
                    out.extend(range(e, e + p))
                else:
                    out.append(x)
            xs = out
        return xs

    def entry(self, i, j):
        ranges = self.row_map.get(i)
        if ranges is not None:
            return sum(m for lo, hi, m in ranges if j >= lo and (hi is None or j <= hi))
        if self.is_split_part(i):
            raise ValueError(f"row {i} is a split part without a replacement row")
        return self.inner.entry(self.to_base(i), self.to_base(j))

    def row_support(self, i):
        ranges = self.row_map.get(i)
        if ranges is not None:
            if any(hi is None for _, hi, _ in ranges):
                return None
            return tuple(sorted({j for lo, hi, m in ranges if m for j in range(lo, hi + 1)}))
        s = self.inner.row_support(self.to_base(i))
        if s is None:
            return None
        return tuple(sorted({x for b in s for x in self.from_base(b)}))

    def col_support(self, j):
        out = set()
        for b in self.inner.col_support(self.to_base(j)):
            for x in self.from_base(b):
                if x not in self.row_map:
                    out.add(x)
        for i, ranges in self.rows:
            if any(m and j >= lo and (hi is None or j <= hi) for lo, hi, m in ranges):
                out.add(i)
        return tuple(sorted(out))

    @property
    def finite_rows(self):
        if any(hi is None for _, rs in self.rows for _, hi, _ in rs):
            return False
        return self.inner.finite_rows

    def to_json(self):
        return {"kind": "patched", "inner": self.inner.to_json(),
                "splits": [list(s) for s in self.splits],
                "rows": [[i, [list(r) for r in rs]] for i, rs in self.rows]}


def rule_from_json(d: dict):
    kind = d.get("kind")
    allowed = {
        "banded": {"kind", "stencil"},
        "row_formula": {"kind", "name", "params"},
        "upper_hull": {"kind", "first_rows", "lower", "upper"},
        "affine": {"kind", "k", "l", "inner"},
        "patched": {"kind", "inner", "splits", "rows"},
    }
    if kind not in allowed:
        raise ValueError(f"unknown tail rule kind {kind!r}")
    extra = set(d) - allowed[kind]
    if extra:
        raise ValueError(f"unknown fields {sorted(extra)} in {kind} tail rule")
    if kind == "banded":
        return Banded(tuple((int(k), int(v)) for k, v in d["stencil"].items()))
    if kind == "row_formula":
        params = d.get("params", {})
        extra = set(params) - {"a"}
        if extra:
            raise ValueError(f"unknown row_formula params {sorted(extra)}")
        a = seq.from_json(params["a"]) if "a" in params else ASequence()
        return RowFormula(d["name"], a)
    if kind == "upper_hull":
        return UpperHull(tuple((tuple(p), f) for p, f in d.get("first_rows", [])),
                         tuple((int(k), int(v)) for k, v in d.get("lower", {}).items()),
                         int(d.get("upper", 0)))
    if kind == "affine":
        return Affine(int(d["k"]), int(d["l"]), rule_from_json(d["inner"]))
    return Patched(rule_from_json(d["inner"]), tuple(tuple(s) for s in d.get("splits", [])),
                   tuple((i, tuple(tuple(r) for r in rs)) for i, rs in d.get("rows", [])))


# --------------------------------------------------------------------------
# matrices


@dataclass(frozen=True)
class CountableMatrix:
    index_set: IndexSet
    tail_rule: object
    exceptional: tuple = ()
    finite_rows: Optional[bool] = None

    def __post_init__(self):
        cells = {}
        for i, j, v in self.exceptional:
            if int(v) < 0:
                raise ValueError("exceptional entries must be nonnegative")
            self.index_set.check(i)
            self.index_set.check(j)
            cells[(int(i), int(j))] = int(v)
        object.__setattr__(self, "exceptional",
                           tuple((i, j, v) for (i, j), v in sorted(cells.items())))
        declared = self.tail_rule.finite_rows or self.index_set.finite
        if self.finite_rows is None:
            object.__setattr__(self, "finite_rows", bool(declared))
        elif self.finite_rows and not declared:
            raise ValueError("finite_rows declared but the tail rule has infinite rows")

    @cached_property
    def cells(self) -> dict:
        return {(i, j): v for i, j, v in self.exceptional}

    @cached_property
    def _exc_rows(self) -> dict:
        out: dict = {}
        for i, j, v in self.exceptional:
            out.setdefault(i, {})[j] = v
        return out

    @cached_property
    def _exc_cols(self) -> dict:
        out: dict = {}
        for i, j, v in self.exceptional:
            out.setdefault(j, {})[i] = v
        return out

    def entry(self, i: int, j: int) -> int:
        self.index_set.check(i)
        self.index_set.check(j)
        v = self.cells.get((i, j))
        if v is not None:
            return v
        return self.tail_rule.entry(i, j)

    def _valid(self, xs):
        return [x for x in xs if self.index_set.contains(x)]

    def row_support(self, i: int):
        """Sorted column indices with nonzero entries in row i, or None if infinite."""
        self.index_set.check(i)
        if self.index_set.finite:
            return tuple(j for j in range(self.index_set.size) if self.entry(i, j))
        base = self.tail_rule.row_support(i)
        if base is None:
            return None
        cols = set(self._valid(base)) | set(self._exc_rows.get(i, {}))
        return tuple(sorted(j for j in cols if self.entry(i, j)))

    def col_support(self, j: int):
        self.index_set.check(j)
        if self.index_set.finite:
            return tuple(i for i in range(self.index_set.size) if self.entry(i, j))
        base = self.tail_rule.col_support(j)
        rows = set(self._valid(base)) | set(self._exc_cols.get(j, {}))
        return tuple(sorted(i for i in rows if self.entry(i, j)))

    def to_json(self) -> dict:
        out = {"index_set": self.index_set.kind, "tail_rule": self.tail_rule.to_json(),
               "exceptional": [list(c) for c in self.exceptional],
               "finite_rows": self.finite_rows}
        if self.index_set.size is not None:
            out["size"] = self.index_set.size
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def matrix_from_json(d: dict) -> CountableMatrix:
    extra = set(d) - {"index_set", "tail_rule", "exceptional", "finite_rows", "size"}
    if extra:
        raise ValueError(f"unknown matrix descriptor fields {sorted(extra)}")
    idx = IndexSet(d.get("index_set", "n"), d.get("size"))
    rule = rule_from_json(d["tail_rule"])
    exc = tuple(tuple(int(x) for x in c) for c in d.get("exceptional", []))
    return CountableMatrix(idx, rule, exc, d.get("finite_rows"))


def loads(text: str) -> CountableMatrix:
    return matrix_from_json(json.loads(text))


@dataclass(frozen=True, eq=False)
class FiniteMatrix:
    """Dense integer matrix with the original indices its rows/columns stand for."""

    entries: np.ndarray
    indices: tuple

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def from_rows(cls, rows, indices=None) -> "FiniteMatrix":
        arr = np.array(rows, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("finite matrix must be square")
        if (arr < 0).any():
            raise ValueError("entries must be nonnegative")
        return cls(arr, tuple(range(arr.shape[0])) if indices is None else tuple(indices))

    def tolist(self):
        return self.entries.tolist()

    def as_countable(self) -> CountableMatrix:
        n = self.size
        exc = tuple((i, j, int(self.entries[i, j])) for i in range(n) for j in range(n)
                    if self.entries[i, j])
        return CountableMatrix(IndexSet("n", n), Banded(()), exc)


# --------------------------------------------------------------------------
# constructors for the standard families


def identity(kind: str = "n") -> CountableMatrix:
    return CountableMatrix(IndexSet(kind), Banded(((0, 1),)))


def banded_z(a: int, b: int) -> CountableMatrix:
    """M(a, b): a on the subdiagonal, b on the superdiagonal, indices in Z."""
    _positive(a=a, b=b)
    return CountableMatrix(IndexSet("z"), Banded(((-1, a), (1, b))))


def boundary_n(a: int, b: int, c: int) -> CountableMatrix:
    """M(a, b, c) on {0, 1, ...}: row 0 is (0, c, 0, ...), later rows a, 0, b."""
    _positive(a=a, b=b, c=c)
    return CountableMatrix(IndexSet("n"), Banded(((-1, a), (1, b))), ((0, 1, c),))


def tent_matrix(a: ASequence = ASequence()) -> CountableMatrix:
    return CountableMatrix(IndexSet("n"), RowFormula("tent_perturbation", a))


def ruette_matrix(a: ASequence = ASequence((), "constant", 0)) -> CountableMatrix:
    return CountableMatrix(IndexSet("n"), RowFormula("ruette", a))


def bt12_matrix(mult: int = 1) -> CountableMatrix:
    """Row 0 all ones, row k ones from column k-1 on (scaled by ``mult``)."""
    return CountableMatrix(IndexSet("n"), UpperHull(((((), mult)),), ((-1, mult),), mult))


def bosou_factor_matrix() -> CountableMatrix:
    """Row 0 all 4, row k has 1 at column k-1 and 4 from column k on."""
    return CountableMatrix(IndexSet("n"), UpperHull((((), 4),), ((-1, 1),), 4))


def kmatrix() -> CountableMatrix:
    """K = 2 M(1,1) + E."""
    return affine_transform(banded_z(1, 1), 2, 1)


def finite_matrix(rows) -> CountableMatrix:
    return FiniteMatrix.from_rows(rows).as_countable()


def _positive(**kw):
    for k, v in kw.items():
        if not isinstance(v, (int, np.integer)) or v < 1:
            raise ValueError(f"{k} must be a positive integer, got {v!r}")


# --------------------------------------------------------------------------
# operations


def entry(M: CountableMatrix, i: int, j: int) -> int:
    return M.entry(i, j)


def truncate(M: CountableMatrix, N: int) -> FiniteMatrix:
    """N x N block over the first N enumerated indices."""
    if N < 1:
        raise ValueError("truncation size must be >= 1")
    idx = M.index_set.window(N)
    n = len(idx)
    pos = {x: p for p, x in enumerate(idx)}
    cells = {}
    for p, i in enumerate(idx):
        support = M.row_support(i)
        cols = enumerate(idx) if support is None else ((pos[j], j) for j in support if j in pos)
        for q, j in cols:
            v = M.entry(i, j)
            if v:
                cells[p, q] = v
    # entries beyond int64 (fast-growing row formulas) are kept as Python ints
    big = any(v >= 2 ** 63 for v in cells.values())
    out = np.zeros((n, n), dtype=object if big else np.int64)
    for (p, q), v in cells.items():
        out[p, q] = v
    return FiniteMatrix(out, tuple(idx))


def window_matrix(M: CountableMatrix, lo: int, hi: int) -> np.ndarray:
    """Dense block over the contiguous index range lo..hi (inclusive)."""
    idx = list(range(lo, hi + 1))
    n = len(idx)
    out = np.zeros((n, n), dtype=np.float64)
    for p, i in enumerate(idx):
        support = M.row_support(i)
        cols = range(lo, hi + 1) if support is None else [j for j in support if lo <= j <= hi]
        for j in cols:
            v = M.entry(i, j)
            if v:
                out[p, j - lo] = v
    return out


@dataclass(frozen=True)
class ColumnNorm:
    """Three-valued column norm: ``exact``, ``lower_bound`` or ``unbounded``."""

    value: float
    status: str

    @property
    def finite(self) -> bool:
        return self.status == "exact"


def _rule_column_norm(rule, kind: str):
    """Supremum of tail column sums ignoring exceptional cells: (value, status)."""
    if isinstance(rule, Banded):
        return sum(c for _, c in rule.stencil), "exact"
    if isinstance(rule, RowFormula):
        s = rule.a.sup()
        if s is None:
            return math.inf, "unbounded"
        if rule.name == "tent_perturbation":
            return 1 + s, "exact"
        return max(2, 2 + 2 * s), "exact"
    if isinstance(rule, UpperHull):
        if rule.upper or any(f for _, f in rule.first_rows):
            return math.inf, "unbounded"
        return sum(c for _, c in rule.lower) + sum(max(p, default=0) for p, _ in rule.first_rows), "lower_bound"
    if isinstance(rule, Affine):
        v, st = _rule_column_norm(rule.inner, kind)
        return rule.k * v + rule.l, st
    return None, "lower_bound"


def column_norm(M: CountableMatrix, probe_horizon: int = 64) -> ColumnNorm:
    """sup_j sum_i m_ij (the operator norm on summable sequences)."""
    if probe_horizon < 1:
        raise ValueError("probe_horizon must be >= 1")
    idx = M.index_set
    cols = idx.window(probe_horizon)
    touched = {j for _, j, _ in M.exceptional}
    probe = [sum(M.entry(i, j) for i in M.col_support(j)) for j in set(cols) | touched]
    observed = max(probe, default=0)
    if idx.finite:
        return ColumnNorm(observed, "exact")
    value, status = _rule_column_norm(M.tail_rule, idx.kind)
    if status == "unbounded":
        return ColumnNorm(math.inf, "unbounded")
    if status == "exact" and isinstance(M.tail_rule, (Banded, Affine)):
        # columns away from exceptional cells and the boundary carry the full stencil
        return ColumnNorm(max(observed, value), "exact")
    if status == "exact":
        return ColumnNorm(max(observed, value), "exact")
    return ColumnNorm(observed, "lower_bound")


def affine_transform(M: CountableMatrix, k: int, l: int) -> CountableMatrix:
    """N = k M + l E."""
    if k < 1 or l < 0:
        raise ValueError("affine transform needs k >= 1 and l >= 0")
    if k == 1 and l == 0:
        return M
    rule = M.tail_rule
    if isinstance(rule, Banded):
        coef = {d: k * c for d, c in rule.stencil}
        coef[0] = coef.get(0, 0) + l
        new_rule = Banded(tuple(coef.items()))
    elif isinstance(rule, Affine):
        new_rule = Affine(k * rule.k, k * rule.l + l, rule.inner)
    else:
        new_rule = Affine(k, l, rule)
    exc = tuple((i, j, k * v + (l if i == j else 0)) for i, j, v in M.exceptional)
    if M.index_set.finite:
        # diagonal of a finite matrix lives entirely in the exceptional block
        present = {(i, j) for i, j, _ in M.exceptional}
        exc = exc + tuple((i, i, l) for i in range(M.index_set.size) if (i, i) not in present and l)
        new_rule = Banded(())
    return CountableMatrix(M.index_set, new_rule, exc, M.finite_rows)


def drop_first(M: CountableMatrix) -> CountableMatrix:
    """Delete the first row and column of a one-sided upper_hull matrix and re-index."""
    if M.index_set.kind != "n" or M.index_set.finite or not isinstance(M.tail_rule, UpperHull):
        raise ValueError("drop_first applies to one-sided upper_hull matrices")
    rule = M.tail_rule
    rows = tuple((p[1:], f) for p, f in rule.first_rows[1:])
    new = UpperHull(rows, rule.lower, rule.upper)
    exc = tuple((i - 1, j - 1, v) for i, j, v in M.exceptional if i > 0 and j > 0)
    return CountableMatrix(M.index_set, new, exc)


def is_pure_unit_band(M: CountableMatrix) -> bool:
    """Banded with both offsets -1 and +1, nothing beyond them, no exceptional cells."""
    rule = M.tail_rule
    if not isinstance(rule, Banded) or M.exceptional or M.index_set.kind != "z":
        return False
    offs = {d for d, _ in rule.stencil}
    return {-1, 1} <= offs and offs <= {-1, 0, 1}


@dataclass(frozen=True)
class PathLength:
    value: Optional[int]
    horizon: int
    exact: bool

    @property
    def found(self) -> bool:
        return self.value is not None


def _bfs(start_set, step, target, horizon):
    frontier = set(start_set)
    seen = set(frontier)
    for n in range(1, horizon + 1):
        if target in frontier:
            return n
        nxt = set()
        for u in frontier:
            nxt.update(step(u))
        frontier = nxt - seen
        seen |= nxt
        if not frontier:
            return None
    return None


def shortest_path_length(M: CountableMatrix, i: int, j: int, horizon: int = 1000) -> PathLength:
    """n(i, j) = least n >= 1 with m_ij(n) > 0."""
    M.index_set.check(i)
    M.index_set.check(j)
    if is_pure_unit_band(M):
        if i != j:
            return PathLength(abs(i - j), horizon, True)
        return PathLength(1 if M.entry(i, i) else 2, horizon, True)
    if M.entry(i, j):
        return PathLength(1, horizon, True)

    def fwd(u):
        s = M.row_support(u)
        if s is None:
            raise _Infinite
        return s

    try:
        n = _bfs(fwd(i), fwd, j, horizon)
    except _Infinite:
        # walk backwards through (finite) columns instead
        n = _bfs(M.col_support(j), M.col_support, i, horizon)
    return PathLength(n, horizon, n is not None)


class _Infinite(Exception):
    pass


@dataclass(frozen=True)
class SupValue:
    value: Optional[float]
    exact: bool
    horizon: int
    note: str = ""


def s_supremum(M: CountableMatrix, j: int, horizon: int = 64) -> SupValue:
    """sup_i n(j, i) / n(i, j) over the first ``horizon`` enumerated indices."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if is_pure_unit_band(M):
        return SupValue(1.0, True, horizon, "unit band: n(i,j) = n(j,i) = |i-j|")
    idx = M.index_set.window(horizon)
    ratios = []
    for i in idx:
        a = shortest_path_length(M, j, i, 4 * horizon)
        b = shortest_path_length(M, i, j, 4 * horizon)
        if not (a.found and b.found):
            return SupValue(None, False, horizon, f"no path between {i} and {j} within horizon")
        ratios.append(a.value / b.value)
    best = max(ratios)
    if M.index_set.finite and len(idx) == M.index_set.size:
        return SupValue(best, True, horizon, "finite index set fully enumerated")
    if M.row_support(j) is None and all(M.entry(j, i) for i in idx):
        return SupValue(best, True, horizon, "full row: numerator is 1")
    return SupValue(best, False, horizon, "maximum over the enumerated window")


@dataclass(frozen=True)
class StructureReport:
    irreducible: bool
    period: Optional[int]
    components: int
    size: int
    heuristic: bool = True


def structure_check(M: CountableMatrix, N: int = 64) -> StructureReport:
    """Irreducibility and period of the N-truncation (truncation only)."""
    F = truncate(M, N)
    A = csr_matrix(F.entries > 0)
    ncomp, labels = connected_components(A, directed=True, connection="strong")
    base_comp = labels[0]
    members = np.flatnonzero(labels == base_comp)
    # gcd of level differences along edges inside the base component
    level = {0: 0}
    q = deque([0])
    g = 0
    member_set = set(members.tolist())
    rows = A.tolil().rows
    while q:
        u = q.popleft()
        for v in rows[u]:
            if v not in member_set:
                continue
            if v not in level:
                level[v] = level[u] + 1
                q.append(v)
            else:
                g = math.gcd(g, abs(level[u] + 1 - level[v]))
    period = g if g else None
    return StructureReport(ncomp == 1, period, int(ncomp), F.size)


def gcd_all(xs: Iterable[int]) -> int:
    return reduce(math.gcd, xs, 0)
