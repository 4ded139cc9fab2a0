"""Countable piecewise affine Markov interval maps.

A map is described symbolically: a partition of [0, 1] into closed intervals
(a parametric tail family, optionally refined) and, for every element, an
ordered list of piece groups. A group is ``count`` consecutive monotone affine
pieces with alternating orientation, each mapping onto the same union of
consecutive partition elements. The transition matrix entry m_ij is the number
of pieces on i whose image covers j.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from typing import Optional, Sequence, Union

from . import graphcore as gc
from . import sequences as seq
from .graphcore import CountableMatrix, IndexSet, Patched
from .sequences import ASequence

Number = Union[Fraction, float]

CERTIFIED = "linearizable-certified"
AFTER_PERTURBATION = "linearizable-after-perturbation"
NOT_LINEARIZABLE = "not-linearizable-certified"
UNKNOWN = "unknown"


class MapError(ValueError):
    """Invalid map descriptor or refused operation."""


class MarkovViolation(MapError):
    pass


class NotMonotone(MapError):
    pass


class CentralizedViolation(MapError):
    pass


class LinearizeRefused(MapError):
    pass


class NotMixing(MapError):
    pass


def as_number(x) -> Number:
    """Exact rationals stay exact; strings like "3/4" parse to Fractions."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise MapError(f"not a number: {x!r}")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x)
        except ValueError:
            return float(x)
    return float(x)


def _num_json(x):
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else int(x)
    return float(x)


def _close(a: Number, b: Number) -> bool:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a == b
    a, b = float(a), float(b)
    return abs(a - b) <= 1e-9 * max(abs(a), abs(b)) or a == b


END = "end"


# --------------------------------------------------------------------------
# partitions
#
# boundary(n) is the point between element n-1 and element n in index order.
# direction -1 means the index grows leftwards (tail accumulating at 0).


@dataclass(frozen=True)
class PartitionSpec:
    """``dyadic`` (i_n = [2^-(n+1), 2^-n]), ``geometric`` (ratio r),
    ``dyadic_right`` (accumulating at 1), ``logistic`` (Z-indexed, accumulating
    at 0 and 1), ``bt12`` (boundaries w_k of the recursion at lambda) or
    ``finite`` (explicit boundary points in increasing order)."""

    kind: str
    params: tuple = ()

    KINDS = ("dyadic", "geometric", "dyadic_right", "logistic", "bt12", "finite")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise MapError(f"unknown partition kind {self.kind!r}")
        params = tuple(as_number(p) for p in self.params)
        object.__setattr__(self, "params", params)
        if self.kind == "geometric" and not (len(params) == 1 and 0 < params[0] < 1):
            raise MapError("geometric partition needs one ratio in (0, 1)")
        if self.kind == "bt12" and not (len(params) == 1 and params[0] >= 4):
            raise MapError("bt12 partition needs lambda >= 4 (real characteristic roots)")
        if self.kind == "finite":
            if len(params) < 2 or params[0] != 0 or params[-1] != 1:
                raise MapError("finite partition points must run from 0 to 1")
            if any(b <= a for a, b in zip(params, params[1:])):
                raise MapError("finite partition points must increase")

    def build(self) -> "_Base":
        return _Base(self)

    def to_json(self) -> dict:
        if self.kind == "finite":
            pts = self.params
            return {"exceptional": [[_num_json(a), _num_json(b)] for a, b in zip(pts, pts[1:])],
                    "tail": None}
        return {"exceptional": [], "tail": {"kind": self.kind,
                                           "params": [_num_json(p) for p in self.params]}}


class _Base:
    def __init__(self, spec: PartitionSpec):
        self.spec = spec
        k = spec.kind
        self.direction = -1 if k in ("dyadic", "geometric", "bt12") else 1
        if k == "logistic":
            self.index_set = IndexSet("z")
        elif k == "finite":
            self.index_set = IndexSet("n", len(spec.params) - 1)
        else:
            self.index_set = IndexSet("n")
        self._w = None
        if k == "bt12":
            lam = spec.params[0]
            self._w = [lam / lam, 1 - 1 / lam]

    @property
    def accumulation(self) -> tuple:
        """Accumulation points at the high (and, for Z, low) index end."""
        k = self.spec.kind
        if k in ("dyadic", "geometric", "bt12"):
            return (Fraction(0),)
        if k == "dyadic_right":
            return (Fraction(1),)
        if k == "logistic":
            return (Fraction(0), Fraction(1))
        return ()

    def _wk(self, n):
        lam = self.spec.params[0]
        while len(self._w) <= n:
            self._w.append(self._w[-1] - self._w[-2] / lam)
        return self._w[n]

    def boundary(self, n: int) -> Number:
        k, p = self.spec.kind, self.spec.params
        if k == "dyadic":
            return Fraction(1, 2 ** n)
        if k == "geometric":
            return p[0] ** n
        if k == "dyadic_right":
            return 1 - Fraction(1, 2 ** n)
        if k == "logistic":
            return Fraction(2 ** n, 1 + 2 ** n) if n >= 0 else Fraction(1, 1 + 2 ** -n)
        if k == "bt12":
            return self._wk(n)
        return p[n]

    def locate(self, x: Number):
        """Boundary index of x, END for the high-index accumulation point, None otherwise."""
        k, p = self.spec.kind, self.spec.params
        if k == "finite":
            for n, q in enumerate(p):
                if _close(q, x):
                    return n
            return None
        if k in ("dyadic", "geometric", "bt12") and x == 0:
            return END
        if k == "dyadic_right" and x == 1:
            return END
        if k == "logistic" and x in (0, 1):
            return END if x == 1 else "start"
        xf = float(x)
        if not 0 < xf <= 1:
            return None
        if k == "dyadic":
            n = round(-math.log2(xf))
        elif k == "geometric":
            n = round(math.log(xf) / math.log(float(p[0])))
        elif k == "dyadic_right":
            if xf >= 1:
                return None
            n = round(-math.log2(1 - xf))
        elif k == "logistic":
            if xf >= 1:
                return None
            n = round(math.log2(xf / (1 - xf)))
        else:
            n = 0
            while float(self._wk(n)) > xf * (1 + 1e-9) and n < 100000:
                n += 1
        if k != "logistic" and n < 0:
            return None
        return n if _close(self.boundary(n), x) else None


class _Refined:
    """Partition after cutting element e at interior points (in index order)."""

    def __init__(self, base, e: int, cuts: tuple):
        self.base, self.e, self.cuts = base, e, cuts
        self.p = len(cuts) + 1
        self.direction = base.direction
        idx = base.index_set
        self.index_set = IndexSet(idx.kind, None if idx.size is None else idx.size + self.p - 1)
        self.accumulation = base.accumulation

    def boundary(self, n: int) -> Number:
        e, p = self.e, self.p
        if n <= e:
            return self.base.boundary(n)
        if n < e + p:
            return self.cuts[n - e - 1]
        return self.base.boundary(n - p + 1)

    def locate(self, x: Number):
        for t, c in enumerate(self.cuts):
            if _close(c, x):
                return self.e + 1 + t
        b = self.base.locate(x)
        if b is None or isinstance(b, str):
            return b
        return b if b <= self.e else b + self.p - 1


def _build_partition(spec: PartitionSpec, splits: tuple):
    part = spec.build()
    for e, cuts in splits:
        part = _Refined(part, e, cuts)
    return part


def interval(part, n: int) -> tuple:
    a, b = part.boundary(n), part.boundary(n + 1)
    return (a, b) if a <= b else (b, a)


def range_interval(part, lo: int, hi: Optional[int]) -> tuple:
    """Spatial interval covered by the elements lo..hi (hi None: to the accumulation point)."""
    a = part.boundary(lo)
    if hi is None:
        b = part.accumulation[0] if part.direction < 0 else part.accumulation[-1]
    else:
        b = part.boundary(hi + 1)
    return (a, b) if a <= b else (b, a)


def index_range(part, u: Number, v: Number) -> Optional[tuple]:
    """(lo, hi) with elements lo..hi tiling [u, v] exactly, or None."""
    if part.direction > 0:
        lo, top = part.locate(u), part.locate(v)
    else:
        lo, top = part.locate(v), part.locate(u)
    if not isinstance(lo, int) or top is None or top == "start":
        return None
    if top == END:
        return lo, None
    if top - 1 < lo:
        return None
    return lo, top - 1


# --------------------------------------------------------------------------
# branches


@dataclass(frozen=True)
class Group:
    """``count`` alternating monotone pieces, the first with orientation
    ``orient``, each onto the elements lo..hi. ``weight`` is the width of each
    piece as a fraction of its element (None: equal split of the element)."""

    lo: int
    hi: Optional[int]
    orient: int = 1
    count: int = 1
    weight: Optional[Number] = None

    def __post_init__(self):
        if self.orient not in (1, -1):
            raise MapError("orientation must be +1 or -1")
        if self.count < 1:
            raise MapError("a group has at least one piece")
        if self.hi is not None and self.hi < self.lo:
            raise MapError(f"empty image range {self.lo}..{self.hi}")

    def covers(self, j: int) -> bool:
        return j >= self.lo and (self.hi is None or j <= self.hi)

    def to_json(self) -> list:
        return [self.lo, self.hi, self.orient, self.count,
                None if self.weight is None else _num_json(self.weight)]


@dataclass(frozen=True)
class Piece:
    element: int
    x0: Number
    x1: Number
    y0: Number
    y1: Number
    lo: int
    hi: Optional[int]

    @property
    def orient(self) -> int:
        return 1 if self.y1 > self.y0 else -1

    def at(self, x: Number) -> Number:
        return self.y0 + (self.y1 - self.y0) * (x - self.x0) / (self.x1 - self.x0)

    @property
    def slope(self) -> float:
        return float(self.y1 - self.y0) / float(self.x1 - self.x0)


@dataclass(frozen=True)
class BranchRule:
    """Branch groups of the unrefined partition, generated per element.

    ``tent``: element 0 folds onto everything, element n >= 1 carries a_n
    pieces onto element n-1. ``ruette``: element 0 carries one decreasing
    piece onto itself followed by 1 + 2 a_n pieces onto element n for every
    n >= 1 (widths from the slope ``params[0]``); element n >= 1 maps onto
    n-1. ``banded``: params (a, b, k, l, c); element n carries k a pieces onto
    n-1, l onto n and k b onto n+1 (c > 0: one-sided with k c pieces from
    element 0 onto 1). ``bt12``: element k maps onto k-1, k, ... (``params[0]``
    pieces, tent-shaped when 2). ``bosou``: the factor matrix pieces.
    ``explicit``: ``params`` lists the groups of every element of a finite
    partition.
    """

    kind: str
    a: ASequence = ASequence()
    params: tuple = ()

    KINDS = ("tent", "ruette", "banded", "bt12", "bosou", "explicit")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise MapError(f"unknown branch rule {self.kind!r}")
        if self.kind == "banded":
            a, b, k, l, c = self.params
            if k % 2 or l % 2 == 0 or min(a, b, k, l) < 1 or c < 0:
                raise MapError("banded maps need a, b >= 1, k even, l odd")

    def infinite(self, b: int) -> bool:
        return self.kind == "ruette" and b == 0

    def groups(self, b: int, upto: int = 64) -> tuple:
        """Groups of base element b; infinite rows are cut after image index ``upto``."""
        k = self.kind
        if k == "tent":
            if b == 0:
                return (Group(0, None, -1),)
            return (Group(b - 1, b - 1, 1, self.a(b)),)
        if k == "ruette":
            if b > 0:
                return (Group(b - 1, b - 1, 1),)
            lam = float(self.params[0])
            out = [Group(0, 0, -1, 1, 1 / lam)]
            for n in range(1, upto + 1):
                out.append(Group(n, n, -1, 1 + 2 * self.a(n), lam ** -(n + 1)))
            return tuple(out)
        if k == "banded":
            a, bb, kk, l, c = self.params
            if c and b == 0:
                return (Group(0, 0, 1, l), Group(1, 1, 1, kk * c))
            return (Group(b - 1, b - 1, -1, kk * a), Group(b, b, 1, l), Group(b + 1, b + 1, 1, kk * bb))
        if k == "bt12":
            mult = self.params[0] if self.params else 1
            return (Group(max(b - 1, 0), None, 1, mult),)
        if k == "bosou":
            if b == 0:
                return (Group(0, None, 1, 4),)
            return (Group(b - 1, None, 1, 1), Group(b, None, 1, 3))
        return tuple(self.params[b])

    def base_matrix(self, index_set: IndexSet) -> CountableMatrix:
        k = self.kind
        if k == "tent":
            return gc.tent_matrix(self.a)
        if k == "ruette":
            return gc.ruette_matrix(self.a)
        if k == "banded":
            a, b, kk, l, c = self.params
            inner = gc.boundary_n(a, b, c) if c else gc.banded_z(a, b)
            return gc.affine_transform(inner, kk, l)
        if k == "bt12":
            return gc.bt12_matrix(self.params[0] if self.params else 1)
        if k == "bosou":
            return gc.bosou_factor_matrix()
        rows = [[sum(g.count for g in gs if g.covers(j)) for j in range(len(self.params))]
                for gs in self.params]
        return gc.finite_matrix(rows)

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.kind in ("tent", "ruette"):
            out["a"] = seq.to_json(self.a)
        if self.kind == "explicit":
            out["params"] = [[g.to_json() for g in gs] for gs in self.params]
        elif self.params:
            out["params"] = [_num_json(p) if isinstance(p, (Fraction, float)) else p
                             for p in self.params]
        return out


# --------------------------------------------------------------------------
# descriptors


def _shift(x: int, e: int, p: int) -> int:
    return x if x <= e else x + p - 1


def _lift_group(g: Group, e: int, p: int) -> Group:
    """Re-index a group after element e was cut into p parts."""
    lo = g.lo if g.lo <= e else g.lo + p - 1
    hi = None if g.hi is None else (g.hi + p - 1 if g.hi >= e else g.hi)
    return replace(g, lo=lo, hi=hi)


@dataclass(frozen=True)
class MarkovMapDescriptor:
    name: str
    partition: PartitionSpec
    rule: BranchRule
    splits: tuple = ()
    overrides: tuple = ()
    perturbations: tuple = ()
    claimed_leo: Optional[bool] = None
    claimed_mixing: bool = True
    continuous: bool = True
    centralized: Optional[tuple] = None
    notes: tuple = ()
    parent: Optional["MarkovMapDescriptor"] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        splits = tuple((int(e), tuple(as_number(c) for c in cuts)) for e, cuts in self.splits)
        object.__setattr__(self, "splits", splits)
        over = tuple(sorted((int(e), tuple(gs)) for e, gs in self.overrides))
        object.__setattr__(self, "overrides", over)
        object.__setattr__(self, "perturbations", tuple((int(e), int(k)) for e, k in self.perturbations))
        if self.rule.kind == "explicit" and self.partition.kind != "finite":
            raise MapError("explicit branch lists need a finite partition")
        if self.rule.kind == "explicit" and len(self.rule.params) != len(self.partition.params) - 1:
            raise MapError("explicit branch lists need one entry per element")

    @cached_property
    def part(self):
        return _build_partition(self.partition, self.splits)

    @cached_property
    def _patch(self) -> Patched:
        return Patched(gc.Banded(()), tuple((e, len(c) + 1) for e, c in self.splits))

    @cached_property
    def _over(self) -> dict:
        return dict(self.overrides)

    @property
    def index_set(self) -> IndexSet:
        return self.part.index_set

    def interval(self, e: int) -> tuple:
        self.index_set.check(e)
        return interval(self.part, e)

    def elements_inside(self, eps: float, cap: int = 100_000) -> Optional[list]:
        """Elements contained in (eps, 1 - eps); None if more than ``cap`` are found.

        Element intervals move monotonically toward the accumulation points,
        so each direction stops at the first element within eps of an end.
        """
        if not 0 < eps < 0.5:
            raise MapError("eps must lie in (0, 1/2)")
        idx = self.index_set
        if idx.finite:
            candidates = [range(idx.size)]
        elif idx.kind == "n":
            candidates = [itertools.count(0)]
        else:
            candidates = [itertools.count(0), itertools.count(-1, -1)]
        out = []
        for walk in candidates:
            for e in walk:
                a, b = (float(x) for x in self.interval(e))
                if a > eps and b < 1 - eps:
                    out.append(e)
                    if len(out) > cap:
                        return None
                elif not idx.finite and (b <= eps or a >= 1 - eps):
                    break
        return sorted(out)

    def infinite(self, e: int) -> bool:
        if e in self._over:
            return False
        return self.rule.infinite(self._patch.to_base(e))

    def groups(self, e: int, upto: int = 64) -> tuple:
        self.index_set.check(e)
        if e in self._over:
            return self._over[e]
        if self._patch.is_split_part(e):
            raise MapError(f"element {e} is a split part without branches")
        b = self._patch.to_base(e)
        gs = self.rule.groups(b, upto)
        for se, cuts in self.splits:
            gs = tuple(_lift_group(g, se, len(cuts) + 1) for g in gs)
        return gs

    def count(self, i: int, j: int, upto: Optional[int] = None) -> int:
        gs = self.groups(i, upto if upto is not None else max(64, j + 2))
        return sum(g.count for g in gs if g.covers(j))

    def pieces(self, e: int, upto: int = 64, budget: int = 100_000) -> list:
        """Monotone affine pieces of element e from left to right.

        Infinite rows stop after ``budget`` pieces; finite rows may not exceed it.
        """
        a, b = self.interval(e)
        gs = self.groups(e, upto)
        if not self.infinite(e) and sum(g.count for g in gs) > budget:
            raise MapError(f"element {e} has more than {budget} pieces")
        weighted = [g.weight is not None for g in gs]
        if any(weighted) and not all(weighted):
            raise MapError(f"element {e} mixes weighted and equal-width groups")
        total = sum(g.count for g in gs)
        out, x = [], a
        for g in gs:
            ylo, yhi = range_interval(self.part, g.lo, g.hi)
            if len(out) + g.count > budget:
                break
            for t in range(g.count):
                w = (b - a) * g.weight if g.weight is not None else (b - a) / total
                o = g.orient if t % 2 == 0 else -g.orient
                y0, y1 = (ylo, yhi) if o > 0 else (yhi, ylo)
                out.append(Piece(e, x, x + w, y0, y1, g.lo, g.hi))
                x = x + w
        if not self.infinite(e) and not _close(x, b):
            raise MapError(f"branch widths of element {e} do not fill the element")
        return out

    def to_json(self) -> dict:
        part = self.partition.to_json()
        part["splits"] = [[e, [_num_json(c) for c in cuts]] for e, cuts in self.splits]
        return {
            "name": self.name,
            "partition": part,
            "branches": {"rule": self.rule.to_json(),
                         "overrides": [[e, [g.to_json() for g in gs]] for e, gs in self.overrides]},
            "perturbations": [list(p) for p in self.perturbations],
            "flags": {"claimed_leo": self.claimed_leo, "claimed_mixing": self.claimed_mixing,
                      "continuous": self.continuous,
                      "centralized": None if self.centralized is None
                      else [_num_json(x) for x in self.centralized]},
            "notes": list(self.notes),
        }


def _group_from_json(part, e, g) -> Group:
    if isinstance(g, dict):
        extra = set(g) - {"image", "orient", "count", "weight"}
        if extra:
            raise MapError(f"unknown group fields {sorted(extra)}")
        u, v = (as_number(x) for x in g["image"])
        if not u < v:
            raise MapError(f"element {e}: image endpoints must increase")
        r = index_range(part, u, v)
        if r is None:
            raise MarkovViolation(f"element {e}: image [{u}, {v}] does not cover whole elements")
        w = g.get("weight")
        return Group(r[0], r[1], int(g.get("orient", 1)), int(g.get("count", 1)),
                     None if w is None else as_number(w))
    lo, hi, orient, count, w = (list(g) + [None] * 5)[:5]
    return Group(int(lo), None if hi is None else int(hi), int(orient or 1), int(count or 1),
                 None if w is None else as_number(w))


def map_from_json(d: dict) -> MarkovMapDescriptor:
    allowed = {"name", "partition", "branches", "perturbations", "flags", "notes"}
    extra = set(d) - allowed
    if extra:
        raise MapError(f"unknown map descriptor fields {sorted(extra)}")
    p = d["partition"]
    extra = set(p) - {"exceptional", "tail", "splits"}
    if extra:
        raise MapError(f"unknown partition fields {sorted(extra)}")
    tail = p.get("tail")
    if tail is None:
        ivs = [[as_number(x) for x in iv] for iv in p["exceptional"]]
        if any(a[1] != b[0] for a, b in zip(ivs, ivs[1:])):
            raise MapError("finite partitions must list adjacent elements left to right")
        spec = PartitionSpec("finite", tuple([ivs[0][0]] + [iv[1] for iv in ivs]))
    else:
        if p.get("exceptional"):
            raise MapError("exceptional elements of a tail family are given as splits")
        spec = PartitionSpec(tail["kind"], tuple(tail.get("params", ())))
    splits = tuple((e, tuple(cuts)) for e, cuts in p.get("splits", []))
    part = _build_partition(spec, tuple((int(e), tuple(as_number(c) for c in cuts)) for e, cuts in splits))
    br = d["branches"]
    r = br["rule"]
    kind = r["kind"]
    if kind == "explicit":
        groups = tuple(tuple(_group_from_json(part, e, g) for g in gs) for e, gs in enumerate(r["params"]))
        rule = BranchRule("explicit", params=groups)
    else:
        a = seq.from_json(r["a"]) if "a" in r else ASequence()
        rule = BranchRule(kind, a, tuple(as_number(x) if isinstance(x, str) else x
                                         for x in r.get("params", ())))
    overrides = tuple((int(e), tuple(_group_from_json(part, e, g) for g in gs))
                      for e, gs in br.get("overrides", []))
    flags = d.get("flags", {})
    extra = set(flags) - {"claimed_leo", "claimed_mixing", "continuous", "centralized"}
    if extra:
        raise MapError(f"unknown flags {sorted(extra)}")
    cen = flags.get("centralized")
    mapd = MarkovMapDescriptor(
        d.get("name", "map"), spec, rule, splits, overrides,
        tuple(tuple(x) for x in d.get("perturbations", [])),
        flags.get("claimed_leo"), flags.get("claimed_mixing", True), flags.get("continuous", True),
        None if cen is None else tuple(as_number(x) for x in cen), tuple(d.get("notes", [])))
    check_markov(mapd)
    check_mixing(mapd)
    return mapd


def check_mixing(mapd: MarkovMapDescriptor) -> None:
    """Reject finite maps whose transition matrix is reducible or periodic.

    A countable matrix can be irreducible while all its truncations are not,
    so infinite partitions are not checked.
    """
    if not mapd.index_set.finite:
        return
    M = transition_matrix(mapd)
    rep = gc.structure_check(M, mapd.index_set.size)
    if not rep.irreducible:
        raise NotMixing(f"{mapd.name}: the transition graph is not strongly connected")
    if rep.period != 1:
        raise NotMixing(f"{mapd.name}: the transition graph has period {rep.period}")


# --------------------------------------------------------------------------
# transition matrices


def check_markov(mapd: MarkovMapDescriptor, window: int = 24) -> None:
    """Every group on the window must have a nondegenerate image inside [0, 1]
    and the piece widths must fill the element; images are whole elements by
    construction."""
    for e in mapd.index_set.window(window):
        gs = mapd.groups(e, upto=window)
        weighted = [g.weight is not None for g in gs]
        if any(weighted) and not all(weighted):
            raise MapError(f"element {e} mixes weighted and equal-width groups")
        if all(weighted):
            if any(not g.weight > 0 for g in gs):
                raise MapError(f"element {e}: degenerate piece")
            filled = sum(g.count * g.weight for g in gs)
            if filled > 1 and not _close(filled, 1) or (not mapd.infinite(e) and not _close(filled, 1)):
                raise MapError(f"branch widths of element {e} do not fill the element")
        for g in gs:
            ya, yb = range_interval(mapd.part, g.lo, g.hi)
            if not yb > ya or ya < 0 or yb > 1:
                raise MapError(f"element {e}: image [{ya}, {yb}] is degenerate or leaves [0, 1]")


def transition_matrix(mapd: MarkovMapDescriptor, window: int = 24) -> CountableMatrix:
    """Covering counts as a countable matrix; the tail comes from the branch rule."""
    base = mapd.rule.base_matrix(mapd.partition.build().index_set)
    if not mapd.splits and not mapd.overrides:
        M = base
    else:
        rows = {}
        exc_rows = {i for i, _, _ in base.exceptional}
        for b in exc_rows:
            xs = mapd._patch.from_base(b)
            for x in xs:
                rows[x] = None
        for e in mapd._over:
            rows[e] = None
        ranges = {}
        for e in rows:
            if mapd.infinite(e):
                raise MapError(f"element {e} has infinitely many pieces and cannot be patched")
            ranges[e] = tuple((g.lo, g.hi, g.count) for g in mapd.groups(e))
        rule = Patched(base.tail_rule, tuple((e, len(c) + 1) for e, c in mapd.splits),
                       tuple(ranges.items()))
        M = CountableMatrix(mapd.index_set, rule)
    idx = mapd.index_set.window(window)
    for i in idx:
        for j in idx:
            got, want = mapd.count(i, j, max(idx) + 2), M.entry(i, j)
            if got != want:
                raise MarkovViolation(f"pieces on element {i} cover element {j} {got} times, "
                                      f"the matrix rule says {want}")
    return M


# --------------------------------------------------------------------------
# perturbations and refinements


def _derive(mapd: MarkovMapDescriptor, **kw) -> MarkovMapDescriptor:
    return replace(mapd, parent=mapd, **kw)


def window_perturb_local(mapd: MarkovMapDescriptor, j: int, k: int) -> MarkovMapDescriptor:
    """Replace the monotone branch on element j by 2k+1 alternating pieces onto the same image."""
    if not isinstance(k, int) or k < 1:
        raise MapError("perturbation order must be an integer >= 1")
    mapd.index_set.check(j)
    if mapd.infinite(j):
        raise NotMonotone(f"element {j} carries infinitely many pieces")
    gs = mapd.groups(j)
    if len(gs) != 1 or gs[0].count != 1:
        raise NotMonotone(f"the map is not monotone on element {j}")
    g = gs[0]
    hist = mapd.perturbations + ((j, k),)
    if (mapd.rule.kind == "tent" and j >= 1 and not mapd.splits and j not in mapd._over):
        a = mapd.rule.a
        prefix = [a(n) for n in range(1, max(j, len(a.prefix)) + 1)]
        prefix[j - 1] = 2 * k + 1
        rule = replace(mapd.rule, a=replace(a, prefix=tuple(prefix)))
        return _derive(mapd, rule=rule, perturbations=hist, claimed_leo=mapd.claimed_leo)
    w = None if g.weight is None else g.weight / (2 * k + 1)
    new = replace(g, count=2 * k + 1, weight=w)
    over = dict(mapd._over)
    over[j] = (new,)
    return _derive(mapd, overrides=tuple(over.items()), perturbations=hist)


def _perturbed_elements(a: ASequence) -> Optional[list]:
    """Indices with a_n > 1, or None when there are infinitely many."""
    if a.tail == "constant" and a.value <= 1 or a.tail == "power" and a.value <= 1:
        return [n for n in range(1, len(a.prefix) + 1) if a(n) > 1]
    return None


def window_perturb_global(mapd: MarkovMapDescriptor, assignments,
                          centralized_window: Optional[tuple] = None) -> MarkovMapDescriptor:
    """Apply window perturbations to several elements.

    ``assignments`` maps elements to orders, or is a sequence a_n of odd branch
    counts applied along the tail of an unperturbed tent map.
    """
    if centralized_window is not None:
        lo, hi = (as_number(x) for x in centralized_window)
        if not 0 < lo < hi < 1:
            raise CentralizedViolation("the centralized window must lie inside (0, 1)")
        for x in (lo, hi):
            if mapd.part.locate(x) is None:
                raise CentralizedViolation(f"{x} is not a partition point")
    if isinstance(assignments, ASequence):
        if mapd.rule.kind != "tent" or mapd.rule.a != ASequence() or mapd.splits or mapd.overrides:
            raise MapError("sequence assignments apply to the unperturbed tent map")
        if not assignments.all_odd():
            raise MapError("window perturbations have an odd number of pieces")
        elems = _perturbed_elements(assignments)
        if centralized_window is not None:
            if elems is None:
                raise CentralizedViolation("infinitely many perturbed elements accumulate at 0")
            _check_inside(mapd, elems, lo, hi)
        hist = tuple((n, (assignments(n) - 1) // 2) for n in (elems or []))
        return _derive(mapd, rule=replace(mapd.rule, a=assignments), perturbations=hist,
                       centralized=None if centralized_window is None else (lo, hi))
    items = sorted(dict(assignments).items())
    if centralized_window is not None:
        _check_inside(mapd, [e for e, _ in items], lo, hi)
    out = mapd
    for e, k in items:
        out = window_perturb_local(out, e, k)
    if centralized_window is not None:
        out = replace(out, centralized=(lo, hi))
    return out


def _check_inside(mapd, elems, lo, hi):
    for e in elems:
        a, b = mapd.interval(e)
        if a < lo and not _close(a, lo) or b > hi and not _close(b, hi):
            raise CentralizedViolation(f"element {e} = [{a}, {b}] is outside [{lo}, {hi}]")


def split(mapd: MarkovMapDescriptor, refinement) -> MarkovMapDescriptor:
    """Refine the partition: each (element, cut points) pair cuts an element in place.

    The parts are numbered in index order and every later index moves up.
    Pieces are restricted to the parts; their images must again be unions of
    elements of the refined partition.
    """
    out = mapd
    for e, cuts in refinement:
        out = _split_one(out, int(e), [as_number(c) for c in cuts])
    return out


def _split_one(mapd: MarkovMapDescriptor, e: int, cuts: list) -> MarkovMapDescriptor:
    a, b = mapd.interval(e)
    if not cuts or any(not a < c < b for c in cuts) or len(set(cuts)) != len(cuts):
        raise MapError(f"cut points must be distinct interior points of element {e} = [{a}, {b}]")
    if mapd.infinite(e):
        raise MapError(f"element {e} carries infinitely many pieces and cannot be cut")
    pieces = mapd.pieces(e)
    ordered = tuple(sorted(cuts, reverse=mapd.part.direction < 0))
    p = len(ordered) + 1
    splits = mapd.splits + ((e, ordered),)
    new_part = _build_partition(mapd.partition, splits)
    over = {_shift(x, e, p): tuple(_lift_group(g, e, p) for g in gs)
            for x, gs in mapd._over.items() if x != e}
    for t in range(p):
        pa, pb = interval(new_part, e + t)
        groups = []
        for pc in pieces:
            x0, x1 = max(pc.x0, pa), min(pc.x1, pb)
            if not x1 > x0 or _close(x0, x1):
                continue
            y0, y1 = pc.at(x0), pc.at(x1)
            r = index_range(new_part, min(y0, y1), max(y0, y1))
            if r is None:
                raise MarkovViolation(
                    f"part {e + t} of element {e}: piece image [{min(y0, y1)}, {max(y0, y1)}] "
                    "partially covers an element of the refined partition")
            groups.append(Group(r[0], r[1], 1 if y1 > y0 else -1, 1, (x1 - x0) / (pb - pa)))
        over[e + t] = tuple(groups)
    hist = tuple((_shift(x, e, p) if x != e else x, k) for x, k in mapd.perturbations)
    return _derive(mapd, splits=splits, overrides=tuple(over.items()), perturbations=hist)


def monotone_refinement(mapd: MarkovMapDescriptor, e: int) -> MarkovMapDescriptor:
    """Cut element e at the ends of its monotone pieces."""
    pieces = mapd.pieces(e)
    cuts = [pc.x1 for pc in pieces[:-1]]
    return split(mapd, [(e, cuts)]) if cuts else mapd


def unperturbed(mapd: MarkovMapDescriptor) -> Optional[MarkovMapDescriptor]:
    """The map before its most recent window perturbation, following the history."""
    m = mapd
    while m is not None and m.perturbations == mapd.perturbations:
        m = m.parent
    return m


# --------------------------------------------------------------------------
# probes and sampling


@dataclass(frozen=True)
class LeoReport:
    depth: int
    steps: dict
    leo_evidence: bool
    note: str = ""

    def to_json(self) -> dict:
        return {"depth": self.depth, "steps": {str(k): v for k, v in self.steps.items()},
                "leo_evidence": self.leo_evidence, "note": self.note}


def _merge(ranges):
    ranges = sorted(ranges, key=lambda r: r[0])
    out = []
    for lo, hi in ranges:
        if out and (out[-1][1] is None or lo <= out[-1][1] + 1):
            plo, phi = out[-1]
            out[-1] = (plo, None if phi is None or hi is None else max(phi, hi))
        else:
            out.append((lo, hi))
    return out


def _image_ranges(mapd, ranges, reach: int = 48):
    out = []
    for lo, hi in ranges:
        top = lo + reach if hi is None else hi
        far = 0
        for e in range(lo, top + 1):
            if not mapd.index_set.contains(e):
                continue
            for g in mapd.groups(e, upto=top + 2):
                out.append((g.lo, g.hi))
                if g.hi is not None:
                    far = max(far, g.hi)
        if hi is None and far >= top - 2:
            # the tail of a self-similar family keeps covering further out
            out.append((far, None))
    return _merge(out)


def _is_full(mapd, ranges) -> bool:
    idx = mapd.index_set
    if idx.kind == "z":
        return False
    if len(ranges) != 1 or ranges[0][0] > 0:
        return False
    hi = ranges[0][1]
    return hi is None or (idx.finite and hi >= idx.size - 1)


def leo_probe(mapd: MarkovMapDescriptor, depth: int = 10, window: int = 8) -> LeoReport:
    """Iterate element covers; report after how many steps each element covers [0, 1]."""
    if depth < 1:
        raise MapError("depth must be >= 1")
    steps = {}
    for e in mapd.index_set.window(window):
        cur = [(e, e)]
        steps[e] = None
        for n in range(1, depth + 1):
            cur = _image_ranges(mapd, cur)
            if _is_full(mapd, cur):
                steps[e] = n
                break
    ok = all(v is not None for v in steps.values())
    note = ("every probed element covers [0, 1]" if ok else
            "some probed elements do not cover [0, 1] within the depth")
    return LeoReport(depth, steps, ok, note)


def _eval_map(mapd, x, pieces_by_elem):
    for pcs in pieces_by_elem:
        for pc in pcs:
            if pc.x0 <= x <= pc.x1:
                return pc.at(x)
    return None


def sample(mapd: MarkovMapDescriptor, n_points: int, resolution: int = 24,
           include_endpoints: bool = True) -> list:
    """(x, T(x)) pairs on a uniform grid plus branch endpoints of the first
    ``resolution`` elements. Jumps appear as two pairs with the same x."""
    if n_points < 2:
        raise MapError("n_points must be >= 2")
    elems = mapd.index_set.window(resolution)
    pieces = [mapd.pieces(e, upto=resolution) for e in elems]
    pts = set()
    for k in range(n_points):
        x = Fraction(k, n_points - 1)
        y = _eval_map(mapd, x, pieces)
        if y is None:
            y = _limit_value(mapd, x, pieces)
        pts.add((float(x), float(y)))
    if include_endpoints:
        for pcs in pieces:
            for pc in pcs:
                pts.add((float(pc.x0), float(pc.y0)))
                pts.add((float(pc.x1), float(pc.y1)))
    return sorted(pts)


def _limit_value(mapd, x, pieces):
    """Value at an accumulation point: the nearest probed endpoint, snapped to
    the accumulation points when it is within rounding of one."""
    best = min((pc for pcs in pieces for pc in pcs),
               key=lambda pc: min(abs(float(pc.x0) - float(x)), abs(float(pc.x1) - float(x))))
    y = best.y0 if abs(float(best.x0) - float(x)) < abs(float(best.x1) - float(x)) else best.y1
    for acc in (0, 1) + tuple(mapd.part.accumulation):
        if abs(float(y) - float(acc)) < 1e-6:
            return acc
    return y


# --------------------------------------------------------------------------
# linearization


@dataclass(frozen=True)
class ConstantSlopeMap:
    slope: float
    branches: tuple
    elements: dict
    source: str
    solution: dict
    certification: dict

    def __call__(self, x: float) -> float:
        for br in self.branches:
            if br.x0 <= x <= br.x1:
                return br.at(x)
        raise ValueError(f"{x} is outside the linearized window")

    def max_slope_deviation(self) -> float:
        return max(abs(abs(b.slope) / self.slope - 1) for b in self.branches)

    def sample(self, n_points: int) -> list:
        lo = min(b.x0 for b in self.branches)
        hi = max(b.x1 for b in self.branches)
        pts = set()
        for k in range(n_points):
            x = lo + (hi - lo) * k / (n_points - 1)
            try:
                pts.add((x, self(x)))
            except ValueError:
                pass
        for b in self.branches:
            pts.add((b.x0, b.y0))
            pts.add((b.x1, b.y1))
        return sorted(pts)

    def to_json(self) -> dict:
        return {"slope": self.slope, "source": self.source, "solution": self.solution,
                "certification": self.certification,
                "elements": {str(e): list(iv) for e, iv in sorted(self.elements.items())},
                "branches": [{"element": b.element, "x": [b.x0, b.x1], "y": [b.y0, b.y1],
                              "image": [b.lo, b.hi]} for b in self.branches]}


def _tail_sum(v, start: int, step: int, scale: float, cap: int = 1_000_000) -> float:
    total, j, small = 0.0, start, 0
    for _ in range(cap):
        try:
            t = v.value(j)
        except ValueError:
            return total
        total += t
        small = small + 1 if t <= 1e-17 * scale else 0
        if small >= 20:
            return total
        j += step
    raise LinearizeRefused("the lambda-solution tail does not converge")


# pieces narrower than this fraction of their position lose slope accuracy
# to cancellation and are left out of the linearized window
RESOLUTION = 1e-6


def linearize(mapd: MarkovMapDescriptor, lam: Optional[float] = None, v=None,
              window: Optional[int] = None, tol: float = 1e-6) -> ConstantSlopeMap:
    """Conjugate the map to constant slope lambda using a positive summable lambda-solution."""
    from .classify import classify
    from .solutions import YES, perron_solution, summability

    M = transition_matrix(mapd)
    if v is None:
        if lam is None:
            verdict = classify(M)
            if verdict.lam is None:
                raise LinearizeRefused("the Perron value could not be determined")
            lam = float(verdict.lam)
        v = perron_solution(M, lam)
        if v is None:
            raise LinearizeRefused(f"no positive lambda-solution at lambda = {lam}")
    lam = float(v.lam if lam is None else lam)
    if abs(lam - v.lam) > 1e-12 * lam:
        raise LinearizeRefused("the solution belongs to a different lambda")
    s = summability(v)
    if s.verdict != YES:
        raise LinearizeRefused(f"the lambda-solution is not summable ({s.note}); "
                               "the conjugate would live on the real line")
    if v.residual_sup > tol:
        raise LinearizeRefused(f"solution residual {v.residual_sup:.3g} exceeds {tol}")

    idx = mapd.index_set
    lo, hi = v.lo, v.hi
    if idx.finite:
        lo, hi = 0, idx.size - 1
    scale = max(v.prefix)
    inner = math.fsum(v.value(j) for j in range(lo, hi + 1))
    right = 0.0 if idx.finite else _tail_sum(v, hi + 1, 1, scale)
    left = _tail_sum(v, lo - 1, -1, scale) if idx.kind == "z" else 0.0
    total = inner + right + left

    cum = {lo: left}
    for j in range(lo, hi + 1):
        cum[j + 1] = cum[j] + v.value(j)
    # sums from the far end keep precision near an accumulation point at 0
    suffix = {hi + 1: right}
    for j in range(hi, lo - 1, -1):
        suffix[j] = suffix[j + 1] + v.value(j)

    def psi_boundary(n):
        if n not in cum:
            return None
        if mapd.part.direction < 0:
            return suffix[n] / total
        return cum[n] / total

    def psi_range(g):
        a = psi_boundary(g.lo)
        if g.hi is None:
            b = float(mapd.part.accumulation[0] if mapd.part.direction < 0 else mapd.part.accumulation[-1])
        else:
            b = psi_boundary(g.hi + 1)
        if a is None or b is None:
            return None
        return (a, b) if a <= b else (b, a)

    stop = hi if window is None else min(hi, lo + window - 1)
    if not idx.finite:
        # keep a margin so that every image boundary is inside the cumulative table
        stop = min(stop, hi - 2)
    start = lo + 2 if idx.kind == "z" else lo
    elements, branches, closure, cut_rows = {}, [], 0.0, {}
    for e in range(start, stop + 1):
        a, b = psi_boundary(e), psi_boundary(e + 1)
        xa, xb = min(a, b), max(a, b)
        if not xb - xa > RESOLUTION * xb or xb - xa < 1e-280:
            # below floating resolution at this position
            if idx.kind == "z" and e < 0:
                continue
            break
        elements[e] = (xa, xb)
        x = xa
        gs = mapd.groups(e, upto=stop)
        for g in gs:
            if mapd.infinite(e) and g.lo > stop:
                break
            r = psi_range(g)
            if r is None:
                raise LinearizeRefused(f"element {e}: image outside the solution window")
            if mapd.infinite(e) and (r[1] - r[0]) / lam <= RESOLUTION * xb:
                # the remaining pieces of an infinite row are below resolution
                cut_rows[e] = g.lo - 1
                break
            for t in range(g.count):
                w = (r[1] - r[0]) / lam
                o = g.orient if t % 2 == 0 else -g.orient
                y0, y1 = (r[0], r[1]) if o > 0 else (r[1], r[0])
                branches.append(Piece(e, x, x + w, y0, y1, g.lo, g.hi))
                x += w
        if not mapd.infinite(e):
            closure = max(closure, abs(x - xb) / (xb - xa))
        elif x > xb * (1 + 1e-9):
            closure = max(closure, (x - xb) / (xb - xa))

    cs = ConstantSlopeMap(lam, tuple(branches), elements, mapd.name,
                          {"lambda": lam, "window": [v.lo, v.hi], "residual_sup": v.residual_sup,
                           "summable": s.verdict, "total_length_used": total}, {})
    cert = _certify(mapd, M, cs, lam, cut_rows)
    cert["closure_sup"] = closure
    return replace(cs, certification=cert)


def _certify(mapd, M, cs: ConstantSlopeMap, lam: float, cut_rows: dict, size: int = 24) -> dict:
    """Recount coverings geometrically on the new intervals and compare with M.

    Infinite rows are compared up to the column where their pieces were cut.
    """
    elems = [e for e in mapd.index_set.window(4 * size) if e in cs.elements][:size]
    by_elem = {}
    for b in cs.branches:
        by_elem.setdefault(b.element, []).append(b)
    mismatches = []
    for i in elems:
        for j in elems:
            if i in cut_rows and j > cut_rows[i]:
                continue
            ja, jb = cs.elements[j]
            eps = 1e-9 * (jb - ja)
            cnt = 0
            for b in by_elem.get(i, []):
                ya, yb = min(b.y0, b.y1), max(b.y0, b.y1)
                if ya <= ja + eps and yb >= jb - eps:
                    cnt += 1
                elif min(yb, jb) - max(ya, ja) > eps:
                    mismatches.append((i, j, "partial cover"))
            if cnt != M.entry(i, j):
                mismatches.append((i, j, cnt))
    return {"matrix_preserved": not mismatches, "checked_elements": [min(elems), max(elems)],
            "rows_cut_at": {str(i): j for i, j in cut_rows.items()},
            "mismatches": mismatches[:10], "max_slope_deviation": cs.max_slope_deviation()}


# --------------------------------------------------------------------------
# linearizability advisor


@dataclass(frozen=True)
class Recommendation:
    kind: str
    rule: str
    reason: str
    details: dict = field(default_factory=dict)
    suggested_order: Optional[int] = None

    def to_json(self) -> dict:
        return {"recommendation": self.kind, "rule": self.rule, "reason": self.reason,
                "details": self.details, "suggested_order": self.suggested_order}


def minimal_order(F_at_phi: float) -> Optional[int]:
    """Least k >= 1 with (2k+1) F(Phi) > 1."""
    if F_at_phi <= 0 or math.isnan(F_at_phi):
        return None
    if F_at_phi == math.inf or 3 * F_at_phi > 1:
        return 1
    return max(1, math.floor((1 / F_at_phi - 1) / 2) + 1)


def _closed_form(M):
    from .classify import classify_closed_form, family_of

    fam = family_of(M)
    if fam is None:
        return None, None
    try:
        return fam, classify_closed_form(fam)
    except ValueError:
        return fam, None


def _refined_closed_form(mapd, M):
    """Closed form of M or, when M is unrecognised, of the map it refines.

    Refinement keeps the class and transfers summable solutions both ways, so
    an ancestor reached through splits alone answers for the refined map.
    """
    fam, cf = _closed_form(M)
    chain = mapd
    while cf is None and chain is not None and chain.parent is not None \
            and chain.parent.perturbations == chain.perturbations:
        chain = chain.parent
        fam, cf = _closed_form(transition_matrix(chain))
    return fam, cf


def _base_return_value(S_map, S_matrix, j: int, N: int = 400):
    """F^S_jj at its radius: at least 1 for recurrent S, else the certified series value."""
    from .classify import TRANSIENT, classify
    from .paths import first_entrance
    from .spectral import series_eval

    chain = S_map
    verdict = None
    while chain is not None:
        fam, cf = _closed_form(transition_matrix(chain))
        if cf is not None:
            verdict = cf
            break
        chain = chain.parent if chain.perturbations == S_map.perturbations else None
    if verdict is None:
        verdict = classify(S_matrix, j, N)
    if verdict.kind is None:
        return None, verdict
    if verdict.kind != TRANSIENT:
        return 1.0, verdict
    R = 1.0 / float(verdict.lam)
    ev = series_eval(first_entrance(S_matrix, j, j, N), R)
    return ev.upper, verdict


def linearizability_advisor(target, verdict=None, evidence: Optional[dict] = None) -> Recommendation:
    """Rule engine over leo/recurrence, closed-form summability and perturbation structure."""
    from .classify import classify

    evidence = dict(evidence or {})
    mapd = target if isinstance(target, MarkovMapDescriptor) else None
    M = transition_matrix(mapd) if mapd is not None else target
    if verdict is None:
        verdict = classify(M)
    details = {"class": verdict.kind, "confidence": verdict.confidence}

    leo = evidence.get("leo")
    if leo is None and mapd is not None:
        leo = mapd.claimed_leo
        if leo is None:
            leo = leo_probe(mapd).leo_evidence
    details["leo"] = leo
    if leo and verdict.decided and verdict.recurrent:
        return Recommendation(CERTIFIED, "leo-and-recurrent",
                              "leo maps that are recurrent admit a summable positive solution at the Perron value",
                              details)

    fam, cf = _refined_closed_form(mapd, M)
    if cf is not None and cf.summable is not None:
        details.update({"family": str(fam), "closed_form_class": cf.kind,
                        "lambda": cf.lam_symbolic or float(cf.lam)})
        if cf.summable:
            return Recommendation(CERTIFIED, "closed-form-summable-solution",
                                  "the family has a positive summable solution at its Perron value",
                                  details)
        return Recommendation(NOT_LINEARIZABLE, "closed-form-no-summable-solution",
                              "no positive solution at the Perron value is summable for this family",
                              details)

    if mapd is not None and mapd.perturbations:
        j, k = mapd.perturbations[-1]
        S = unperturbed(mapd)
        if S is not None:
            S_matrix = transition_matrix(S)
            F_phi, sv = _base_return_value(S, S_matrix, j)
            norm = _operator_type(S, S_matrix)
            details.update({"perturbed_element": j, "order": k, "base_class": sv.kind,
                            "base_F_at_Phi": F_phi, "base_column_norm": norm})
            kmin = None if F_phi is None else minimal_order(F_phi)
            if kmin is not None and k >= kmin and (norm is not None or _finite_s(S_matrix, j)):
                return Recommendation(
                    AFTER_PERTURBATION, "window-perturbation-threshold",
                    "the base map is of operator type (or has finite return-ratio supremum) and "
                    "(2k+1) F(Phi) > 1, so the perturbation is strongly recurrent",
                    details, kmin)

    j0 = M.index_set.enumerate(0)
    norm = _operator_type(mapd, M)
    if norm is not None or _finite_s(M, j0):
        F_phi = None
        try:
            F_phi, _ = _base_return_value(mapd, M, j0) if mapd is not None else (None, None)
        except Exception:  # noqa: BLE001 - the suggestion is advisory
            F_phi = None
        kmin = None if F_phi is None else minimal_order(F_phi)
        details.update({"column_norm": norm, "F_at_Phi": F_phi})
        return Recommendation(AFTER_PERTURBATION, "operator-type-or-finite-return-ratio",
                              "a window perturbation of sufficiently large order is linearizable",
                              details, kmin)
    return Recommendation(UNKNOWN, "no-rule-applies", "no structural rule decides this map", details)


def _operator_type(mapd, M) -> Optional[float]:
    """Exact finite column norm of M or of an ancestor whose rows differ in finitely many places."""
    m = mapd
    while True:
        cn = gc.column_norm(M)
        if cn.finite:
            return float(cn.value)
        if m is None or m.parent is None:
            return None
        m = m.parent
        M = transition_matrix(m)


def _finite_s(M, j) -> bool:
    sv = gc.s_supremum(M, j, 32)
    return sv.value is not None and sv.exact


# --------------------------------------------------------------------------
# gallery


def _tent_map(name, a: ASequence, notes=()) -> MarkovMapDescriptor:
    return MarkovMapDescriptor(name, PartitionSpec("dyadic"), BranchRule("tent", a),
                               claimed_leo=True, notes=tuple(notes))


def gallery(name: str, **params) -> tuple:
    """Named example maps with the classification and entropy they are known to have."""
    from .classify import NULL, STRONG, TRANSIENT, ruette_lambda
    from .solutions import bt12_lengths

    def bad(msg):
        raise MapError(f"gallery {name}: {msg}")

    def take(*allowed):
        extra = set(params) - set(allowed)
        if extra:
            bad(f"unknown parameters {sorted(extra)}")

    if name == "tent":
        take()
        return (_tent_map("tent", ASequence()),
                {"class": STRONG, "entropy": "log 2", "lambda": 2.0, "linearizable": True})
    if name == "tent_A":
        take("ell")
        ell = int(params.get("ell", 1))
        if ell < 1:
            bad("ell must be >= 1")
        return (_tent_map(f"tent_A({ell})", seq.a_ell(ell)),
                {"class": STRONG, "lambda_range": [3.0, 4.0], "linearizable": True})
    if name == "tent_B1":
        take()
        return (_tent_map("tent_B1", seq.b1()),
                {"class": TRANSIENT, "entropy": "log 3", "lambda": 3.0})
    if name == "tent_B2":
        take("criterion", "horizon")
        crit = params.get("criterion", "full")
        if crit == "full":
            return (_tent_map("tent_B2", seq.b2()),
                    {"class": NULL, "entropy": "log 3", "lambda": 3.0, "linearizable": True})
        if crit == "partial":
            horizon = int(params.get("horizon", 200))
            a = seq.b1(seq.b2_partial_removed(horizon))
            return (_tent_map(f"tent_B2_partial({horizon})", a,
                              ["greedy on partial sums to the horizon; a finite-stage approximation"]),
                    {"class": None, "entropy": None, "horizon": horizon,
                     "removed": list(a.removed)})
        bad("criterion must be 'full' or 'partial'")
    if name == "ruette":
        take("a")
        a = params.get("a", ASequence((), "constant", 0))
        if isinstance(a, str):
            from .classify import parse_sequence
            a = parse_sequence(a)
        lam1, lam2 = ruette_lambda(a)
        if abs(lam1 - lam2) > 1e-9 * lam1:
            bad(f"the two defining equations disagree: {lam1} vs {lam2}")
        mapd = MarkovMapDescriptor("ruette", PartitionSpec("geometric", (1 / lam1,)),
                                   BranchRule("ruette", a, (lam1,)), claimed_leo=True,
                                   notes=(f"slope {lam1!r}",))
        return mapd, {"class": STRONG, "lambda": lam1, "lambda_second_equation": lam2,
                      "linearizable": True}
    if name == "bt12":
        take("lam", "continuous")
        lam = as_number(params.get("lam", 4))
        if lam < 4:
            bad("lambda must be >= 4: the characteristic roots are complex below 4")
        cont = bool(params.get("continuous", False))
        mult = 2 if cont else 1
        w = bt12_lengths(lam, 3)
        mapd = MarkovMapDescriptor(
            "bt12_continuous" if cont else "bt12", PartitionSpec("bt12", (lam,)),
            BranchRule("bt12", params=(mult,)), claimed_leo=True, continuous=cont,
            notes=("tent-shaped branches of the same height" if cont
                   else "countably piecewise continuous",))
        return mapd, {"class": TRANSIENT, "entropy": "log 8" if cont else "log 4",
                      "lambda": 8.0 if cont else 4.0, "geometry_lambda": float(lam),
                      "w": [_num_json(x) for x in w], "continuous": cont}
    if name == "bosou_factor":
        take()
        mapd = MarkovMapDescriptor("bosou_factor", PartitionSpec("dyadic"), BranchRule("bosou"),
                                   continuous=False,
                                   notes=("matrix-first: branch geometry is illustrative",))
        return mapd, {"class": TRANSIENT, "entropy": "log 9", "lambda": 9.0}
    if name == "kmap":
        take()
        mapd = MarkovMapDescriptor("kmap", PartitionSpec("logistic"),
                                   BranchRule("banded", params=(1, 1, 2, 1, 0)), claimed_leo=False)
        return mapd, {"class": NULL, "entropy": "log 5", "lambda": 5.0, "linearizable": False}
    if name == "boundary":
        take("a", "b", "c")
        a, b, c = (int(params.get(x, d)) for x, d in (("a", 1), ("b", 1), ("c", 3)))
        mapd = MarkovMapDescriptor(f"boundary({a},{b},{c})", PartitionSpec("dyadic_right"),
                                   BranchRule("banded", params=(a, b, 2, 1, c)), claimed_leo=False)
        if 2 * b > c:
            cls, summable = TRANSIENT, a < b
        elif 2 * b == c:
            cls, summable = NULL, a < b
        else:
            cls, summable = STRONG, a + b < c
        return mapd, {"class": cls, "linearizable": summable}
    if name == "golden_mean":
        take()
        rule = BranchRule("explicit", params=((Group(1, 1, 1),), (Group(0, 1, -1),)))
        mapd = MarkovMapDescriptor("golden_mean", PartitionSpec("finite", (0, Fraction(1, 2), 1)),
                                   rule, claimed_leo=True)
        phi = (1 + math.sqrt(5)) / 2
        return mapd, {"class": STRONG, "entropy": "log((1 + sqrt(5))/2)", "lambda": phi,
                      "linearizable": True}
    raise MapError(f"unknown gallery entry {name!r}")


GALLERY = ("tent", "tent_A", "tent_B1", "tent_B2", "ruette", "bt12", "bosou_factor", "kmap",
           "boundary", "golden_mean")
