"""Vere-Jones classification of countable matrices.

Three engines share one verdict type:

* closed forms for the named families (exact class and Perron value),
* a numeric decision tree on first-return counts with tail bounds,
* subgraph probes (entropy of a proper subgraph, self-embedding).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from . import sequences as seq
from .exact import Surd
from .graphcore import (Affine, Banded, CountableMatrix, RowFormula, UpperHull, affine_transform,
                        banded_z, boundary_n, bosou_factor_matrix, bt12_matrix, drop_first,
                        ruette_matrix, tent_matrix, truncate)
from .paths import first_entrance, power_counts
from .sequences import ASequence
from .spectral import (SeriesEval, UndefinedGrowth, derivative_series_eval, growth_rate,
                       perron_value, radius_bracket, series_eval)

TRANSIENT = "Transient"
NULL = "NullRecurrent"
WEAK = "WeaklyRecurrent"
STRONG = "StronglyRecurrent"
CLASSES = (TRANSIENT, NULL, WEAK, STRONG)

EXACT = "exact"
HIGH = "numeric-high"
INCONCLUSIVE = "inconclusive"

DEFAULT_TOL = 1e-3
ZERO_FLAG = 1e-8


class UnknownFamily(ValueError):
    pass


@dataclass(frozen=True)
class Evidence:
    F_at_R: Optional[SeriesEval] = None
    Fprime_at_R: Optional[SeriesEval] = None
    R: Optional[float] = None
    Phi: Optional[float] = None
    limit_m_R_n: Optional[float] = None
    limit_is_zero: Optional[bool] = None
    notes: tuple = ()

    def to_json(self) -> dict:
        return {
            "F_at_R": self.F_at_R.to_json() if self.F_at_R else None,
            "Fprime_at_R": self.Fprime_at_R.to_json() if self.Fprime_at_R else None,
            "R": _num(self.R), "Phi": _num(self.Phi),
            "limit_m_R_n": _num(self.limit_m_R_n), "limit_is_zero": self.limit_is_zero,
            "notes": list(self.notes),
        }


def _num(x):
    if x is None:
        return None
    x = float(x)
    if math.isinf(x):
        return "inf"
    return x


@dataclass(frozen=True)
class VereJonesVerdict:
    kind: Optional[str]
    confidence: str
    evidence: Evidence = Evidence()
    lam: Optional[float] = None
    lam_symbolic: Optional[str] = None
    summable: Optional[bool] = None
    source: str = "numeric"

    def __post_init__(self):
        if self.kind is not None and self.kind not in CLASSES:
            raise ValueError(f"unknown class {self.kind!r}")
        if self.confidence not in (EXACT, HIGH, INCONCLUSIVE):
            raise ValueError(f"unknown confidence {self.confidence!r}")

    @property
    def decided(self) -> bool:
        return self.confidence != INCONCLUSIVE and self.kind is not None

    @property
    def recurrent(self) -> Optional[bool]:
        return None if self.kind is None else self.kind != TRANSIENT

    def to_json(self) -> dict:
        out = {"class": self.kind, "confidence": self.confidence, "source": self.source,
               "lambda_value": _num(self.lam), "lambda_symbolic": self.lam_symbolic,
               "summable": self.summable, "evidence": self.evidence.to_json()}
        if self.lam is not None:
            out["lambda"] = f"{self.lam_symbolic or _num(self.lam)} ≈ {float(self.lam):.12g}"
        return out


def coherence_problems(v: VereJonesVerdict, tol: float = DEFAULT_TOL) -> list[str]:
    """Violations of the evidence invariants for a confident numeric verdict."""
    if v.confidence != HIGH:
        return []
    ev, out = v.evidence, []
    if v.kind == TRANSIENT:
        if ev.F_at_R is None or not ev.F_at_R.certified or ev.F_at_R.upper >= 1:
            out.append("transient without a certified F(R) < 1")
    if v.kind == STRONG:
        if ev.R is None or ev.Phi is None or not ev.R < ev.Phi * (1 - tol):
            out.append("strongly recurrent without R < Phi")
    if v.kind in (NULL, WEAK):
        if ev.F_at_R is None or not ev.F_at_R.certified or abs(ev.F_at_R.upper - 1) > tol:
            out.append("recurrent without F(R) = 1 within tolerance")
        fp = ev.Fprime_at_R
        if v.kind == NULL and (fp is None or not fp.divergent):
            out.append("null recurrent without a divergent F'(R)")
        if v.kind == WEAK and (fp is None or not fp.certified or fp.divergent):
            out.append("weakly recurrent without a finite F'(R)")
    return out


# --------------------------------------------------------------------------
# family descriptors


FAMILY_NAMES = ("banded_z", "boundary_n", "affine", "tent_sequence", "ruette_sequence",
                "bt12", "bosou_factor")


@dataclass(frozen=True)
class FamilyDescriptor:
    name: str
    params: tuple = ()

    def __post_init__(self):
        if self.name not in FAMILY_NAMES:
            raise UnknownFamily(f"unknown family {self.name!r}; use classify_numeric instead")
        p = self.params
        if self.name in ("banded_z", "boundary_n"):
            need = 2 if self.name == "banded_z" else 3
            if len(p) != need or any(not isinstance(x, int) or x < 1 for x in p):
                raise ValueError(f"{self.name} needs {need} positive integers, got {p}")
        elif self.name == "affine":
            if len(p) != 3 or not isinstance(p[2], FamilyDescriptor):
                raise ValueError("affine needs (k, l, inner family)")
            if p[0] < 1 or p[1] < 0:
                raise ValueError("affine needs k >= 1 and l >= 0")
        elif self.name in ("tent_sequence", "ruette_sequence"):
            if len(p) != 1 or not isinstance(p[0], ASequence):
                raise ValueError(f"{self.name} needs one sequence")
            if self.name == "tent_sequence":
                a = p[0]
                if a.tail == "constant" and a.value == 0 or any(x < 1 for x in a.prefix):
                    raise ValueError("tent sequences must be positive")
                if not a.all_odd():
                    raise ValueError("tent sequences must be odd")
        elif p:
            raise ValueError(f"{self.name} takes no parameters")

    def matrix(self) -> CountableMatrix:
        p = self.params
        if self.name == "banded_z":
            return banded_z(*p)
        if self.name == "boundary_n":
            return boundary_n(*p)
        if self.name == "affine":
            return affine_transform(p[2].matrix(), p[0], p[1])
        if self.name == "tent_sequence":
            return tent_matrix(p[0])
        if self.name == "ruette_sequence":
            return ruette_matrix(p[0])
        if self.name == "bt12":
            return bt12_matrix()
        return bosou_factor_matrix()

    def __str__(self):
        if self.name in ("banded_z", "boundary_n"):
            return f"{self.name}:{','.join(map(str, self.params))}"
        if self.name == "affine":
            k, l, inner = self.params
            return f"affine:{k},{l},{inner}"
        if self.name in ("tent_sequence", "ruette_sequence"):
            return f"{self.name}:{sequence_spec(self.params[0])}"
        return self.name


def sequence_spec(a: ASequence) -> str:
    """Short text form of the sequences used by the families."""
    if a.tail == "b2" and not a.prefix:
        return "b2"
    if a.tail == "b1" and not a.prefix:
        return "b1" + ("" if not a.removed else ":" + ",".join(map(str, a.removed)))
    if a.tail == "constant" and a.value == 3 and a.prefix and set(a.prefix) == {1}:
        return f"A:{len(a.prefix)}"
    head = ",".join(map(str, a.prefix))
    body = f"const:{a.value}" if a.tail == "constant" else f"{a.tail}:{a.value}"
    return body + (f";prefix={head}" if head else "")


def parse_sequence(text: str) -> ASequence:
    """Inverse of ``sequence_spec``: A:l, const:c, power:b, b1[:r1,r2..], b2, ;prefix=..."""
    text = text.strip()
    prefix = ()
    if ";prefix=" in text:
        text, head = text.split(";prefix=", 1)
        prefix = tuple(int(x) for x in head.split(",") if x)
    name, _, arg = text.partition(":")
    if name == "A":
        return seq.a_ell(int(arg))
    if name == "const":
        return seq.constant(int(arg), prefix)
    if name == "power":
        return seq.power(int(arg), prefix)
    if name == "b1":
        return seq.b1(tuple(int(x) for x in arg.split(",") if x))
    if name == "b2":
        return seq.b2()
    raise ValueError(f"unknown sequence rule {text!r}")


def parse_family(text: str) -> FamilyDescriptor:
    """Parse ``name:params`` such as ``boundary_n:1,1,3`` or ``affine:2,1,banded_z:1,1``."""
    name, _, rest = text.strip().partition(":")
    if name not in FAMILY_NAMES:
        raise UnknownFamily(f"unknown family {name!r}; use classify_numeric instead")
    if name in ("banded_z", "boundary_n"):
        return FamilyDescriptor(name, tuple(int(x) for x in rest.split(",")))
    if name == "affine":
        k, l, inner = rest.split(",", 2)
        return FamilyDescriptor(name, (int(k), int(l), parse_family(inner)))
    if name in ("tent_sequence", "ruette_sequence"):
        return FamilyDescriptor(name, (parse_sequence(rest),))
    if rest:
        raise ValueError(f"{name} takes no parameters")
    return FamilyDescriptor(name)


def family_of(M: CountableMatrix) -> Optional[FamilyDescriptor]:
    """Recognize a named family from a matrix descriptor (None when not recognized)."""
    rule, kind = M.tail_rule, M.index_set.kind
    if M.index_set.finite:
        return None
    if isinstance(rule, Banded):
        coef = rule.coef
        if set(coef) - {-1, 0, 1} or -1 not in coef or 1 not in coef:
            return None
        a, b, l = coef[-1], coef[1], coef.get(0, 0)
        exc = M.cells
        if kind == "z":
            if exc:
                return None
            k = math.gcd(a, b)
            if l == 0:
                return FamilyDescriptor("banded_z", (a, b))
            return FamilyDescriptor("affine", (k, l, FamilyDescriptor("banded_z", (a // k, b // k))))
        if set(exc) != {(0, 1)}:
            return None
        c = exc[(0, 1)]
        if l == 0:
            return FamilyDescriptor("boundary_n", (a, b, c))
        k = math.gcd(math.gcd(a, b), c)
        return FamilyDescriptor("affine", (k, l, FamilyDescriptor("boundary_n", (a // k, b // k, c // k))))
    if M.exceptional or kind != "n":
        return None
    if isinstance(rule, RowFormula):
        name = "tent_sequence" if rule.name == "tent_perturbation" else "ruette_sequence"
        try:
            return FamilyDescriptor(name, (rule.a,))
        except ValueError:
            return None
    if isinstance(rule, UpperHull):
        if M == bt12_matrix():
            return FamilyDescriptor("bt12")
        if M == bosou_factor_matrix():
            return FamilyDescriptor("bosou_factor")
    if isinstance(rule, Affine):
        inner = family_of(CountableMatrix(M.index_set, rule.inner))
        if inner is not None:
            return FamilyDescriptor("affine", (rule.k, rule.l, inner))
    return None


# --------------------------------------------------------------------------
# closed forms


def _verdict(kind, lam, symbolic, summable, notes=(), R=None, Phi=None):
    ev = Evidence(R=R if R is not None else (1 / float(lam) if lam else None), Phi=Phi,
                  notes=tuple(notes))
    return VereJonesVerdict(kind, EXACT, ev, float(lam), symbolic, summable, "closed_form")


def _sqrt_ab(a, b) -> Surd:
    return Surd.sqrt(a * b, 2)


def _tent_series(a: ASequence, z: float, weighted: bool = False) -> float:
    """sum_n w(n) f(n) z^n for the tent family, f(n) = a_1 ... a_{n-1}."""
    return _tent_tail(a, 0, z, weighted)


def _geo(q: float, n0: int, weighted: bool) -> float:
    """sum_{n >= n0} w(n) q^n with w(n) = n or 1."""
    if q <= 0:
        return 0.0 if n0 > 0 or not weighted else 0.0
    if q >= 1:
        return math.inf
    head = math.exp(n0 * math.log(q))
    if not weighted:
        return head / (1 - q)
    return head * (n0 / (1 - q) + q / (1 - q) ** 2)


def _tent_tail(a: ASequence, N: int, z: float, weighted: bool) -> float:
    """sum_{n > N} w(n) a_1...a_{n-1} z^n."""
    if z <= 0:
        return 0.0
    lz = math.log(z)
    logp = 0.0
    for m in range(1, N + 1):
        am = a(m)
        if am == 0:
            return 0.0
        logp += math.log(am)
    n = N + 1
    acc = 0.0
    # term(n) = a_1..a_{n-1} z^n
    logt = logp + n * lz
    while n < a.regular_from:
        acc += (n if weighted else 1) * math.exp(logt)
        am = a(n)
        if am == 0:
            return acc
        logt += math.log(am) + lz
        n += 1
    t = math.exp(logt) if logt > -745 else 0.0
    if a.tail == "constant" or (a.tail == "power" and a.value <= 1):
        c = a.value
        if c == 0:
            return acc + (n if weighted else 1) * t
        if c * z >= 1:
            return math.inf
        # term(n + s) = t (c z)^s
        q = c * z
        return acc + t * _geo(q, 0, False) if not weighted else acc + t * (n / (1 - q) + q / (1 - q) ** 2)
    if a.tail == "power":
        return math.inf
    # b1 / b2: ratios a_m z are z or 3 z
    if 3 * z > 1 + 1e-15:
        return math.inf
    if weighted:
        if 3 * z >= 1 - 1e-15:
            return math.inf
        q = 3 * z
        return acc + t * (n / (1 - q) + q / (1 - q) ** 2)
    return acc + t * (1 + a.product_tail_sum(n, 1 / z))


def _ruette_tail(a: ASequence, N: int, z: float, weighted: bool) -> float:
    """sum_{n > N} w(n) f(n) z^n with f(1) = 1, f(n) = 1 + 2 a_{n-1}; b1/b2 tails are bounded by 3."""
    if z <= 0:
        return 0.0
    if z >= 1:
        return math.inf
    acc = _geo(z, N + 1, weighted)
    n = max(N + 1, 2)
    while n - 1 < a.regular_from:
        acc += 2 * (n if weighted else 1) * a(n - 1) * z ** n
        n += 1
    if a.tail == "constant":
        return acc + 2 * a.value * _geo(z, n, weighted)
    if a.tail == "power":
        b = a.value
        if b == 0:
            return acc
        if b * z >= 1:
            return math.inf
        # a_{n-1} z^n = (b z)^n / b
        return acc + 2 / b * _geo(b * z, n, weighted)
    return acc + 2 * 3 * _geo(z, n, weighted)


def _tent_phi(a: ASequence) -> float:
    if a.tail == "constant":
        return 1 / a.value if a.value else math.inf
    if a.tail == "power":
        return math.inf if a.value == 0 else (1.0 if a.value == 1 else 0.0)
    return 1 / 3


def _ruette_phi(a: ASequence) -> float:
    if a.tail == "power" and a.value > 1:
        return 1 / a.value
    return 1.0


def _root(F: Callable[[float], float], hi: float) -> Optional[float]:
    """Least z in (0, hi) with F(z) = 1 for increasing F with F(0) = 0.

    Returns None when F stays <= 1 below the radius hi.
    """
    if math.isfinite(hi):
        edge = F(hi)
        if math.isfinite(edge) and edge <= 1:
            return None
        z = hi / 2
        while F(z) <= 1:
            z = (z + hi) / 2
            if hi - z < 1e-15 * hi:
                return None
    else:
        z = 1.0
        while F(z) <= 1:
            z *= 2
            if z > 1e300:
                return None
    return brentq(lambda x: F(x) - 1, 0.0, z, xtol=1e-17, rtol=1e-15, maxiter=500)


def seq_series(a: ASequence, x: float) -> float:
    """sum_{n >= 1} a_n x^n (inf when divergent)."""
    total, n = 0.0, 1
    while n < a.regular_from:
        total += a(n) * x ** n
        n += 1
    if a.tail == "constant":
        return total + a.value * _geo(x, n, False) if a.value else total
    if a.tail == "power":
        return total + _geo(a.value * x, n, False) if a.value else total
    if x >= 1:
        return math.inf
    while True:
        t = a(n) * x ** n
        total += t
        n += 1
        if t < 1e-18 * total and 3 * x ** n / (1 - x) < 1e-17 * total:
            return total


def ruette_lambda(a: ASequence) -> tuple[float, float]:
    """Perron value from the two defining equations of the Ruette-style family.

    Returns the roots of lambda = 2 + sum 2 a_n (1 - 1/lambda) lambda^-n and of
    lambda = 1 + sum (1 + 2 a_n) lambda^-n.
    """
    lo = max(2.0, float(a.growth()))

    def g1(lam):
        return 2 + 2 * (1 - 1 / lam) * seq_series(a, 1 / lam) - lam

    def g2(lam):
        return 1 + 1 / (lam - 1) + 2 * seq_series(a, 1 / lam) - lam

    def solve(g):
        left = lo
        if not math.isfinite(g(left)):
            left = lo * (1 + 1e-12)
        if g(left) <= 0:
            return left
        right = left + 1
        while g(right) > 0:
            right *= 2
        return brentq(g, left, right, xtol=1e-15, rtol=1e-15, maxiter=500)

    return solve(g1), solve(g2)


def classify_closed_form(fam: FamilyDescriptor) -> VereJonesVerdict:
    """Exact class and Perron value for the named families."""
    name, p = fam.name, fam.params
    if name == "banded_z":
        a, b = p
        lam = _sqrt_ab(a, b)
        return _verdict(NULL, lam, str(lam), False,
                        ["lambda-solutions on Z are not summable"], Phi=1 / float(lam))
    if name == "boundary_n":
        a, b, c = p
        if 2 * b > c:
            lam = _sqrt_ab(a, b)
            return _verdict(TRANSIENT, lam, str(lam), a < b, ["2b > c"], Phi=1 / float(lam))
        if 2 * b == c:
            lam = _sqrt_ab(a, b)
            return _verdict(NULL, lam, str(lam), a < b, ["2b = c"], Phi=1 / float(lam))
        lam = Surd.sqrt(Fraction(a, c - b), c)
        return _verdict(STRONG, lam, str(lam), a + b < c, ["2b < c"],
                        Phi=1 / float(_sqrt_ab(a, b)))
    if name == "affine":
        k, l, inner = p
        if not inner.matrix().finite_rows:
            raise ValueError("affine reduction needs an inner matrix with finite rows")
        v = classify_closed_form(inner)
        sym = None
        if v.lam_symbolic is not None:
            try:
                sym = str(_parse_surd(inner, v) * k + l)
            except ValueError:
                sym = None
        lam = k * v.lam + l
        return _verdict(v.kind, lam, sym, v.summable,
                        v.evidence.notes + (f"affine image k={k}, l={l} of {inner}",))
    if name == "tent_sequence":
        return _tent_closed(p[0])
    if name == "ruette_sequence":
        a = p[0]
        lam1, lam2 = ruette_lambda(a)
        sym = None
        if a.tail == "constant" and not a.prefix:
            sym = str(Surd.of(1) + Surd.sqrt(1 + 2 * a.value))
        return _verdict(STRONG, lam1, sym, True,
                        [f"second defining equation root {lam2!r}",
                         "F(Phi) diverges: terms do not decay at the radius"],
                        Phi=_ruette_phi(a))
    if name == "bt12":
        return _verdict(TRANSIENT, 4, "4", True,
                        ["self-embedding: deleting row/column 0 reproduces the matrix"], Phi=0.25)
    if name == "bosou_factor":
        return _verdict(TRANSIENT, 9, "9", True,
                        ["self-embedding: deleting row/column 0 reproduces the matrix"], Phi=1 / 9)
    raise UnknownFamily(f"no closed form for {name!r}; use classify_numeric instead")


def _parse_surd(inner: FamilyDescriptor, v: VereJonesVerdict) -> Surd:
    """Recompute the exact value of an inner verdict."""
    n, p = inner.name, inner.params
    if n == "banded_z":
        return _sqrt_ab(*p)
    if n == "boundary_n":
        a, b, c = p
        return _sqrt_ab(a, b) if 2 * b >= c else Surd.sqrt(Fraction(a, c - b), c)
    if n == "affine":
        return _parse_surd(p[2], v) * p[0] + p[1]
    raise ValueError("no exact form")


def _tent_closed(a: ASequence) -> VereJonesVerdict:
    if a.tail == "power" and a.value > 1:
        raise ValueError("first-return series has zero radius: entropy is infinite")
    phi = _tent_phi(a)
    notes = []
    if a.tail in ("constant", "power"):
        z = _root(lambda x: _tent_series(a, x), phi)
        lam = 1 / z
        sym = "2" if abs(lam - 2) < 1e-14 and a.prod(len(a.prefix) + 2) == 1 else None
        summable = math.isfinite(a.product_tail_sum(1, lam))
        return _verdict(STRONG, lam, sym, summable, ["F diverges at its radius"], R=z, Phi=phi)
    if a.tail == "b2":
        notes.append("greedy construction: F(1/3) = 1 in the limit, sum n f(n) 3^-n diverges")
        summable = math.isfinite(a.product_tail_sum(1, 3.0))
        return _verdict(NULL, 3, "3", summable, notes, R=1 / 3, Phi=phi)
    S = seq.b1_series_at_third(a.removed)
    notes.append(f"F(1/3) = {float(S)!r} (exact rational)")
    if S < 1:
        return _verdict(TRANSIENT, 3, "3", False, notes + ["no lambda-solution: row 0 fails"],
                        R=1 / 3, Phi=phi)
    if S == 1:
        return _verdict(NULL, 3, "3", math.isfinite(a.product_tail_sum(1, 3.0)), notes,
                        R=1 / 3, Phi=phi)
    z = brentq(lambda x: _tent_series(a, x) - 1, 0.0, 1 / 3, xtol=1e-17, rtol=1e-15)
    return _verdict(STRONG, 1 / z, None, True, notes, R=z, Phi=phi)


# --------------------------------------------------------------------------
# declared tails for the numeric engine


@dataclass(frozen=True)
class DeclaredTail:
    """Known first-return structure at a base vertex."""

    phi: float
    F_tail: Callable[[int, float], float]
    Fp_tail: Callable[[int, float], float]
    F_full: Callable[[float], float]
    note: str


def _catalan_tail(K: float, ab: int):
    """Tails for f(2n) = K Cat(n-1) (ab)^n, F(z) = (K/2)(1 - sqrt(1 - 4ab z^2))."""

    def coef_log(n):
        m = n // 2
        return (math.log(K) + math.lgamma(2 * m - 1) - math.lgamma(m) - math.lgamma(m + 1)
                + m * math.log(ab))

    def partial(N, z, weighted):
        if z <= 0:
            return 0.0
        lz = math.log(z)
        return math.fsum((n if weighted else 1) * math.exp(coef_log(n) + n * lz)
                         for n in range(2, N + 1, 2))

    edge = 1 / (2 * math.sqrt(ab)) * (1 - 1e-12)

    def F_full(z):
        if z >= edge:
            return K / 2 if z <= edge / (1 - 2e-12) else math.inf
        d = 1 - 4 * ab * z * z
        return math.inf if d < 0 else K / 2 * (1 - math.sqrt(d))

    def Fp_full(z):
        if z >= edge:
            return math.inf
        d = 1 - 4 * ab * z * z
        return math.inf if d <= 0 else K / 2 * 4 * ab * z * z / math.sqrt(d)

    def F_tail(N, z):
        return max(0.0, F_full(z) - partial(N, z, False))

    def Fp_tail(N, z):
        v = Fp_full(z)
        return math.inf if math.isinf(v) else max(0.0, v - partial(N, z, True))

    return F_tail, Fp_tail, F_full


def declared_tail(M: CountableMatrix, j: int) -> Optional[DeclaredTail]:
    """Closed-form tails of F_jj for the named families (None when not available)."""
    fam = family_of(M)
    if fam is None:
        return None
    if fam.name == "banded_z":
        a, b = fam.params
        Ft, Fpt, Ff = _catalan_tail(2.0, a * b)
        return DeclaredTail(1 / (2 * math.sqrt(a * b)), Ft, Fpt, Ff,
                            "first returns: f(2n) = 2 Cat(n-1) (ab)^n")
    if fam.name == "boundary_n" and j == 0:
        a, b, c = fam.params
        Ft, Fpt, Ff = _catalan_tail(c / b, a * b)
        return DeclaredTail(1 / (2 * math.sqrt(a * b)), Ft, Fpt, Ff,
                            "first returns: f(2n) = (c/b) Cat(n-1) (ab)^n")
    if fam.name == "tent_sequence" and j == 0:
        a = fam.params[0]
        if a.tail == "power" and a.value > 1:
            return None
        if a.tail == "b2":
            # the greedy construction drives the full series to 1
            H = 40

            def F_tail(N, z):
                if abs(z - 1 / 3) < 1e-15:
                    return max(0.0, 1 - _tent_series_partial(a, N, z))
                return _tent_tail(a, N, z, False)

            return DeclaredTail(1 / 3, F_tail, lambda N, z: _tent_tail(a, N, z, True),
                                lambda z: _tent_series_partial(a, H, z) + F_tail(H, z),
                                "greedy construction: F(1/3) = 1")
        return DeclaredTail(_tent_phi(a), lambda N, z: _tent_tail(a, N, z, False),
                            lambda N, z: _tent_tail(a, N, z, True),
                            lambda z: _tent_tail(a, 0, z, False),
                            "first returns: f(n) = a_1 ... a_(n-1)")
    if fam.name == "ruette_sequence" and j == 0:
        a = fam.params[0]
        return DeclaredTail(_ruette_phi(a), lambda N, z: _ruette_tail(a, N, z, False),
                            lambda N, z: _ruette_tail(a, N, z, True),
                            lambda z: _ruette_tail(a, 0, z, False),
                            "first returns: f(n) = 1 + 2 a_(n-1)")
    return None


def _tent_series_partial(a: ASequence, N: int, z: float) -> float:
    lz = math.log(z)
    out, logp = [], 0.0
    for n in range(1, N + 1):
        out.append(math.exp(logp + n * lz))
        logp += math.log(a(n))
    return math.fsum(out)


# --------------------------------------------------------------------------
# numeric decision tree


def _limit_mRn(M, j, N, R):
    m = power_counts(M, j, j, N).values
    logs = [math.log(v) + n * math.log(R) for n, v in enumerate(m) if v > 0 and n >= N - 1]
    if not logs:
        return 0.0, True
    val = math.exp(max(logs))
    return val, val < ZERO_FLAG


def classify_numeric(M: CountableMatrix, j: Optional[int] = None, N: int = 400,
                     tol: float = DEFAULT_TOL, lambda_estimate: Optional[float] = None,
                     declared="auto") -> VereJonesVerdict:
    """Decision tree on first-return counts at base index j.

    ``declared`` is "auto" (use known tails of recognized families), None (generic
    geometric tails only) or a DeclaredTail.
    """
    if j is None:
        j = M.index_set.enumerate(0)
    notes = []
    if declared == "auto":
        fam = family_of(M)
        if fam is not None and fam.name == "affine":
            k, l, inner = fam.params
            if inner.matrix().finite_rows:
                v = classify_numeric(inner.matrix(), j, N, tol, None, "auto")
                lam = None if v.lam is None else k * v.lam + l
                ev = replace(v.evidence, notes=v.evidence.notes + (
                    f"classified through the affine preimage {inner} (k={k}, l={l})",))
                return replace(v, lam=lam, evidence=ev)
        decl = declared_tail(M, j)
    else:
        decl = declared
    if decl is not None:
        notes.append(decl.note)
    f = first_entrance(M, j, j, N)
    if lambda_estimate is None:
        sched = tuple(s for s in (N // 4, N // 2, N) if s >= 1)
        spec = perron_value(M, sorted(set(sched)))
        lam_lo, lam_est = spec.lambda_lower, spec.lambda_estimate
    else:
        lam_lo = lam_est = float(lambda_estimate)
    if decl is not None:
        phi = decl.phi
    else:
        try:
            phi = 1 / growth_rate(f)
        except UndefinedGrowth:
            phi = math.inf
            notes.append("first-return counts vanish: finite return structure")
    R_up = 1 / lam_lo if lam_lo > 0 else math.inf
    z_partial = _partial_root(f.values, phi)
    if z_partial is not None:
        R_up = min(R_up, z_partial)
    if decl is not None:
        z_full = _root(decl.F_full, phi)
        if z_full is not None:
            R_up = min(R_up, z_full)
    tail_F = decl.F_tail if decl else "geometric"
    tail_Fp = decl.Fp_tail if decl else "geometric"

    if R_up < phi * (1 - tol):
        R = R_up
        if decl is not None:
            r = _root(decl.F_full, phi)
            if r is not None:
                R = r
        FR = series_eval(f, R, tail_F)
        FpR = derivative_series_eval(f, R, tail_Fp)
        lim, zero = _limit_mRn(M, j, N, R)
        ev = Evidence(FR, FpR, R, phi, lim, zero, tuple(notes + ["R < Phi"]))
        return VereJonesVerdict(STRONG, HIGH, ev, 1 / R, None, None, "numeric")

    z = min(phi, R_up)
    FR = series_eval(f, z, tail_F)
    lim, zero = _limit_mRn(M, j, N, z)
    base = Evidence(FR, None, z, phi, lim, zero, tuple(notes))
    if FR.certified and FR.upper < 1 - tol:
        return VereJonesVerdict(TRANSIENT, HIGH, base, 1 / z, None, None, "numeric")
    if FR.certified and abs(FR.upper - 1) <= tol:
        FpR = derivative_series_eval(f, z, tail_Fp)
        ev = replace(base, Fprime_at_R=FpR)
        if FpR.divergent:
            return VereJonesVerdict(NULL, HIGH, ev, 1 / z, None, None, "numeric")
        if FpR.certified and decl is not None:
            return VereJonesVerdict(WEAK, HIGH, ev, 1 / z, None, None, "numeric")
        ev = replace(ev, notes=ev.notes + ("F'(R) has no certified tail",))
        return VereJonesVerdict(None, INCONCLUSIVE, ev, 1 / z, None, None, "numeric")
    why = "F(R) tail not certified" if not FR.certified else "F(R) neither below nor at 1"
    return VereJonesVerdict(None, INCONCLUSIVE, replace(base, notes=base.notes + (why,)),
                            1 / z if z else None, None, None, "numeric")


def _partial_root(values, phi) -> Optional[float]:
    """Least z < phi with sum_{n<=N} f(n) z^n = 1, if any."""
    terms = [(n, v) for n, v in enumerate(values) if v > 0 and n > 0]
    if not terms:
        return None
    ns = np.array([n for n, _ in terms], dtype=float)
    lc = np.array([math.log(v) for _, v in terms])

    def F(z):
        return float(np.exp(lc + ns * math.log(z)).sum())

    hi = phi if math.isfinite(phi) else 1.0
    if not math.isfinite(phi):
        while F(hi) <= 1:
            hi *= 2
            if hi > 1e300:
                return None
    elif F(hi) <= 1:
        return None
    return brentq(lambda z: F(z) - 1, 1e-300, hi, xtol=1e-16, rtol=1e-15, maxiter=500)


# --------------------------------------------------------------------------
# subgraph probes


@dataclass(frozen=True)
class SalamaReport:
    lambda_full: float
    lambda_subgraph: float
    subgraph_equal: bool
    self_embedding: Optional[bool]
    hint: str
    N: int

    def to_json(self) -> dict:
        return {"lambda_full": self.lambda_full, "lambda_subgraph": self.lambda_subgraph,
                "subgraph_equal": self.subgraph_equal, "self_embedding": self.self_embedding,
                "hint": self.hint, "N": self.N}


def salama_test(M: CountableMatrix, N: int = 200, tol: float = DEFAULT_TOL) -> SalamaReport:
    """Entropy of the subgraph without the base vertex, and the self-embedding probe."""
    n = min(N, M.index_set.size) if M.index_set.finite else N
    F = truncate(M, n).entries
    full = radius_bracket(F).estimate
    sub = radius_bracket(F[1:, 1:]).estimate if n > 1 else 0.0
    equal = abs(full - sub) <= tol * max(full, 1e-300)
    embed = None
    if M.index_set.kind == "n" and not M.index_set.finite and isinstance(M.tail_rule, UpperHull):
        embed = drop_first(M) == M
    if embed:
        hint = "transient_certified"
    elif equal:
        hint = "not_strongly_recurrent"
    else:
        hint = "strongly_recurrent"
    return SalamaReport(full, sub, equal, embed, hint, n)


def classify(M: CountableMatrix, j: Optional[int] = None, N: int = 400,
             tol: float = DEFAULT_TOL) -> VereJonesVerdict:
    """Closed form when the family is recognized, else self-embedding, else numeric."""
    fam = family_of(M)
    if fam is not None:
        try:
            return classify_closed_form(fam)
        except ValueError:
            pass
    if M.index_set.kind == "n" and isinstance(M.tail_rule, UpperHull) and not M.exceptional:
        rep = salama_test(M, min(N, 200), tol)
        if rep.self_embedding:
            spec = perron_value(M, (N // 2, N))
            ev = Evidence(R=1 / spec.lambda_estimate, notes=(
                "deleting row/column 0 reproduces the matrix",))
            return VereJonesVerdict(TRANSIENT, EXACT, ev, spec.lambda_estimate, None, None, "salama")
    return classify_numeric(M, j, N, tol)


@dataclass(frozen=True)
class InvarianceReport:
    before: VereJonesVerdict
    after: VereJonesVerdict
    identical_matrices: bool

    @property
    def agree(self) -> bool:
        return self.before.kind == self.after.kind and self.before.kind is not None

    def to_json(self) -> dict:
        return {"before": self.before.to_json(), "after": self.after.to_json(),
                "identical_matrices": self.identical_matrices, "agree": self.agree}


def partition_invariance_check(mapd, refinement, N: int = 400,
                               tol: float = DEFAULT_TOL) -> InvarianceReport:
    """Classify a Markov map's matrix before and after splitting partition elements.

    ``refinement`` is a sequence of (element index, interior cut points).
    """
    from . import maps

    M0 = maps.transition_matrix(mapd)
    refined = maps.split(mapd, refinement) if refinement else mapd
    M1 = maps.transition_matrix(refined)
    v0 = classify_numeric(M0, None, N, tol, declared=None)
    v1 = classify_numeric(M1, None, N, tol, declared=None)
    return InvarianceReport(v0, v1, M0 == M1)
