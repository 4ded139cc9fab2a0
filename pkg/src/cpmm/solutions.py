"""Nonnegative solutions of M v = lambda v.

The banded solver works from characteristic roots. The truncated solver
closes an N-window with a continuation profile taken from the tail rule
(geometric roots for bands and upper hulls, the row recursion for the
row-formula families) and extracts the null vector of the scaled system.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .graphcore import (Affine, Banded, CountableMatrix, Patched, RowFormula, UpperHull,
                        truncate, window_matrix)
from .paths import first_entrance
from .spectral import radius_bracket, series_eval

YES, NO, UNKNOWN = "yes", "no", "unknown"


@dataclass(frozen=True)
class LambdaSolution:
    lam: float
    lo: int
    prefix: tuple
    tail_model: dict
    summable: str
    residual_sup: float
    notes: tuple = ()
    value_fn: Optional[Callable[[int], float]] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if any(not x > 0 for x in self.prefix):
            raise ValueError("lambda-solutions are positive on their window")

    @property
    def hi(self) -> int:
        return self.lo + len(self.prefix) - 1

    def value(self, j: int) -> float:
        if self.lo <= j <= self.hi:
            return self.prefix[j - self.lo]
        if self.value_fn is None:
            raise ValueError(f"index {j} outside the solution window and no tail model")
        return self.value_fn(j)

    def scaled(self, c: float) -> "LambdaSolution":
        if not c > 0:
            raise ValueError("scale must be positive")
        fn = self.value_fn
        return LambdaSolution(self.lam, self.lo, tuple(c * x for x in self.prefix), self.tail_model,
                              self.summable, self.residual_sup, self.notes,
                              None if fn is None else (lambda j: c * fn(j)))

    def to_json(self, limit: int = 64) -> dict:
        return {"lambda": self.lam, "lo": self.lo, "prefix": list(self.prefix[:limit]),
                "window": [self.lo, self.hi], "tail_model": self.tail_model,
                "summable": self.summable, "residual_sup": self.residual_sup,
                "notes": list(self.notes)}


# --------------------------------------------------------------------------
# banded recurrences a x_{n-1} + b x_{n+1} = lam x_n


def banded_roots(a: float, b: float, lam: float) -> tuple[float, float]:
    """Roots of b t^2 - lam t + a = 0 (larger first); requires lam >= 2 sqrt(ab)."""
    disc = lam * lam - 4 * a * b
    if -1e-12 * lam * lam <= disc < 0:
        disc = 0.0  # rounding at the double root lam = 2 sqrt(ab)
    if disc < 0:
        raise ValueError("complex characteristic roots")
    s = math.sqrt(disc)
    return (lam + s) / (2 * b), (lam - s) / (2 * b)


def solve_banded(a: int, b: int, lam: float, side: str = "two-sided", c: Optional[int] = None,
                 mix: tuple = (0.5, 0.5), window: int = 64) -> Optional[LambdaSolution]:
    """Explicit solution of a x_{n-1} + b x_{n+1} = lam x_n.

    Two-sided: x_n = A p^n + B q^n with the weights ``mix`` (x_0 = A + B = 1 after
    scaling; a double root gives x_n = p^n). One-sided: x_0 = 1 and x_1 = lam/c.
    Returns None when no positive solution exists.
    """
    if a < 1 or b < 1:
        raise ValueError("a and b must be >= 1")
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if side not in ("two-sided", "one-sided"):
        raise ValueError(f"unknown side {side!r}")
    if side == "one-sided" and (c is None or c < 1):
        raise ValueError("one-sided solutions need the boundary entry c >= 1")
    edge = 2 * math.sqrt(a * b)
    if lam < edge * (1 - 1e-14):
        return None
    lam_eff = max(lam, edge)
    p, q = banded_roots(a, b, lam_eff)
    double = abs(p - q) <= 1e-9 * p
    notes = []
    if side == "two-sided":
        A, B = (float(m) for m in mix)
        if A < 0 or B < 0 or A + B == 0:
            raise ValueError("mix weights must be nonnegative and not both zero")
        if double:
            A, B, q = A + B, 0.0, p
            fn = (lambda n: A * p ** n)
            model = {"kind": "root_mix", "roots": [p], "weights": [A], "double": True,
                     "two_sided": True}
        else:
            fn = (lambda n: A * p ** n + B * q ** n)
            model = {"kind": "root_mix", "roots": [p, q], "weights": [A, B], "double": False,
                     "two_sided": True}
        if abs(p - 1) < 1e-12 and (double or B == 0):
            model["kind"] = "constant"
        summable = NO
        notes.append("two-sided: one of the two tails does not decay")
        lo, hi = -window, window
    else:
        x1 = lam / c
        if double:
            B = x1 / p - 1
            if B < -1e-12:
                return None
            B = max(B, 0.0)
            fn = (lambda n: (1 + B * n) * p ** n)
            model = {"kind": "root_mix", "roots": [p], "weights": [1.0, B], "double": True}
            summable = YES if p < 1 else NO
        else:
            A = (x1 - q) / (p - q)
            B = 1 - A
            if A < -1e-12:
                return None
            if abs(A) <= 1e-12:
                A, B = 0.0, 1.0
            fn = (lambda n: A * p ** n + B * q ** n)
            model = {"kind": "root_mix", "roots": [p, q], "weights": [A, B], "double": False}
            lead = p if A > 0 else q
            summable = YES if lead < 1 else NO
        lo, hi = 0, window
    vals = tuple(fn(n) for n in range(lo, hi + 1))
    if any(not v > 0 for v in vals):
        return None
    res = 0.0
    for n in range(lo + 1, hi):
        res = max(res, abs(a * fn(n - 1) + b * fn(n + 1) - lam * fn(n)) / (lam * fn(n)))
    if side == "one-sided":
        res = max(res, abs(c * fn(1) - lam * fn(0)) / lam)
    return LambdaSolution(lam, lo, vals, model, summable, res, tuple(notes), fn)


# --------------------------------------------------------------------------
# continuation profiles for truncated solves


@dataclass(frozen=True)
class Profile:
    """log d(j): expected size of v_j, exact beyond the window for the tail rule."""

    name: str
    logd: Callable[[int], float]
    ratio: Optional[float]
    info: dict
    double: bool = False

    def weights(self, edge: int, t: int, step: int) -> dict:
        """v at edge + step*t as a combination of v at edge (offset 0) and edge - step (offset 1)."""
        if self.double:
            r = self.ratio
            return {0: r ** t * (1 + t), 1: -t * r ** (t + 1)}
        return {0: math.exp(self.logd(edge + step * t) - self.logd(edge))}


def _poly_roots_in(coefs_by_power: dict, lo: float, hi: float) -> list[tuple]:
    """Real roots in (lo, hi) of sum c_p t^p (p may be negative), with multiplicities."""
    shift = -min(coefs_by_power)
    deg = max(coefs_by_power) + shift
    poly = np.zeros(deg + 1)
    for pw, cf in coefs_by_power.items():
        poly[deg - (pw + shift)] += cf
    out = []
    for r in np.roots(poly):
        # double roots come back as a pair with a small imaginary part
        if abs(r.imag) <= 1e-6 * max(1.0, abs(r.real)) and lo < r.real < hi:
            out.append(float(r.real))
    merged: list = []
    for x in sorted(out):
        if merged and abs(x - merged[-1][-1]) <= 1e-6 * max(1.0, abs(x)):
            merged[-1].append(x)
        else:
            merged.append([x])
    return [(sum(c) / len(c), len(c)) for c in merged]


def _geometric(rho: float, name: str, info: dict, mult: int = 1) -> Profile:
    lr = math.log(rho)
    if mult >= 2:
        # double root: v_j = (A + B j) rho^j
        return Profile(name + " (double)", lambda j: math.log1p(abs(j)) + j * lr, rho,
                       dict(info, double=True), True)
    return Profile(name, lambda j: j * lr, rho, info)


def _profiles(rule, kind: str, lam: float) -> list:
    """Candidate continuation profiles of a tail rule at lam."""
    if isinstance(rule, Affine):
        return _profiles(rule.inner, kind, (lam - rule.l) / rule.k)
    if isinstance(rule, Banded):
        coef = {d: float(c) for d, c in rule.stencil}
        coef[0] = coef.get(0, 0.0) - lam
        if len(coef) < 2:
            return []
        roots = _poly_roots_in(coef, 0.0, math.inf)
        if kind == "z":
            return [(_geometric(r, f"root {r:.12g}", {"root": r}), _geometric(s, f"root {s:.12g}", {"root": s}))
                    for r, _ in roots for s, _ in roots]
        return [_geometric(r, f"root {r:.12g}", {"kind": "root_mix", "root": r}, m) for r, m in roots]
    if isinstance(rule, UpperHull):
        # lam = sum_d lower_d t^d + upper/(1 - t) for t in (0, 1)
        low = dict(rule.lower)
        poly = {}
        # multiply by (1 - t): sum lower_d (t^d - t^(d+1)) + upper - lam (1 - t)
        for d, c in low.items():
            poly[d] = poly.get(d, 0.0) + c
            poly[d + 1] = poly.get(d + 1, 0.0) - c
        poly[0] = poly.get(0, 0.0) + rule.upper - lam
        poly[1] = poly.get(1, 0.0) + lam
        roots = _poly_roots_in(poly, 0.0, 1.0)
        return [_geometric(r, f"root {r:.12g}", {"kind": "root_mix", "root": r}, m) for r, m in roots]
    if isinstance(rule, RowFormula):
        if rule.name == "ruette":
            return [_geometric(1 / lam, "row recursion v_n = v_(n-1)/lambda",
                               {"kind": "declared", "ratio": 1 / lam})]
        a = rule.a
        cache = [0.0]

        def logd(j, a=a, cache=cache):
            while len(cache) <= j:
                m = len(cache)
                am = a(m)
                cache.append(cache[-1] + (math.log(am) if am else -math.inf) - math.log(lam))
            return cache[j]

        return [Profile("row recursion v_n = a_n v_(n-1)/lambda", logd, None,
                        {"kind": "declared", "rule": "v_n = a_n v_(n-1) / lambda"})]
    if isinstance(rule, Patched):
        def through(prof):
            # beyond the patched zone one step of the inner recursion per index
            def logd(j, prof=prof):
                return prof.logd(rule.to_base(j))

            return Profile(prof.name + " (patched)", logd, prof.ratio, prof.info, prof.double)

        return [tuple(through(p) for p in prof) if isinstance(prof, tuple) else through(prof)
                for prof in _profiles(rule.inner, kind, lam)]
    return []


def _tail_sums(M: CountableMatrix, rows: Sequence[int], edge: int, prof: Profile, step: int,
               cap: int = 200000) -> Optional[dict]:
    """Closure coefficients for indices beyond ``edge`` (step = +1 right, -1 left).

    Returns {row: {offset: coef}}: sum_{j beyond edge} m_ij v_j expressed through
    v at edge (offset 0) and edge - step (offset 1).
    """
    out = {}
    for i in rows:
        acc: dict = {}
        sup = M.row_support(i)
        if sup is not None:
            for j in sup:
                t = (j - edge) * step
                if t > 0:
                    v = M.entry(i, j)
                    if v:
                        for o, w in prof.weights(edge, t, step).items():
                            acc[o] = acc.get(o, 0.0) + v * w
        else:
            t, small, top = 1, 0, 0.0
            while True:
                v = M.entry(i, edge + step * t)
                if v:
                    ws = prof.weights(edge, t, step)
                    size = 0.0
                    for o, w in ws.items():
                        acc[o] = acc.get(o, 0.0) + v * w
                        size = max(size, abs(v * w))
                else:
                    size = 0.0
                top = max(top, size)
                small = small + 1 if size <= 1e-18 * max(top, 1e-300) else 0
                if small >= 40:
                    break
                t += 1
                if t > cap:
                    return None
        if any(not math.isfinite(x) for x in acc.values()):
            return None
        if acc:
            out[i] = acc
    return out


def _window(M: CountableMatrix, N: int) -> tuple[int, int]:
    if M.index_set.finite:
        return 0, M.index_set.size - 1
    if M.index_set.kind == "n":
        return 0, N - 1
    return -(N // 2), N // 2


@dataclass(frozen=True)
class SolveDiagnostics:
    lam: float
    lambda_lower: float
    candidates: tuple
    reason: str


def solve_truncated(M: CountableMatrix, lam: float, N: int = 200, tol: float = 1e-8,
                    fvector_check: bool = False, diagnostics: Optional[list] = None
                    ) -> Optional[LambdaSolution]:
    """Positive solution of (M v)_i = lam v_i on an N-window, closed by the tail rule.

    Returns None when lam is below the certified lower bound for the Perron
    value, when no continuation profile yields a positive solution with
    relative residual below ``tol``, or when the last quarter of the window
    does not follow the continuation within 1%. Reasons are appended to
    ``diagnostics`` when a list is given.
    """
    lo, hi = _window(M, N)
    n = hi - lo + 1
    F = truncate(M, n) if M.index_set.kind == "n" else None
    A = (np.asarray(F.entries, dtype=float) if F is not None else window_matrix(M, lo, hi))
    lower = radius_bracket(A).lower

    def fail(reason, cands=()):
        if diagnostics is not None:
            diagnostics.append(SolveDiagnostics(lam, lower, tuple(cands), reason))
        return None

    if lam < lower * (1 - 1e-12):
        return fail(f"lambda below the certified lower bound {lower:.12g}")
    kind = M.index_set.kind
    if M.index_set.finite:
        profs = [Profile("finite", lambda j: 0.0, None, {"kind": "finite"})]
    else:
        profs = _profiles(M.tail_rule, kind, lam)
    if not profs:
        return fail("no real continuation profile at this lambda")
    results = []
    for prof in profs:
        r = _solve_with(M, A, lo, hi, lam, prof)
        results.append(r)
    tried = [(r["name"], r["residual"], r["positive"], r.get("tail_ok")) for r in results]
    good = [r for r in results if r["positive"] and r["residual"] < tol and r.get("tail_ok", True)]
    if not good:
        why = "no positive solution with small residual"
        if any(r["positive"] and r["residual"] < tol for r in results):
            why = "window end does not follow the continuation profile"
        return fail(why, tried)
    good.sort(key=lambda r: (r["ratio"] if r["ratio"] is not None else 0.0))
    best = good[0]
    notes = list(best["notes"])
    if len(good) > 1:
        notes.append("several continuation profiles fit: solution not unique, minimal tail returned")
    sol = LambdaSolution(lam, lo, tuple(best["v"]), best["model"], best["summable"],
                         best["residual"], tuple(notes), best["fn"])
    if fvector_check:
        dev = fvector_deviation(M, sol)
        sol = LambdaSolution(sol.lam, sol.lo, sol.prefix, dict(sol.tail_model, fvector_max_dev=dev),
                             sol.summable, sol.residual_sup, sol.notes, sol.value_fn)
    return sol


def _solve_with(M, A, lo, hi, lam, prof) -> dict:
    n = hi - lo + 1
    two = isinstance(prof, tuple)
    right = prof[0] if two else prof
    left = prof[1] if two else None
    idx = list(range(lo, hi + 1))

    def logd(j):
        if left is not None and j < 0:
            return left.logd(j)
        return right.logd(j)

    B = A.copy()
    finite = M.index_set.finite
    ok = True
    if not finite:
        rows = idx
        cr = _tail_sums(M, rows, hi, right, +1)
        if cr is None:
            ok = False
        else:
            for i, cs in cr.items():
                for o, c in cs.items():
                    B[i - lo, n - 1 - o] += c
        if left is not None:
            cl = _tail_sums(M, rows, lo, left, -1)
            if cl is None:
                ok = False
            else:
                for i, cs in cl.items():
                    for o, c in cs.items():
                        B[i - lo, o] += c
    name = right.name if not two else f"right {right.name}, left {left.name}"
    ratio = right.ratio
    if not ok:
        return {"name": name, "residual": math.inf, "positive": False, "ratio": ratio}
    ld = np.array([logd(j) for j in idx])
    if not np.all(np.isfinite(ld)):
        return {"name": name, "residual": math.inf, "positive": False, "ratio": ratio}
    # scaled system: S_ij = B_ij d_j / d_i - lam delta_ij acts on u = v / d
    S = B * np.exp(ld[None, :] - ld[:, None]) - lam * np.eye(n)
    _, sv, vt = np.linalg.svd(S)
    u = vt[-1]
    if u[np.argmax(np.abs(u))] < 0:
        u = -u
    positive = bool(np.all(u > 0))
    # residual on the rows away from the closure; the boundary quarter is
    # judged by the tail-consistency test instead
    q = max(2, n // 4)
    rows = slice(0, n) if finite else slice(q if left is not None else 0, n - q)
    Su = (S @ u)[rows]
    scale = np.maximum(np.abs(u[rows]), 1e-300)
    residual = float(np.max(np.abs(Su) / (lam * scale))) if positive else math.inf
    out = {"name": name, "residual": residual, "positive": positive, "ratio": ratio}
    if not positive:
        return out
    logv = np.log(u) + ld
    base_pos = -lo if lo <= 0 <= hi else 0
    logv -= logv[base_pos]
    v = np.exp(logv)
    # tail consistency: last quarter ratios against the profile
    tail_ok = True
    if not finite:
        obs = logv[-q + 1:] - logv[-q:-1]
        exp_ = ld[-q + 1:] - ld[-q:-1]
        tail_ok = bool(np.all(np.abs(np.expm1(obs - exp_)) <= 0.01))
        if left is not None:
            obs = logv[1:q] - logv[:q - 1]
            exp_ = ld[1:q] - ld[:q - 1]
            tail_ok = tail_ok and bool(np.all(np.abs(np.expm1(obs - exp_)) <= 0.01))
    last_log = float(logv[-1])
    first_log = float(logv[0])
    prev_log = float(logv[-2]) if n > 1 else last_log
    edge_r = right.logd(hi)

    def fn(j, last_log=last_log, first_log=first_log):
        if j > hi:
            if right.double:
                w = right.weights(hi, j - hi, 1)
                return w[0] * math.exp(last_log) + w[1] * math.exp(prev_log)
            return math.exp(last_log + right.logd(j) - edge_r)
        if j < lo and left is not None:
            return math.exp(first_log + left.logd(j) - left.logd(lo))
        raise ValueError(f"index {j} outside the window and its continuation")

    if finite:
        summable, model = YES, {"kind": "finite"}
    else:
        model = dict(right.info)
        model.setdefault("kind", "root_mix")
        if two:
            model = {"kind": "root_mix", "right": right.info, "left": left.info}
        summable = _profile_summability(M, right, hi, left, lo)
    return dict(out, v=v.tolist(), tail_ok=tail_ok, fn=fn, model=model, summable=summable,
                notes=(f"continuation: {name}",))


def _profile_summability(M, right, hi, left, lo) -> str:
    if left is not None:
        lr = left.ratio
        if lr is None or lr <= 1:
            return NO
    if right.ratio is not None:
        return YES if right.ratio < 1 else NO
    # declared recursion: sum exp(logd(j) - logd(hi)) for j > hi
    base = right.logd(hi)
    s, j, small = 0.0, hi + 1, 0
    while j < hi + 200000:
        ld = right.logd(j)
        t = math.exp(ld - base) if ld > -math.inf else 0.0
        s += t
        small = small + 1 if t <= 1e-18 * max(s, 1e-300) else 0
        if small >= 40:
            return YES
        j += 1
    return UNKNOWN


def fvector_deviation(M: CountableMatrix, sol: LambdaSolution, count: int = 6, N: int = 200) -> float:
    """max_i |v_i / v_base - F_(i,base)(1/lam)| over the first enumerated indices."""
    base = M.index_set.enumerate(0)
    R = 1 / sol.lam
    vb = sol.value(base)
    dev = 0.0
    for k in range(count):
        try:
            i = M.index_set.enumerate(k)
        except ValueError:
            break
        f = first_entrance(M, i, base, N) if i != base else None
        Fi = 1.0 if f is None else series_eval(f, R, "geometric").upper
        dev = max(dev, abs(sol.value(i) / vb - Fi) / max(Fi, 1e-300))
    return dev


# --------------------------------------------------------------------------
# verification


@dataclass(frozen=True)
class VerifyReport:
    passed: bool
    positive: bool
    residual_sup: float
    summable_claim: str
    summable_check: str
    window: tuple
    notes: tuple = ()

    def to_json(self) -> dict:
        return {"passed": self.passed, "positive": self.positive, "residual_sup": self.residual_sup,
                "summable_claim": self.summable_claim, "summable_check": self.summable_check,
                "window": list(self.window), "notes": list(self.notes)}


def _value(v, j):
    if isinstance(v, LambdaSolution):
        return v.value(j)
    return float(v(j))


def _row_product(M: CountableMatrix, i: int, v, cap: int = 200000) -> float:
    sup = M.row_support(i)
    if sup is not None:
        return math.fsum(M.entry(i, j) * _value(v, j) for j in sup)
    if M.index_set.kind != "n":
        raise ValueError("infinite rows are supported on one-sided index sets only")
    terms, j, small, top = [], 0, 0, 0.0
    while j < cap:
        m = M.entry(i, j)
        t = m * _value(v, j) if m else 0.0
        terms.append(t)
        top = max(top, t)
        if j > i + 8:
            small = small + 1 if t <= 1e-18 * top else 0
            if small >= 64:
                break
        j += 1
    return math.fsum(terms)


def verify_solution(M: CountableMatrix, v: LambdaSolution, window: Optional[Sequence[int]] = None,
                    tol: float = 1e-8) -> VerifyReport:
    """Recompute (M v)_i - lam v_i on a window, independently of the solver."""
    if window is None:
        lo, hi = v.lo, v.hi
        if M.index_set.finite:
            window = range(lo, hi + 1)
        else:
            window = range(lo + (1 if M.index_set.kind == "z" else 0), hi)
    window = [i for i in window if M.index_set.contains(i)]
    lam = v.lam
    positive = True
    res = 0.0
    for i in window:
        vi = _value(v, i)
        if not vi > 0:
            positive = False
            continue
        r = abs(_row_product(M, i, v) - lam * vi) / (lam * vi)
        res = max(res, r)
    check = summability(v).verdict
    consistent = v.summable == UNKNOWN or check == UNKNOWN or check == v.summable
    notes = () if consistent else ("summability claim disagrees with the tail check",)
    passed = positive and res < tol and consistent
    return VerifyReport(passed, positive, res, v.summable, check,
                        (min(window), max(window)) if window else (), notes)


@dataclass(frozen=True)
class SubinvariantReport:
    passed: bool
    max_excess: float
    equality: bool
    window: tuple


def subinvariant_check(M: CountableMatrix, v, lam: float, window: Sequence[int],
                       rtol: float = 1e-12) -> SubinvariantReport:
    """(M v)_i <= lam v_i on the window; ``v`` is a LambdaSolution or a callable."""
    worst, eq = -math.inf, True
    for i in window:
        vi = _value(v, i)
        mv = _row_product(M, i, v)
        excess = (mv - lam * vi) / (lam * vi)
        worst = max(worst, excess)
        eq = eq and abs(excess) <= rtol
    return SubinvariantReport(worst <= rtol, worst, eq, (min(window), max(window)))


# --------------------------------------------------------------------------
# summability


@dataclass(frozen=True)
class Summability:
    verdict: str
    partial_sum: float
    tail_bound: Optional[float]
    ratio: Optional[float]
    note: str = ""

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "partial_sum": self.partial_sum,
                "tail_bound": self.tail_bound, "ratio": self.ratio, "note": self.note}


def summability(v: LambdaSolution, interior=None) -> Summability:
    """Three-valued summability of a solution.

    ``interior`` = (eps, elements_inside) restricts the sum to the partition
    elements inside (eps, 1 - eps); ``elements_inside(eps)`` returns the list
    of those indices, or None when there are infinitely many.
    """
    if interior is not None:
        eps, inside = interior
        idx = inside(eps)
        if idx is None:
            return Summability(UNKNOWN, math.nan, None, None, "infinitely many interior elements")
        s = math.fsum(v.value(i) for i in idx)
        return Summability(YES, s, 0.0, None, f"{len(idx)} elements inside ({eps}, {1 - eps})")
    partial = math.fsum(v.prefix)
    model = v.tail_model
    kind = model.get("kind")
    if kind == "finite":
        return Summability(YES, partial, 0.0, None, "finite index set")
    if kind == "constant":
        return Summability(NO, partial, math.inf, 1.0, "constant tail")
    roots = _decay_ratios(model)
    if roots is not None:
        rmax = max(roots)
        if rmax >= 1:
            return Summability(NO, partial, math.inf, rmax, "a tail ratio is >= 1")
        edge = v.prefix[-1]
        tail = edge * rmax / (1 - rmax)
        if v.lo < 0:
            tail += v.prefix[0] * rmax / (1 - rmax)
        return Summability(YES, partial, tail, rmax, "geometric tail")
    if v.value_fn is not None:
        s, j, small = 0.0, v.hi + 1, 0
        while j < v.hi + 200000:
            t = v.value_fn(j)
            s += t
            small = small + 1 if t <= 1e-18 * max(partial, 1e-300) else 0
            if small >= 40:
                return Summability(YES, partial, s, None, "declared continuation summed")
            j += 1
    return Summability(UNKNOWN, partial, None, None, "no usable tail model")


def _decay_ratios(model: dict) -> Optional[list]:
    """Ratios v_(j+1)/v_j of every side's tail, or None when not geometric."""
    if "right" in model:
        r = model["right"].get("root")
        l = model["left"].get("root")
        if r is None or l is None:
            return None
        return [r, 1 / l]
    if "roots" in model:
        w = model.get("weights")
        if model.get("double"):
            p = model["roots"][0]
            return [p, 1 / p] if model.get("two_sided") else [p]
        roots = [r for r, x in zip(model["roots"], w) if x > 0]
        # two-sided mixes: one root governs each side
        if model.get("two_sided"):
            return [max(roots), 1 / min(roots)]
        return [max(roots)]
    if "root" in model:
        return [model["root"]]
    if "ratio" in model:
        return [model["ratio"]]
    return None


# --------------------------------------------------------------------------
# explicit solutions


def bt12_lengths(lam, K: int) -> list:
    """w_0..w_K from w_(k+1) = w_k - w_(k-1)/lam, w_0 = 1, w_1 = 1 - 1/lam (exact for rational lam)."""
    lam = Fraction(lam) if isinstance(lam, (int, Fraction)) else lam
    w = [1 + 0 * lam, 1 - 1 / lam]
    while len(w) <= K:
        w.append(w[-1] - w[-2] / lam)
    return w[:K + 1]


def bt12_solution(lam: float, window: int = 64) -> LambdaSolution:
    """v_k = w_k - w_(k+1) (0-based), the interval lengths of the constant-slope model."""
    if lam < 4:
        raise ValueError("positive solutions need lambda >= 4")
    lam = float(lam)
    s = math.sqrt(max(lam * lam - 4 * lam, 0.0)) / lam     # sqrt(1 - 4/lam)
    p, q = (1 + s) / 2, (1 - s) / 2
    if s < 1e-12:
        def w(k):
            return 2.0 ** -k * (1 + k / 2)
        model = {"kind": "root_mix", "roots": [0.5], "weights": [1.0, 0.5], "double": True}
    else:
        A = (1 - 2 / lam + s) / (2 * s)
        B = (s - 1 + 2 / lam) / (2 * s)

        def w(k):
            return A * p ** k + B * q ** k
        model = {"kind": "root_mix", "roots": [p, q], "weights": [A, B], "double": False}

    def fn(k):
        return w(k) - w(k + 1)

    vals = tuple(fn(k) for k in range(window + 1))
    return LambdaSolution(lam, 0, vals, model, YES, 0.0, ("closed form",), fn)


def perron_solution(M: CountableMatrix, lam: float, N: int = 200, tol: float = 1e-8):
    """solve_truncated at lam, with the banded closed form where it applies."""
    rule = M.tail_rule
    if isinstance(rule, Banded) and not M.exceptional and M.index_set.kind == "z":
        coef = rule.coef
        if set(coef) <= {-1, 0, 1} and -1 in coef and 1 in coef:
            sol = solve_banded(coef[-1], coef[1], lam - coef.get(0, 0))
            return None if sol is None else replace(sol, lam=lam)
    return solve_truncated(M, lam, N, tol)
