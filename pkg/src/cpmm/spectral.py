"""Perron values of truncations, growth rates and guarded power series."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import spsolve

from .graphcore import CountableMatrix, FiniteMatrix, truncate
from .paths import CoeffTable

DEFAULT_SCHEDULE = (25, 50, 100, 200, 400)


class ConvergenceError(RuntimeError):
    def __init__(self, msg, last_two):
        super().__init__(f"{msg}; last two quotients {last_two}")
        self.last_two = last_two


class UndefinedGrowth(ValueError):
    pass


# --------------------------------------------------------------------------
# finite spectral radius


@dataclass(frozen=True)
class RadiusBracket:
    lower: float
    upper: float
    estimate: float
    vector: np.ndarray = field(repr=False, compare=False)
    iterations: int = 0


def _as_operator(F):
    A = F.entries if isinstance(F, FiniteMatrix) else np.asarray(F)
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    if n > 64 and np.count_nonzero(A) < 0.1 * n * n:
        return sp.csr_matrix(A), True
    return A, False


def _cw(A, x):
    y = A @ x
    pos = x > 0
    lo = float(np.min(y[pos] / x[pos])) if pos.any() else 0.0
    hi = float(np.max(y / x)) if pos.all() else math.inf
    return lo, hi, y


def radius_bracket(F, tol: float = 1e-12, max_iter: int = 200) -> RadiusBracket:
    """Collatz-Wielandt bracket [lower, upper] around r(F).

    Iterates x <- (s I - F)^{-1} x with s the current upper bound, a shifted
    inverse power iteration that keeps x positive; falls back to plain power
    iteration on F + I when a solve breaks down. Both bounds are valid for
    every positive iterate.
    """
    A, sparse = _as_operator(F)
    n = A.shape[0]
    ncomp, labels = connected_components(sp.csr_matrix(A), directed=True, connection="strong")
    if ncomp > 1:
        return _blockwise(A, sparse, ncomp, labels, tol, max_iter)
    x = np.ones(n)
    lo, hi, y = _cw(A, x)
    if hi == 0:
        return RadiusBracket(0.0, 0.0, 0.0, x, 0)
    best_lo, best_hi = lo, hi
    history = [hi]
    eye = sp.identity(n, format="csr") if sparse else np.eye(n)
    it = 0
    for it in range(1, max_iter + 1):
        if best_hi - best_lo <= tol * best_hi:
            break
        shift = best_hi * (1 + 1e-15) + 1e-300
        try:
            if sparse:
                z = spsolve((shift * eye - A).tocsc(), x)
            else:
                z = np.linalg.solve(shift * eye - A, x)
        except Exception:
            z = None
        if z is None or not np.all(np.isfinite(z)) or np.max(np.abs(z)) == 0:
            break
        z = np.abs(z)
        z /= np.max(z)
        if not np.all(z > 0):
            # components lost to underflow: polish with a power step
            z = (A @ z + z)
            z /= np.max(z)
            if not np.all(z > 0):
                break
        x = z
        lo, hi, y = _cw(A, x)
        best_lo, best_hi = max(best_lo, lo), min(best_hi, hi)
        history.append(0.5 * (lo + hi))
    if best_hi - best_lo > tol * best_hi:
        best_lo, best_hi, x, it = _power(A, x, best_lo, best_hi, tol, history)
    return RadiusBracket(best_lo, best_hi, 0.5 * (best_lo + best_hi), x, it)


def _blockwise(A, sparse, ncomp, labels, tol, max_iter) -> RadiusBracket:
    """r(F) is the largest radius over the strongly connected blocks."""
    best = RadiusBracket(0.0, 0.0, 0.0, np.zeros(A.shape[0]), 0)
    for c in range(ncomp):
        idx = np.flatnonzero(labels == c)
        block = A[idx][:, idx]
        block = block.toarray() if sparse else block
        if not block.any():
            continue
        br = radius_bracket(block, tol, max_iter)
        if br.estimate > best.estimate:
            x = np.zeros(A.shape[0])
            x[idx] = br.vector
            best = RadiusBracket(br.lower, br.upper, br.estimate, x, br.iterations)
    return best


def _power(A, x, best_lo, best_hi, tol, history, max_iter=400000):
    x = x.copy()
    for it in range(max_iter):
        z = A @ x + x
        z /= np.max(z)
        x = z
        if it % 16 == 0:
            lo, hi, _ = _cw(A, x)
            best_lo, best_hi = max(best_lo, lo), min(best_hi, hi)
            history.append(0.5 * (lo + hi))
            if best_hi - best_lo <= tol * best_hi:
                return best_lo, best_hi, x, it
    raise ConvergenceError("power iteration did not converge", tuple(history[-2:]))


def finite_spectral_radius(F, tol: float = 1e-9) -> float:
    """Spectral radius of a finite nonnegative matrix to relative tolerance tol."""
    return radius_bracket(F, tol).estimate


# --------------------------------------------------------------------------
# Perron value along a truncation schedule


@dataclass(frozen=True)
class SpectralSummary:
    lambda_lower: float
    lambda_estimate: float
    schedule: tuple
    converged: bool
    tol: float
    closed_form: Optional[float] = None

    @property
    def R_estimate(self) -> float:
        return 1.0 / self.lambda_estimate if self.lambda_estimate else math.inf

    @property
    def entropy(self) -> float:
        return math.log(self.lambda_estimate) if self.lambda_estimate > 0 else -math.inf

    def to_json(self) -> dict:
        out = {"lambda_lower": self.lambda_lower, "lambda_estimate": self.lambda_estimate,
               "R_estimate": self.R_estimate, "converged": self.converged, "tol": self.tol,
               "schedule": [[N, r] for N, r in self.schedule]}
        if self.closed_form is not None:
            out["closed_form"] = self.closed_form
        return out


def perron_value(M: CountableMatrix, schedule: Sequence[int] = DEFAULT_SCHEDULE,
                 tol: float = 1e-3, closed_form: Optional[float] = None) -> SpectralSummary:
    """Spectral radii of truncations along an increasing schedule."""
    schedule = list(schedule)
    if any(b <= a for a, b in zip(schedule, schedule[1:])) or not schedule or schedule[0] < 1:
        raise ValueError("schedule must be a strictly increasing list of positive sizes")
    rows = []
    lower = 0.0
    for N in schedule:
        br = radius_bracket(truncate(M, N), tol=1e-12)
        lower = max(lower, br.lower)
        rows.append((N, br.estimate))
    est = max(rows[-1][1], lower)
    converged = len(rows) >= 2 and abs(rows[-1][1] - rows[-2][1]) < tol * max(1.0, abs(est))
    return SpectralSummary(lower, est, tuple(rows), converged, tol, closed_form)


# --------------------------------------------------------------------------
# growth rates and series


def _log_terms(values: Sequence[int]):
    return [(n, math.log(c)) for n, c in enumerate(values) if c > 0]


def growth_rate(c: Union[CoeffTable, Sequence[int]], fit_window: Optional[tuple] = None) -> float:
    """Estimate limsup c(n)^(1/n).

    Regresses log c(n) on (1, n, log n) over the nonzero entries of the fit
    window (default: last half of the table). Only nonzero entries enter the
    fit, which handles periodic tables. The log n column absorbs polynomial
    prefactors such as n^(-3/2) in first-return counts.
    """
    values = list(c.values if isinstance(c, CoeffTable) else c)
    N = len(values) - 1
    lo, hi = fit_window if fit_window else (max(1, N // 2), N)
    if hi > N:
        raise ValueError(f"fit window end {hi} exceeds table horizon {N}")
    pts = [(n, lc) for n, lc in _log_terms(values) if lo <= n <= hi and n >= 1]
    if not pts:
        raise UndefinedGrowth("all coefficients in the fit window vanish")
    if len(pts) == 1:
        n, lc = pts[0]
        return math.exp(lc / n)
    ns = np.array([p[0] for p in pts], dtype=float)
    ys = np.array([p[1] for p in pts])
    if len(pts) < 4:
        X = np.column_stack([np.ones_like(ns), ns])
    else:
        X = np.column_stack([np.ones_like(ns), ns, np.log(ns)])
    coef, *_ = np.linalg.lstsq(X, ys, rcond=None)
    return math.exp(coef[1])


@dataclass(frozen=True)
class SeriesEval:
    value_partial: float
    tail_bound: Optional[float]
    z: float
    terms_used: int
    divergent: bool = False
    note: str = ""

    @property
    def certified(self) -> bool:
        return self.tail_bound is not None and math.isfinite(self.tail_bound)

    @property
    def upper(self) -> float:
        if self.tail_bound is None:
            return math.inf
        return self.value_partial + self.tail_bound

    def to_json(self) -> dict:
        return {"value_partial": self.value_partial, "tail_bound": self.tail_bound, "z": self.z,
                "terms_used": self.terms_used, "divergent": self.divergent, "note": self.note}


TailModel = Union[str, Callable[[int, float], float], None]

RATIO_SAMPLES = 8
RATIO_SPREAD = 0.05
RATIO_MARGIN = 1.1
PARTIAL_SUM_BOUND = 1e3


def _terms(values, z, weight_n=False):
    out = []
    if z == 0:
        return [(0, float(values[0]))] if values and values[0] and not weight_n else []
    lz = math.log(z)
    for n, c in enumerate(values):
        if c <= 0:
            continue
        w = n if weight_n else 1
        if w == 0:
            continue
        out.append((n, math.exp(math.log(c) + math.log(w) + n * lz)))
    return out


def _series(values, z, tail_model, weight_n):
    if z < 0:
        raise ValueError("series are evaluated at z >= 0 only")
    N = len(values) - 1
    terms = _terms(values, z, weight_n)
    partial = math.fsum(t for _, t in terms)
    if z == 0:
        return SeriesEval(partial, 0.0, z, N, False, "z = 0")
    model = tail_model or "none"
    if callable(model):
        tail = float(model(N, z))
        if math.isinf(tail):
            return SeriesEval(partial, math.inf, z, N, True, "declared tail diverges")
        return SeriesEval(partial, tail, z, N, False, "declared tail")
    if model == "none":
        return SeriesEval(partial, None, z, N, False, "no tail model")
    if model != "geometric":
        raise ValueError(f"unknown tail model {model!r}")
    if len(terms) < RATIO_SAMPLES + 1:
        if not terms:
            return SeriesEval(partial, 0.0, z, N, False, "no nonzero terms")
        return SeriesEval(partial, None, z, N, False, "too few nonzero terms for a ratio test")
    last = terms[-(RATIO_SAMPLES + 1):]
    ratios = [b[1] / a[1] for a, b in zip(last, last[1:])]
    rmax, rmin = max(ratios), min(ratios)
    if rmin >= 1:
        return SeriesEval(partial, math.inf, z, N, True, "divergent by ratio")
    if rmax > (1 + RATIO_SPREAD) * rmin:
        note = "ratio samples not settled"
        if rmax >= 1:
            return SeriesEval(partial, math.inf, z, N, True, "divergent by ratio")
        return SeriesEval(partial, None, z, N, False, note)
    rb = RATIO_MARGIN * rmax
    if rb >= 1:
        if rmax >= 1:
            return SeriesEval(partial, math.inf, z, N, True, "divergent by ratio")
        return SeriesEval(partial, None, z, N, False, "ratio within safety margin of 1")
    t = last[-1][1]
    if weight_n:
        # n-weighted terms: ratio already includes the (n+1)/n factor
        pass
    return SeriesEval(partial, t * rb / (1 - rb), z, N, False, "geometric tail")


def series_eval(c: Union[CoeffTable, Sequence[int]], z: float, tail_model: TailModel = "geometric") -> SeriesEval:
    """sum c(n) z^n with an optional tail bound beyond the table horizon."""
    values = list(c.values if isinstance(c, CoeffTable) else c)
    return _series(values, z, tail_model, False)


def derivative_series_eval(c: Union[CoeffTable, Sequence[int]], z: float,
                           tail_model: TailModel = "geometric",
                           bound: float = PARTIAL_SUM_BOUND) -> SeriesEval:
    """sum n c(n) z^n; flags divergence when partial sums pass ``bound``."""
    values = list(c.values if isinstance(c, CoeffTable) else c)
    out = _series(values, z, tail_model, True)
    if not out.divergent and out.value_partial > bound:
        return SeriesEval(out.value_partial, math.inf, z, out.terms_used, True,
                          f"divergent by partial sums (> {bound:g})")
    return out


def partial_sums(c: Union[CoeffTable, Sequence[int]], z: float, weight_n: bool = False) -> list[float]:
    values = list(c.values if isinstance(c, CoeffTable) else c)
    out, run = [], 0.0
    lz = math.log(z) if z > 0 else None
    for n, v in enumerate(values):
        if v > 0 and lz is not None and (n or not weight_n):
            run += math.exp(math.log(v) + (math.log(n) if weight_n else 0.0) + n * lz)
        elif v > 0 and z == 0 and n == 0 and not weight_n:
            run += v
        out.append(run)
    return out
