"""Exact path-count coefficients.

For a matrix M and indices i, j the tables hold, for n = 0..N,

* ``m``      m_ij(n): entries of M^n
* ``f``      f_ij(n): n-paths i -> j that avoid j strictly inside
* ``l``      l_ij(n): n-paths i -> j that avoid i strictly inside
* ``taboo``  _k m_ij(n): n-paths avoiding k strictly inside
* ``through`` ^k m_ij(n): n-paths visiting k strictly inside at least once
* ``gset``   g^P_ij(n): n-paths avoiding every element of P strictly inside

Everything is computed with Python integers by dynamic programming over a
finite window that provably contains every relevant path.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .graphcore import CountableMatrix, FiniteMatrix


class WindowError(RuntimeError):
    """No finite window provably contains all relevant paths."""


class BudgetExceeded(RuntimeError):
    """Brute-force enumeration refused: too many partial paths."""


@dataclass(frozen=True)
class CoeffTable:
    kind: str
    i: int
    j: int
    N: int
    values: tuple
    extra: tuple = ()

    def __getitem__(self, n: int) -> int:
        return self.values[n]

    def __len__(self) -> int:
        return len(self.values)

    def as_list(self) -> list[int]:
        return list(self.values)


# --------------------------------------------------------------------------
# certified windows


def _levels(step, start, N: int) -> Optional[dict]:
    """BFS distances up to N; None if ``step`` reports an infinite support."""
    dist = {start: 0}
    q = deque([start])
    while q:
        u = q.popleft()
        if dist[u] == N:
            continue
        nbrs = step(u)
        if nbrs is None:
            return None
        for v in nbrs:
            if v not in dist:
                dist[v] = dist[u] + 1
                q.append(v)
    return dist


def certified_window(M: CountableMatrix, i: int, j: int, N: int) -> tuple[int, ...]:
    """Indices that can lie on some path i -> j of length <= N.

    Uses forward reachability from i intersected with backward reachability
    to j when both are finite, otherwise whichever side is finite.
    """
    M.index_set.check(i)
    M.index_set.check(j)
    bad = {}

    def rows(u):
        s = M.row_support(u)
        if s is None:
            bad.setdefault("row", u)
        return s

    def cols(v):
        s = M.col_support(v)
        if s is None:
            bad.setdefault("col", v)
        return s

    fwd = _levels(rows, i, N)
    bwd = _levels(cols, j, N)
    if fwd is None and bwd is None:
        raise WindowError(
            f"cannot bound paths {i}->{j}: row {bad['row']} and column {bad['col']} "
            "both have infinite support")
    if fwd is not None and bwd is not None:
        keep = [v for v in fwd if v in bwd and fwd[v] + bwd[v] <= N]
    elif fwd is not None:
        keep = list(fwd)
    else:
        keep = list(bwd)
    keep = set(keep) | {i, j}
    return tuple(sorted(keep))


def _edges(M: CountableMatrix, window: Sequence[int]):
    """Weighted adjacency restricted to the window: list of (u, [(v, w), ...])."""
    W = set(window)
    adj = {u: [] for u in window}
    for v in window:
        s = M.col_support(v)
        if s is None:
            s = window
        for u in s:
            if u in W:
                w = M.entry(u, v)
                if w:
                    adj[u].append((v, w))
    return adj


def _dp(adj, i: int, targets, N: int, taboo=frozenset(), track=None):
    """Path counts from i, zeroing taboo vertices at interior steps.

    Returns {target: [c(0), ..., c(N)]}. With ``track`` = k, counts only paths
    that visit k strictly inside (two-layer DP).
    """
    out = {t: [0] * (N + 1) for t in targets}
    if track is None:
        cur = {i: 1}
        for t in targets:
            out[t][0] = 1 if t == i else 0
        for n in range(1, N + 1):
            nxt: dict = {}
            for u, c in cur.items():
                for v, w in adj.get(u, ()):
                    nxt[v] = nxt.get(v, 0) + c * w
            for t in targets:
                out[t][n] = nxt.get(t, 0)
            for k in taboo:
                nxt.pop(k, None)
            cur = nxt
        return out
    # layer 0: k not yet visited inside; layer 1: visited
    cur0, cur1 = {i: 1}, {}
    for n in range(1, N + 1):
        n0: dict = {}
        n1: dict = {}
        for u, c in cur0.items():
            for v, w in adj.get(u, ()):
                n0[v] = n0.get(v, 0) + c * w
        for u, c in cur1.items():
            for v, w in adj.get(u, ()):
                n1[v] = n1.get(v, 0) + c * w
        for t in targets:
            out[t][n] = n1.get(t, 0)
        # arriving at k at an interior time moves the path to layer 1
        if track in n0:
            n1[track] = n1.get(track, 0) + n0.pop(track)
        cur0, cur1 = n0, n1
    return out


@lru_cache(maxsize=4096)
def _table(M: CountableMatrix, kind: str, i: int, j: int, N: int, extra: tuple) -> CoeffTable:
    if N < 0:
        raise ValueError("horizon must be >= 0")
    window = certified_window(M, i, j, N)
    adj = _edges(M, window)
    if kind == "m":
        vals = _dp(adj, i, [j], N)[j]
    elif kind == "f":
        vals = _dp(adj, i, [j], N, frozenset({j}))[j]
        vals[0] = 0
    elif kind == "l":
        vals = _dp(adj, i, [j], N, frozenset({i}))[j]
        vals[0] = 0
    elif kind == "taboo":
        k = extra[0]
        vals = _dp(adj, i, [j], N, frozenset({k}))[j]
        vals[0] = 1 if (i == j and i != k) else 0
    elif kind == "through":
        vals = _dp(adj, i, [j], N, track=extra[0])[j]
        # complement of the taboo convention at n = 0
        vals[0] = 1 if i == j == extra[0] else 0
    elif kind == "gset":
        vals = _dp(adj, i, [j], N, frozenset(extra))[j]
        vals[0] = 0
    else:
        raise ValueError(f"unknown coefficient kind {kind!r}")
    return CoeffTable(kind, i, j, N, tuple(vals), extra)


def power_counts(M: CountableMatrix, i: int, j: int, N: int) -> CoeffTable:
    return _table(M, "m", i, j, N, ())


def first_entrance(M: CountableMatrix, i: int, j: int, N: int) -> CoeffTable:
    return _table(M, "f", i, j, N, ())


def last_exit(M: CountableMatrix, i: int, j: int, N: int) -> CoeffTable:
    return _table(M, "l", i, j, N, ())


def taboo_counts(M: CountableMatrix, i: int, j: int, k: int, N: int) -> CoeffTable:
    M.index_set.check(k)
    return _table(M, "taboo", i, j, N, (k,))


def through_counts(M: CountableMatrix, i: int, j: int, k: int, N: int) -> CoeffTable:
    """^k m_ij(n): computed directly, not as a difference."""
    M.index_set.check(k)
    return _table(M, "through", i, j, N, (k,))


def gset_counts(M: CountableMatrix, P: Sequence[int], i: int, j: int, N: int) -> CoeffTable:
    P = tuple(sorted(set(P)))
    if j not in P:
        raise ValueError("the target index must belong to the taboo set")
    for p in P:
        M.index_set.check(p)
    return _table(M, "gset", i, j, N, P)


def coeff_table(M: CountableMatrix, kind: str, i: int, j: int, N: int) -> CoeffTable:
    """Dispatch on a kind string: m, f, l, taboo:k, gset:a;b;c."""
    if kind in ("m", "f", "l"):
        return _table(M, kind, i, j, N, ())
    if kind.startswith("taboo:"):
        return taboo_counts(M, i, j, int(kind.split(":", 1)[1]), N)
    if kind.startswith("gset:"):
        items = [int(x) for x in kind.split(":", 1)[1].replace(";", ",").split(",") if x]
        return gset_counts(M, items, i, j, N)
    raise ValueError(f"unknown coefficient kind {kind!r}")


# --------------------------------------------------------------------------
# brute-force oracle


def brute_force_paths(F: FiniteMatrix, i: int, j: int, n: int, mode="m",
                      budget: int = 2_000_000) -> int:
    """Enumerate all n-step vertex sequences i -> j with multiplicity weights.

    ``mode`` is one of ``"m"``, ``"f"``, ``"l"``, ``("taboo", k)``,
    ``("gset", P)``. Raises :class:`BudgetExceeded` instead of truncating.
    """
    A = F.entries.tolist() if isinstance(F, FiniteMatrix) else [list(r) for r in F]
    size = len(A)
    if isinstance(mode, str):
        name, arg = mode, None
    else:
        name, arg = mode
    if name in ("m", "none"):
        forbid = set()
    elif name == "f":
        forbid = {j}
    elif name == "l":
        forbid = {i}
    elif name == "taboo":
        forbid = {arg}
    elif name == "gset":
        forbid = set(arg)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if n == 0:
        if name in ("f", "l", "gset"):
            return 0
        return int(i == j and i not in forbid) if name == "taboo" else int(i == j)
    succ = [[(v, A[u][v]) for v in range(size) if A[u][v]] for u in range(size)]
    visited = 0
    total = 0
    stack = [(i, 0, 1)]
    while stack:
        u, depth, weight = stack.pop()
        visited += 1
        if visited > budget:
            raise BudgetExceeded(f"more than {budget} partial paths for n={n}")
        if depth == n - 1:
            for v, w in succ[u]:
                if v == j:
                    total += weight * w
            continue
        for v, w in succ[u]:
            if v in forbid:
                continue
            stack.append((v, depth + 1, weight * w))
    return total


# --------------------------------------------------------------------------
# identities


@dataclass
class IdentityResult:
    name: str
    passed: bool = True
    checked: int = 0
    first_failure: Optional[dict] = None

    def record(self, ok: bool, **where):
        self.checked += 1
        if not ok and self.passed:
            self.passed = False
            self.first_failure = where


@dataclass
class IdentityReport:
    results: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results.values())

    def summary(self) -> dict:
        return {k: {"passed": r.passed, "checked": r.checked, "first_failure": r.first_failure}
                for k, r in self.results.items()}


def _conv(a, b, n, lo=1, hi=None):
    hi = n if hi is None else hi
    return sum(a[n - s] * b[s] for s in range(lo, hi + 1))


def check_identities(M: CountableMatrix, window: Sequence[int], N: int,
                     pset: Optional[Sequence[int]] = None) -> IdentityReport:
    """Verify the convolution identities exactly for all pairs in ``window``.

    renewal       m_jj(n) = sum_{s=1..n} f_jj(s) m_jj(n-s)              (n >= 1)
    last_exit     m_ik(n) = sum_{s=1..n} m_ii(n-s) l_ik(s)              (n >= 1)
    split         m_ik(n) = _j m_ik(n) + ^j m_ik(n)
    through       ^j m_ik(n) = sum_{s=1..n} m_ij(n-s) l_jk(s)           (i != j;
                  for i = j the last term s = n is dropped)
    decomposition f_ij(n) = g^P_ij(n) + sum_{k in P-j} sum_s g^P_ik(s) f_kj(n-s)
                  for i outside P, j in P
    """
    window = list(window)
    rep = IdentityReport({name: IdentityResult(name) for name in
                          ("renewal", "last_exit", "split", "through", "decomposition")})
    m = {(a, b): power_counts(M, a, b, N) for a in window for b in window}
    f = {(a, b): first_entrance(M, a, b, N) for a in window for b in window}
    l = {(a, b): last_exit(M, a, b, N) for a in window for b in window}
    for jj in window:
        for n in range(1, N + 1):
            lhs = m[jj, jj][n]
            rhs = _conv(m[jj, jj], f[jj, jj], n)
            rep.results["renewal"].record(lhs == rhs, j=jj, n=n, lhs=lhs, rhs=rhs)
    for a in window:
        for k in window:
            for n in range(1, N + 1):
                lhs = m[a, k][n]
                rhs = _conv(m[a, a], l[a, k], n)
                rep.results["last_exit"].record(lhs == rhs, i=a, k=k, n=n, lhs=lhs, rhs=rhs)
    for a in window:
        for k in window:
            for jj in window:
                tab = taboo_counts(M, a, k, jj, N)
                thr = through_counts(M, a, k, jj, N)
                for n in range(0, N + 1):
                    rep.results["split"].record(m[a, k][n] == tab[n] + thr[n],
                                                i=a, j=jj, k=k, n=n)
                for n in range(1, N + 1):
                    hi = n if a != jj else n - 1
                    rhs = _conv(m[a, jj], l[jj, k], n, 1, hi)
                    rep.results["through"].record(thr[n] == rhs, i=a, j=jj, k=k, n=n,
                                                  lhs=thr[n], rhs=rhs)
    if pset is None:
        pset = window[: max(1, len(window) // 2)]
    P = tuple(sorted(set(pset)))
    outside = [x for x in window if x not in P]
    for jj in P:
        g = {(a, k): gset_counts(M, P, a, k, N) for a in outside for k in P}
        fk = {k: first_entrance(M, k, jj, N) for k in P}
        for a in outside:
            fa = first_entrance(M, a, jj, N)
            for n in range(1, N + 1):
                rhs = g[a, jj][n]
                for k in P:
                    if k != jj:
                        rhs += sum(g[a, k][s] * fk[k][n - s] for s in range(1, n))
                rep.results["decomposition"].record(fa[n] == rhs, i=a, j=jj, n=n,
                                                    lhs=fa[n], rhs=rhs)
    return rep


def random_graph(rng: np.random.Generator, max_vertices: int = 8, max_entry: int = 3,
                 density: float = 0.35) -> FiniteMatrix:
    """Sparse random multigraph for oracle tests."""
    n = int(rng.integers(1, max_vertices + 1))
    mask = rng.random((n, n)) < density
    vals = rng.integers(1, max_entry + 1, size=(n, n))
    return FiniteMatrix.from_rows((mask * vals).tolist())
