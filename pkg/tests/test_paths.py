import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cpmm import graphcore as gc
from cpmm import maps
from cpmm import paths
from cpmm import sequences as seq
from cpmm.graphcore import FiniteMatrix

GOLDEN = [[0, 1], [1, 1]]


def catalan(n):
    from math import comb
    return comb(2 * n, n) // (n + 1)


def test_power_counts_examples():
    M = gc.banded_z(1, 1)
    m = paths.power_counts(M, 0, 0, 6)
    assert m[2] == 2 and m[4] == 6 and m[6] == 20
    E = gc.identity()
    assert paths.power_counts(E, 2, 2, 5).as_list() == [1] * 6
    assert paths.power_counts(E, 2, 3, 5).as_list() == [0] * 6
    assert paths.power_counts(gc.tent_matrix(), 0, 0, 4)[2] == 2


def test_first_entrance_examples():
    f = paths.first_entrance(gc.banded_z(1, 1), 0, 0, 12)
    assert f[2] == 2 and f[4] == 2 and f[6] == 4
    # first returns of the simple walk: 2 Catalan(n/2 - 1) at even n
    assert all(f[2 * k] == 2 * catalan(k - 1) for k in range(1, 7))
    assert all(f[2 * k + 1] == 0 for k in range(6))
    assert paths.first_entrance(gc.boundary_n(1, 1, 2), 0, 0, 4)[2] == 2
    assert paths.first_entrance(gc.tent_matrix(), 0, 0, 30).as_list() == [0] + [1] * 30


def test_last_exit_examples():
    assert paths.last_exit(gc.banded_z(1, 1), 0, 1, 3)[1] == 1
    assert paths.last_exit(gc.bosou_factor_matrix(), 0, 1, 3)[1] == 4


def test_taboo_examples():
    M = gc.banded_z(1, 1)
    assert paths.taboo_counts(M, 1, 1, 0, 4)[2] == 1
    for i, j, k in [(0, 0, 0), (0, 0, 1), (1, 2, 1), (2, 2, 3)]:
        assert paths.taboo_counts(M, i, j, k, 3)[0] == (i == j) * (i != k)


@given(st.integers(-3, 3), st.integers(-3, 3), st.integers(-3, 3))
@settings(max_examples=40)
def test_taboo_split(i, j, k):
    M = gc.affine_transform(gc.banded_z(1, 2), 1, 1)
    m = paths.power_counts(M, i, j, 8)
    tab = paths.taboo_counts(M, i, j, k, 8)
    thr = paths.through_counts(M, i, j, k, 8)
    assert all(m[n] == tab[n] + thr[n] for n in range(9))


def test_gset_examples():
    M = gc.banded_z(1, 1)
    g = paths.gset_counts(M, [0, 1], -1, 0, 4)
    assert g[1] == 1 and g[2] == 0
    # P' = {j} reproduces first entrance
    assert paths.gset_counts(M, [0], 3, 0, 10).values == paths.first_entrance(M, 3, 0, 10).values
    # P' = everything on a finite graph: single edges only
    F = gc.finite_matrix([[1, 2], [3, 0]])
    g = paths.gset_counts(F, [0, 1], 0, 1, 5)
    assert g[1] == 2 and all(g[n] == 0 for n in range(2, 6))


def test_brute_force_examples():
    F = FiniteMatrix.from_rows(GOLDEN)
    assert paths.brute_force_paths(F, 1, 1, 3, "none") == 3
    assert paths.brute_force_paths(F, 0, 1, 1) == 1
    T = gc.truncate(gc.banded_z(1, 1), 5)
    assert paths.brute_force_paths(T, 0, 0, 4) == 6


def test_unbudgeted_enumeration_refuses():
    F = FiniteMatrix.from_rows([[3, 3], [3, 3]])
    with pytest.raises(paths.BudgetExceeded):
        paths.brute_force_paths(F, 0, 0, 30, budget=1000)


def _modes(n):
    rng = np.random.default_rng(n)
    k = int(rng.integers(0, n))
    P = sorted(set(rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False).tolist()))
    return k, P


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_oracle_equivalence(seed):
    rng = np.random.default_rng(seed)
    F = paths.random_graph(rng)
    M = F.as_countable()
    n = F.size
    i, j = (int(x) for x in rng.integers(0, n, size=2))
    k, P = _modes(n)
    N = 8
    tables = {"m": paths.power_counts(M, i, j, N), "f": paths.first_entrance(M, i, j, N),
              "l": paths.last_exit(M, i, j, N), ("taboo", k): paths.taboo_counts(M, i, j, k, N)}
    if j in P:
        tables[("gset", tuple(P))] = paths.gset_counts(M, P, i, j, N)
    for mode, t in tables.items():
        for step in range(N + 1):
            assert t[step] == paths.brute_force_paths(F, i, j, step, mode), (mode, step)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_identities_on_random_graphs(seed):
    rng = np.random.default_rng(seed)
    F = paths.random_graph(rng, max_vertices=6)
    n = F.size
    pset = sorted(set(rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False).tolist()))
    rep = paths.check_identities(F.as_countable(), range(n), 8, pset)
    assert rep.passed, rep.summary()


def test_identities_examples():
    assert paths.check_identities(gc.finite_matrix(GOLDEN), [0, 1], 12).passed
    assert paths.check_identities(gc.identity(), [0, 1, 2], 6).passed
    rep = paths.check_identities(gc.boundary_n(1, 1, 3), [0, 1, 2], 10)
    assert rep.results["last_exit"].passed and rep.passed


def test_monotone_truncation():
    for M in (gc.banded_z(1, 2), gc.tent_matrix(seq.a_ell(2)), gc.bt12_matrix()):
        short = paths.first_entrance(M, 0, 0, 10).values
        long = paths.first_entrance(M, 0, 0, 18).values
        assert long[:11] == short


@pytest.mark.parametrize("k", [1, 2, 3])
def test_window_perturbation_law(k):
    tent, _ = maps.gallery("tent")
    S = maps.transition_matrix(tent)
    T = maps.transition_matrix(maps.window_perturb_local(tent, 1, k))
    # every first return to the perturbed element leaves it exactly once
    fS = paths.first_entrance(S, 1, 1, 20)
    fT = paths.first_entrance(T, 1, 1, 20)
    assert any(fS.values)
    assert all(fT[n] == (2 * k + 1) * fS[n] for n in range(21))
