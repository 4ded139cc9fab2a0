import math
from fractions import Fraction
from functools import lru_cache

import pytest
from hypothesis import given, settings, strategies as st

from cpmm import graphcore as gc
from cpmm import maps
from cpmm import sequences as seq
from cpmm import solutions as sol
from cpmm.solutions import NO, UNKNOWN, YES


def K():
    return gc.affine_transform(gc.banded_z(1, 1), 2, 1)


def test_banded_examples():
    assert sol.solve_banded(1, 1, 1.9) is None
    s = sol.solve_banded(1, 2, 2 * math.sqrt(2), side="one-sided", c=4)
    assert s is not None and s.summable == YES
    assert sol.summability(s).verdict == YES


@settings(max_examples=40)
@given(st.integers(1, 3), st.integers(1, 3), st.floats(0.5, 1.5))
def test_existence_threshold(a, b, scale):
    edge = 2 * math.sqrt(a * b)
    lam = edge * scale
    got = sol.solve_banded(a, b, lam)
    if lam < edge * (1 - 1e-12):
        assert got is None
    elif lam >= edge:
        assert got is not None and min(got.prefix) > 0


def test_banded_pure_decaying_root_on_two_sided_interior():
    # roots of x_{n-1} + x_{n+1} = 5/2 x_n are 2 and 1/2
    v = sol.solve_banded(1, 1, 2.5, mix=(0.0, 1.0))
    rep = sol.verify_solution(gc.banded_z(1, 1), v, window=range(-20, 21))
    assert rep.passed and rep.residual_sup < 1e-12
    assert v.value(3) / v.value(2) == pytest.approx(0.5)


def test_truncated_tent_lengths():
    v = sol.solve_truncated(gc.tent_matrix(), 2.0, 200)
    assert v.summable == YES
    assert all(v.prefix[n] / v.prefix[0] == pytest.approx(2.0 ** -n, rel=1e-9) for n in range(30))


def test_truncated_bosou():
    M = gc.bosou_factor_matrix()
    assert sol.solve_truncated(M, 8.0, 200) is None
    assert sol.solve_truncated(M, 8.5, 200) is None
    for lam in (9.0, 20.0):
        v = sol.solve_truncated(M, lam, 200)
        assert v is not None and v.summable == YES
        assert sol.verify_solution(M, v).passed


def test_truncated_reports_reasons():
    diag = []
    assert sol.solve_truncated(gc.bosou_factor_matrix(), 8.0, 100, diagnostics=diag) is None
    assert diag and diag[0].reason


@pytest.mark.parametrize("lam", [4, 5])
def test_bt12_solution(lam):
    v = sol.bt12_solution(lam)
    assert sol.verify_solution(gc.bt12_matrix(), v).passed
    assert sol.summability(v).verdict == YES


def test_bt12_lengths_exact():
    w = sol.bt12_lengths(4, 50)
    assert all(w[k] == Fraction(2 + k, 2 ** (k + 1)) for k in range(51))


def test_bt12_closed_form_at_five():
    w = sol.bt12_lengths(Fraction(5), 50)
    s = math.sqrt(1 - 4 / 5)
    ap, am = (1 + s) / 2, (1 - s) / 2
    A = (1 - 2 / 5 + s) / (2 * s)
    B = (s - 1 + 2 / 5) / (2 * s)
    for k in range(51):
        assert float(w[k]) == pytest.approx(A * ap ** k + B * am ** k, abs=1e-12)


def test_subinvariance_on_k():
    one = lambda j: 1.0
    rep = sol.subinvariant_check(K(), one, 5, range(-10, 11))
    assert rep.passed and rep.equality
    assert not sol.subinvariant_check(K(), one, 4.9, range(-10, 11)).passed
    assert sol.subinvariant_check(K(), one, 5.5, range(-10, 11)).passed


@given(st.floats(1e-3, 1e3))
@settings(max_examples=20)
def test_homogeneity(c):
    M = gc.boundary_n(1, 1, 3)
    v = sol.solve_truncated(M, 3 / math.sqrt(2), 120)
    assert sol.verify_solution(M, v.scaled(c)).passed == sol.verify_solution(M, v).passed


def test_summability_verdicts():
    geo = sol.solve_truncated(gc.tent_matrix(), 2.0, 100)
    assert sol.summability(geo).verdict == YES
    const = sol.perron_solution(K(), 5.0)
    assert const.prefix == (1.0,) * len(const.prefix)
    assert sol.summability(const).verdict == NO
    kmap, _ = maps.gallery("kmap")
    inner = sol.summability(const, (0.1, kmap.elements_inside))
    assert inner.verdict == YES and inner.partial_sum == 6.0


def test_summability_unknown_without_tail():
    v = sol.LambdaSolution(2.0, 0, (1.0, 0.5), {"kind": "opaque"}, UNKNOWN, 0.0)
    assert sol.summability(v).verdict == UNKNOWN


@pytest.mark.parametrize("a", [seq.a_ell(1), seq.a_ell(3), seq.constant(1), seq.constant(3)],
                         ids=["A1", "A3", "const1", "const3"])
def test_recurrent_solution_matches_first_return_vector(a):
    from cpmm import classify as cl
    M = gc.tent_matrix(a)
    lam = cl.classify_closed_form(cl.FamilyDescriptor("tent_sequence", (a,))).lam
    v = sol.solve_truncated(M, lam, 150)
    assert v is not None
    assert sol.fvector_deviation(M, v, count=5, N=150) < 1e-6


@pytest.mark.parametrize("name,params", [("tent", {}), ("tent_A", {"ell": 1}),
                                         ("tent_A", {"ell": 3}), ("ruette", {"a": "const:2"})])
def test_leo_recurrent_solutions_are_summable(name, params):
    from cpmm import classify as cl
    mapd, _ = maps.gallery(name, **params)
    M = maps.transition_matrix(mapd)
    verdict = cl.classify(M, N=200)
    assert verdict.recurrent
    v = sol.perron_solution(M, verdict.lam, 200)
    assert v.summable == YES


CAP = 1500


def _refined_vector(M1, v):
    """u_i' = sum of v over the base elements covered by the pieces on i'."""
    rule = M1.tail_rule

    @lru_cache(maxsize=None)
    def u(i):
        total = 0.0
        for b in _cols(M1, i, lambda j: rule.to_base(j)):
            m = M1.entry(i, rule.from_base(b)[0])
            if m:
                total += m * v.value(b)
        return total
    return u


def _cols(M, i, key=lambda j: j):
    sup = M.row_support(i)
    cols = range(CAP) if sup is None else sup
    return sorted({key(j) for j in cols})


@pytest.mark.parametrize("name,params,cut", [("tent", {}, (0, [Fraction(3, 4)])),
                                             ("tent_A", {"ell": 2}, (3, [Fraction(1, 12)]))])
def test_refinement_transfer(name, params, cut):
    from cpmm import classify as cl
    mapd, _ = maps.gallery(name, **params)
    M0 = maps.transition_matrix(mapd)
    lam = cl.classify(M0, N=200).lam
    v = sol.perron_solution(M0, lam, 300)
    M1 = maps.transition_matrix(maps.split(mapd, [cut]))
    u = _refined_vector(M1, v)
    for i in range(8):
        row = math.fsum(M1.entry(i, j) * u(j) for j in _cols(M1, i))
        assert row == pytest.approx(lam * u(i), rel=1e-9)
