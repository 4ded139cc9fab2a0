import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cpmm import classify as cl
from cpmm import graphcore as gc
from cpmm import paths
from cpmm import sequences as seq
from cpmm import spectral as sp


def K():
    return gc.affine_transform(gc.banded_z(1, 1), 2, 1)


def test_finite_radius_examples():
    golden = gc.truncate(gc.finite_matrix([[0, 1], [1, 1]]), 2)
    assert sp.finite_spectral_radius(golden) == pytest.approx((1 + math.sqrt(5)) / 2, abs=1e-9)
    assert sp.finite_spectral_radius(np.array([[7]])) == pytest.approx(7)
    band = gc.truncate(gc.banded_z(1, 1), 41)
    r = sp.finite_spectral_radius(band)
    assert r < 2 and r == pytest.approx(2 * math.cos(math.pi / 42), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_bracket_contains_radius(seed):
    rng = np.random.default_rng(seed)
    A = paths.random_graph(rng).entries.astype(float)
    br = sp.radius_bracket(A)
    true = max(abs(np.linalg.eigvals(A))) if A.size else 0.0
    assert br.lower <= true + 1e-8 and true <= br.upper + 1e-8


def test_perron_values():
    assert sp.perron_value(gc.banded_z(1, 1), (50, 100, 200)).lambda_estimate == pytest.approx(2, abs=1e-3)
    assert sp.perron_value(K(), (50, 100, 200)).lambda_estimate == pytest.approx(5, abs=1e-2)
    bosou = sp.perron_value(gc.bosou_factor_matrix(), (50, 100, 200))
    assert bosou.lambda_estimate == pytest.approx(9, abs=1e-2)


@pytest.mark.parametrize("M", [gc.banded_z(1, 2), gc.bt12_matrix(), gc.tent_matrix(seq.a_ell(2)),
                               gc.bosou_factor_matrix()], ids=["band", "bt12", "A2", "bosou"])
def test_truncation_monotone(M):
    radii = [r for _, r in sp.perron_value(M, (10, 20, 40, 80)).schedule]
    assert all(b >= a - 1e-9 for a, b in zip(radii, radii[1:]))


@pytest.mark.parametrize("a,b,k,l", [(1, 1, 2, 1), (1, 2, 3, 0), (2, 3, 1, 2)])
def test_affine_perron(a, b, k, l):
    sched = (50, 100, 200)
    base = sp.perron_value(gc.banded_z(a, b), sched).lambda_estimate
    shifted = sp.perron_value(gc.affine_transform(gc.banded_z(a, b), k, l), sched).lambda_estimate
    assert shifted == pytest.approx(k * base + l, abs=1e-2)


def test_schedule_validation():
    with pytest.raises(ValueError):
        sp.perron_value(gc.banded_z(1, 1), (50, 20))


def test_growth_rates():
    f = paths.first_entrance(gc.banded_z(1, 1), 0, 0, 200)
    assert sp.growth_rate(f) == pytest.approx(2, abs=1e-3)
    assert sp.growth_rate([1] * 50) == pytest.approx(1)
    fa = paths.first_entrance(gc.tent_matrix(seq.a_ell(2)), 0, 0, 200)
    assert sp.growth_rate(fa) == pytest.approx(3, abs=1e-6)
    with pytest.raises(sp.UndefinedGrowth):
        sp.growth_rate([0] * 10)


@pytest.mark.parametrize("M", [gc.banded_z(1, 2), gc.tent_matrix(seq.a_ell(1)),
                               gc.ruette_matrix(seq.constant(1)), gc.boundary_n(1, 1, 3)],
                         ids=["band", "A1", "ruette", "boundary"])
def test_growth_matches_perron(M):
    m = paths.power_counts(M, 0, 0, 300)
    lam = sp.perron_value(M, (100, 200, 400)).lambda_estimate
    assert sp.growth_rate(m) == pytest.approx(lam, rel=0.02)


def test_series_examples():
    ft = paths.first_entrance(gc.tent_matrix(), 0, 0, 100)
    s = sp.series_eval(ft, 0.5)
    assert s.certified and s.value_partial + s.tail_bound == pytest.approx(1, abs=1e-12)
    d = sp.derivative_series_eval(ft, 0.5)
    assert d.certified and d.value_partial == pytest.approx(2, abs=1e-12)
    assert sp.series_eval(ft, 0.0).value_partial == 0
    assert sp.derivative_series_eval([0] * 20, 0.5).value_partial == 0


def test_b1_series_with_declared_tail():
    M = gc.tent_matrix(seq.b1())
    f = paths.first_entrance(M, 0, 0, 200)
    tail = cl.declared_tail(M, 0)
    s = sp.series_eval(f, 1 / 3, tail.F_tail)
    assert s.certified and s.upper < 1
    # the value is known exactly
    assert s.upper == pytest.approx(float(seq.b1_series_at_third(())), abs=1e-12)


def test_b2_derivative_series_flags_divergence():
    f = paths.first_entrance(gc.tent_matrix(seq.b2()), 0, 0, 200)
    assert sp.derivative_series_eval(f, 1 / 3).divergent
    sums = sp.partial_sums(f, 1 / 3, weight_n=True)
    assert sums[-1] > sums[100] > sums[20]


@pytest.mark.parametrize("M", [gc.banded_z(1, 1), gc.tent_matrix(seq.a_ell(2)),
                               gc.ruette_matrix(seq.constant(2))], ids=["band", "A2", "ruette"])
def test_series_flags_around_radius(M):
    f = paths.first_entrance(M, 0, 0, 300)
    rho = sp.growth_rate(f)
    assert sp.series_eval(f, 0.8 / rho).certified
    assert sp.series_eval(f, 1.25 / rho).divergent
