import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from cpmm import classify as cl
from cpmm import graphcore as gc
from cpmm import maps
from cpmm import sequences as seq
from cpmm.classify import NULL, STRONG, TRANSIENT, WEAK

# (family, class, lambda, symbolic lambda, summable) frozen from the closed forms
CLOSED = [
    ("boundary_n:1,1,1", TRANSIENT, 2.0, "2", False),
    ("boundary_n:1,1,2", NULL, 2.0, "2", False),
    ("boundary_n:1,1,3", STRONG, 3 / math.sqrt(2), "3*sqrt(2)/2", True),
    ("boundary_n:1,2,4", NULL, 2 * math.sqrt(2), "2*sqrt(2)", True),
    ("boundary_n:2,1,3", STRONG, 3.0, "3", False),
    ("affine:2,1,banded_z:1,1", NULL, 5.0, "5", False),
    ("banded_z:1,2", NULL, 2 * math.sqrt(2), "2*sqrt(2)", False),
    ("tent_sequence:A:2", STRONG, 3.1700864866260337, None, True),
    ("tent_sequence:b1", TRANSIENT, 3.0, "3", False),
    ("tent_sequence:b2", NULL, 3.0, "3", True),
    ("ruette_sequence:const:1", STRONG, 1 + math.sqrt(3), "1 + sqrt(3)", True),
    ("bt12", TRANSIENT, 4.0, "4", True),
    ("bosou_factor", TRANSIENT, 9.0, "9", True),
]


@pytest.mark.parametrize("text,kind,lam,sym,summable", CLOSED, ids=[c[0] for c in CLOSED])
def test_closed_forms(text, kind, lam, sym, summable):
    v = cl.classify_closed_form(cl.parse_family(text))
    assert v.kind == kind and v.confidence == cl.EXACT
    assert v.lam == pytest.approx(lam, abs=1e-12)
    assert v.lam_symbolic == sym
    assert v.summable is summable


def test_family_text_round_trip():
    for text, *_ in CLOSED:
        assert str(cl.parse_family(text)) == text
    with pytest.raises(cl.UnknownFamily):
        cl.parse_family("golden:1")
    with pytest.raises(ValueError):
        cl.parse_family("boundary_n:1,1")
    with pytest.raises(ValueError):
        cl.parse_family("tent_sequence:const:2")


def test_family_recognition():
    for text, *_ in CLOSED:
        fam = cl.parse_family(text)
        assert cl.family_of(fam.matrix()) == fam


def test_numeric_examples():
    assert cl.classify_numeric(gc.banded_z(1, 1), None, 200).kind == NULL
    assert cl.classify_numeric(gc.tent_matrix(seq.a_ell(2)), None, 200).kind == STRONG
    assert cl.classify_numeric(gc.tent_matrix(seq.b1()), None, 200).kind == TRANSIENT


def test_salama_examples():
    r = cl.salama_test(gc.bt12_matrix())
    assert r.self_embedding and r.hint == "transient_certified"
    r = cl.salama_test(gc.boundary_n(1, 1, 3))
    assert not r.subgraph_equal and r.lambda_subgraph < r.lambda_full
    r = cl.salama_test(gc.finite_matrix([[2]]))
    assert r.hint == "strongly_recurrent"
    # the doubled variant has no closed form and is decided by self-embedding
    v = cl.classify(gc.bt12_matrix(2), N=200)
    assert v.kind == TRANSIENT and v.source == "salama"
    assert v.lam == pytest.approx(8, abs=1e-2)


def _numeric_agrees(fam, N=200):
    exact = cl.classify_closed_form(fam)
    num = cl.classify_numeric(fam.matrix(), None, N)
    assert num.kind == exact.kind or num.confidence == cl.INCONCLUSIVE, (str(fam), num.kind)
    assert cl.coherence_problems(num) == []
    return num


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 4))
def test_boundary_numeric_never_contradicts(a, b, c):
    _numeric_agrees(cl.FamilyDescriptor("boundary_n", (a, b, c)))


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4))
def test_banded_numeric_never_contradicts(a, b):
    _numeric_agrees(cl.FamilyDescriptor("banded_z", (a, b)))


@pytest.mark.parametrize("text", ["tent_sequence:A:1", "tent_sequence:A:4", "tent_sequence:const:3",
                                  "tent_sequence:b1", "ruette_sequence:const:0",
                                  "ruette_sequence:const:4", "ruette_sequence:power:2"])
def test_sequence_numeric_never_contradicts(text):
    _numeric_agrees(cl.parse_family(text))


@pytest.mark.parametrize("a,b,c,k,l", [(1, 1, 3, 2, 1), (1, 1, 1, 1, 2), (1, 2, 4, 3, 0)])
def test_affine_invariance(a, b, c, k, l):
    base = cl.FamilyDescriptor("boundary_n", (a, b, c))
    shifted = cl.FamilyDescriptor("affine", (k, l, base))
    v0, v1 = cl.classify_closed_form(base), cl.classify_closed_form(shifted)
    assert v0.kind == v1.kind
    assert v1.lam == pytest.approx(k * v0.lam + l, abs=1e-12)


@pytest.mark.parametrize("a,b", [(1, 1), (1, 2)])
def test_affine_invariance_numeric(a, b):
    M = gc.affine_transform(gc.banded_z(a, b), 2, 1)
    v = cl.classify_numeric(M, None, 200)
    assert v.kind in (NULL, None)


def test_transient_series_bounded():
    v = cl.classify_numeric(gc.tent_matrix(seq.b1()), None, 200)
    assert v.kind == TRANSIENT
    assert v.evidence.F_at_R.certified and v.evidence.F_at_R.upper < 1


def test_verdict_validation():
    with pytest.raises(ValueError):
        cl.VereJonesVerdict("Recurrentish", cl.EXACT)
    with pytest.raises(ValueError):
        cl.VereJonesVerdict(TRANSIENT, "sure")
    assert WEAK in cl.CLASSES


def test_ruette_lambda_equations_agree():
    l1, l2 = cl.ruette_lambda(seq.constant(1))
    assert l1 == pytest.approx(1 + math.sqrt(3), abs=1e-12)
    assert l2 == pytest.approx(l1, abs=1e-9)
    assert cl.ruette_lambda(seq.constant(0))[0] == pytest.approx(2, abs=1e-12)


def test_partition_invariance_tent():
    tent, _ = maps.gallery("tent")
    rep = cl.partition_invariance_check(tent, [(0, [Fraction(3, 4)])], N=200)
    assert rep.agree and rep.before.kind == STRONG and not rep.identical_matrices
    trivial = cl.partition_invariance_check(tent, [], N=100)
    assert trivial.identical_matrices
