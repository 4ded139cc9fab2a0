"""Acceptance criteria. Each test prints one PASS/FAIL line with the measured values.

Run ``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""
import math
import sys
from fractions import Fraction

import numpy as np
import pytest
from scipy.optimize import brentq

from cpmm import classify as cl
from cpmm import graphcore as gc
from cpmm import maps
from cpmm import paths
from cpmm import sequences as seq
from cpmm import solutions as sol
from cpmm import spectral as sp
from cpmm.solutions import NO, YES


class Checks:
    def __init__(self, number, title):
        self.number, self.title = number, title
        self.items = []

    def __call__(self, label, ok, value=""):
        self.items.append((label, bool(ok), value))
        return ok

    @property
    def passed(self):
        return all(ok for _, ok, _ in self.items)

    def line(self):
        failed = [f"{lab} [{val}]" for lab, ok, val in self.items if not ok]
        shown = "; ".join(failed) if failed else "; ".join(
            f"{lab} [{val}]" if val != "" else lab for lab, _, val in self.items)
        return f"{'PASS' if self.passed else 'FAIL'} {self.number:>2}. {self.title}: {shown}"


@pytest.fixture
def report(record_property):
    def done(c: Checks):
        record_property("acceptance", c.line())
        print(c.line())
        assert c.passed, c.line()
    return done


def radii(M, sizes):
    return [sp.finite_spectral_radius(gc.truncate(M, n)) for n in sizes]


def nondecreasing(xs, slack=1e-9):
    return all(b >= a - slack for a, b in zip(xs, xs[1:]))


SIZES = (50, 100, 200, 400)


def test_01_perron_values_banded(report):
    c = Checks(1, "banded Perron values")
    for a, b in [(1, 1), (1, 2), (2, 3)]:
        est = sp.perron_value(gc.banded_z(a, b), (100, 200, 400)).lambda_estimate
        err = abs(est - 2 * math.sqrt(a * b))
        c(f"({a},{b})", err <= 1e-3, f"err {err:.2e}")
    report(c)


def test_02_affine_rule(report):
    c = Checks(2, "affine rule on 2M(1,1)+E")
    K = gc.affine_transform(gc.banded_z(1, 1), 2, 1)
    v = cl.classify_closed_form(cl.parse_family("affine:2,1,banded_z:1,1"))
    c("closed form lambda = 5", v.lam == 5 and v.lam_symbolic == "5", v.lam_symbolic)
    est = sp.perron_value(K, (100, 200, 400)).lambda_estimate
    c("numeric within 1e-2", abs(est - 5) <= 1e-2, f"{est:.6f}")
    cn = gc.column_norm(K)
    c("column norm 5 exact", cn.value == 5 and cn.status == "exact", f"{cn.value} {cn.status}")
    report(c)


def test_03_boundary_family(report):
    c = Checks(3, "boundary_n(1,1,c) classes")
    want = {1: cl.TRANSIENT, 2: cl.NULL, 3: cl.STRONG}
    for cc, kind in want.items():
        fam = cl.FamilyDescriptor("boundary_n", (1, 1, cc))
        v = cl.classify_closed_form(fam)
        c(f"c={cc} closed form {kind}", v.kind == kind and v.confidence == cl.EXACT, v.kind)
        num = cl.classify_numeric(fam.matrix(), None, 400)
        c(f"c={cc} numeric consistent", num.kind in (kind, None), f"{num.kind}/{num.confidence}")
    v = cl.classify_closed_form(cl.FamilyDescriptor("boundary_n", (1, 1, 3)))
    c("lambda = 3/sqrt2", v.lam_symbolic == "3*sqrt(2)/2" and abs(v.lam - 3 / math.sqrt(2)) <= 1e-12,
      v.lam_symbolic)
    report(c)


def test_04_summability_certificates(report):
    c = Checks(4, "summability certificates")
    v = cl.classify_closed_form(cl.FamilyDescriptor("boundary_n", (1, 2, 4)))
    c("M(1,2,4) summable (closed form)", v.summable is True)
    s = sol.solve_banded(1, 2, 2 * math.sqrt(2), side="one-sided", c=4)
    c("M(1,2,4) solution summable", s is not None and sol.summability(s).verdict == YES)
    c("M(1,2,4) solution verifies", sol.verify_solution(gc.boundary_n(1, 2, 4), s).passed)
    rec = maps.linearizability_advisor(gc.boundary_n(2, 1, 3))
    c("M(2,1,3) not linearizable", rec.kind == maps.NOT_LINEARIZABLE, rec.kind)
    rec = maps.linearizability_advisor(maps.gallery("boundary", a=2, b=1, c=3)[0])
    c("map of M(2,1,3) not linearizable", rec.kind == maps.NOT_LINEARIZABLE, rec.kind)
    report(c)


def test_05_tent_baseline(report):
    c = Checks(5, "tent baseline")
    tent = maps.transition_matrix(maps.gallery("tent")[0])
    c("transition matrix is the tent matrix",
      np.array_equal(gc.truncate(tent, 40).entries, gc.truncate(gc.tent_matrix(), 40).entries))
    f = paths.first_entrance(tent, 0, 0, 200)
    c("f_00(n) = 1 for 1 <= n <= 30", f[0] == 0 and all(f[n] == 1 for n in range(1, 31)))
    R = brentq(lambda z: sp.series_eval(f, z).value_partial - 1, 0.1, 0.9, xtol=1e-15)
    c("lambda = 2 by F(R) = 1", abs(1 / R - 2) <= 1e-6, f"{1 / R:.12f}")
    report(c)


def test_06_window_perturbation_law(report):
    c = Checks(6, "window perturbation law")
    tent = maps.gallery("tent")[0]
    S = maps.transition_matrix(tent)
    j = 1
    fS = paths.first_entrance(S, j, j, 20)
    for k in (1, 2, 3):
        T = maps.transition_matrix(maps.window_perturb_local(tent, j, k))
        fT = paths.first_entrance(T, j, j, 20)
        c(f"k={k}", all(fT[n] == (2 * k + 1) * fS[n] for n in range(21)))
    report(c)


def test_07_A_family(report):
    c = Checks(7, "A(l) family")
    for ell in (1, 2, 5):
        mapd = maps.gallery("tent_A", ell=ell)[0]
        v = cl.classify(maps.transition_matrix(mapd), N=400)
        c(f"l={ell} strongly recurrent", v.kind == cl.STRONG, v.kind)
        c(f"l={ell} lambda in (3,4)", 3 < v.lam < 4, f"{v.lam:.9f}")
        csm = maps.linearize(mapd)
        c(f"l={ell} slope = lambda", abs(csm.slope - v.lam) <= 1e-9, f"{abs(csm.slope - v.lam):.1e}")
        dev = csm.max_slope_deviation()
        c(f"l={ell} branch slopes", dev <= 1e-9, f"{dev:.1e}")
    report(c)


def test_08_B1_family(report):
    c = Checks(8, "B(1) family")
    M = gc.tent_matrix(seq.b1())
    f = paths.first_entrance(M, 0, 0, 200)
    s = sp.series_eval(f, 1 / 3, cl.declared_tail(M, 0).F_tail)
    c("partial sum + certified tail < 1", s.certified and s.upper < 1, f"{s.upper:.10f}")
    v = cl.classify(M, N=400)
    c("transient", v.kind == cl.TRANSIENT, v.kind)
    report(c)


def test_09_B2_family(report):
    # Measured as stated at horizon 200 for both greedy rules (full series and
    # partial sums). The weighted series diverges only logarithmically.
    c = Checks(9, "B(2) null-recurrence evidence at horizon 200")
    variants = [("full-series greedy", seq.b2()),
                ("partial-sum greedy", seq.b1(seq.b2_partial_removed(200)))]
    for label, a in variants:
        f = paths.first_entrance(gc.tent_matrix(a), 0, 0, 200)
        sums = sp.partial_sums(f, 1 / 3)
        c(f"{label}: partial sums <= 1", max(sums) <= 1, f"max {max(sums):.6f}")
        c(f"{label}: final partial sum in [0.99, 1]", 0.99 <= sums[-1] <= 1, f"{sums[-1]:.6f}")
        wsums = sp.partial_sums(f, 1 / 3, weight_n=True)
        c(f"{label}: weighted partial sum > 10", wsums[-1] > 10, f"{wsums[-1]:.4f}")
        c(f"{label}: weighted partial sums increasing", wsums[-1] > wsums[150] > wsums[100],
          f"{wsums[100]:.3f} < {wsums[150]:.3f} < {wsums[-1]:.3f}")
    report(c)


def test_10_ruette_family(report):
    c = Checks(10, "Ruette family")
    l0, _ = cl.ruette_lambda(seq.constant(0))
    c("a=0: lambda = 2", abs(l0 - 2) <= 1e-9, f"{l0:.12f}")
    l1, l2 = cl.ruette_lambda(seq.constant(1))
    c("a=1: lambda = 1+sqrt3", abs(l1 - (1 + math.sqrt(3))) <= 1e-9, f"{l1:.12f}")
    c("a=1: both equations agree", abs(l1 - l2) <= 1e-9, f"{abs(l1 - l2):.1e}")
    for a in (seq.constant(5), seq.constant(3, prefix=(0, 5, 1)), seq.constant(0)):
        v = cl.classify_numeric(gc.ruette_matrix(a), None, 400)
        c(f"bounded {cl.sequence_spec(a)} strongly recurrent", v.kind == cl.STRONG, v.kind)
    fam = cl.FamilyDescriptor("ruette_sequence", (seq.power(2),))
    v = cl.classify_closed_form(fam)
    ev = v.evidence
    c("a=2^n strongly recurrent", v.kind == cl.STRONG, v.kind)
    c("a=2^n R < Phi = 1/2", ev.Phi == 0.5 and ev.R < ev.Phi, f"R {ev.R:.6f}")
    num = cl.classify_numeric(fam.matrix(), None, 400)
    c("a=2^n numeric agrees", num.kind == cl.STRONG, f"{num.kind}/{num.confidence}")
    report(c)


def test_11_bt12(report):
    c = Checks(11, "bt12")
    w = sol.bt12_lengths(4, 51)
    c("w_k = 2^-k (1 + k/2), k <= 50", all(w[k] == Fraction(2 + k, 2 ** (k + 1)) for k in range(51)))
    v = [w[k] - w[k + 1] for k in range(51)]
    # telescoping prefix plus the exact remaining length w_51 -> total 1
    c("sum v_k = 1 exactly", sum(v) + w[51] == 1 and w[0] == 1)
    for lam in (4, 5):
        s = sol.bt12_solution(lam)
        c(f"verify at {lam}", sol.verify_solution(gc.bt12_matrix(), s).passed)
    r = cl.salama_test(gc.bt12_matrix())
    c("self-embedding certifies transient", r.self_embedding and r.hint == "transient_certified")
    rs = radii(gc.bt12_matrix(), SIZES)
    c("radii nondecreasing", nondecreasing(rs))
    c("radii <= 4", max(rs) <= 4 + 1e-9, f"{max(rs):.6f}")
    c("radius >= 3.8 at N=400 (empirical)", rs[-1] >= 3.8, f"{rs[-1]:.6f}")
    report(c)


def test_12_bosou_factor(report):
    c = Checks(12, "bosou factor")
    M = gc.bosou_factor_matrix()
    for lam in (9, 20):
        v = sol.solve_truncated(M, lam, 200)
        ok = v is not None and min(v.prefix) > 0 and v.summable == YES
        c(f"solution at {lam}", ok)
    c("no solution at 8.5", sol.solve_truncated(M, 8.5, 200) is None)
    rs = radii(M, SIZES)
    c("radii nondecreasing", nondecreasing(rs))
    c("radii <= 9", max(rs) <= 9 + 1e-9, f"{max(rs):.6f}")
    c("radius >= 8.5 at N=400", rs[-1] >= 8.5, f"{rs[-1]:.6f}")
    report(c)


def test_13_kmap(report):
    c = Checks(13, "K-map")
    kmap = maps.gallery("kmap")[0]
    K = maps.transition_matrix(kmap)
    rec = maps.linearizability_advisor(kmap)
    c("advisor not linearizable", rec.kind == maps.NOT_LINEARIZABLE, rec.kind)
    # K = 2M(1,1)+E, so K v = 5 v is x_{n-1} + x_{n+1} = 2 x_n
    s = sol.solve_banded(1, 1, 2.0)
    const = s is not None and all(abs(x - 1) < 1e-12 for x in s.prefix)
    c("constant solution", const)
    c("not summable", sol.summability(s).verdict == NO and s.summable == NO)
    c("constant solves K at 5", sol.verify_solution(K, sol.perron_solution(K, 5.0)).passed)
    sv = gc.s_supremum(K, 0)
    c("s_supremum = 1 exact", sv.value == 1 and sv.exact, sv.value)
    c("non-leo", not maps.leo_probe(kmap).leo_evidence)
    pert = maps.window_perturb_local(maps.monotone_refinement(kmap, 0), 0, 2)
    rec = maps.linearizability_advisor(pert)
    c("perturbed: after perturbation", rec.kind == maps.AFTER_PERTURBATION, rec.kind)
    csm = maps.linearize(pert)
    c("perturbed: linearize succeeds", csm.max_slope_deviation() <= 1e-6,
      f"slope {csm.slope:.6f}")
    report(c)


def test_14_oracle_suite(report):
    c = Checks(14, "oracle suite on 100 random graphs")
    rng = np.random.default_rng(20240601)
    N = 10
    mismatches = identity_fail = 0
    for _ in range(100):
        F = paths.random_graph(rng, max_vertices=8, max_entry=3)
        size = F.entries.shape[0]
        M = gc.finite_matrix(F.entries.tolist())
        i, j, k = (int(x) for x in rng.integers(0, size, 3))
        P = tuple(sorted({j} | {int(x) for x in rng.integers(0, size, int(rng.integers(0, size)))}))
        kinds = [("m", "m", paths.power_counts(M, i, j, N)),
                 ("f", "f", paths.first_entrance(M, i, j, N)),
                 ("l", "l", paths.last_exit(M, i, j, N)),
                 ("taboo", ("taboo", k), paths.taboo_counts(M, i, j, k, N)),
                 ("gset", ("gset", P), paths.gset_counts(M, P, i, j, N))]
        for _, mode, table in kinds:
            for n in range(N + 1):
                if table[n] != paths.brute_force_paths(F, i, j, n, mode):
                    mismatches += 1
        window = list(range(size))
        rep = paths.check_identities(M, window, N, pset=P)
        identity_fail += not rep.passed
    c("coefficients match brute force", mismatches == 0, f"{mismatches} mismatches")
    c("renewal, splitting and decomposition identities", identity_fail == 0,
      f"{identity_fail} graphs failed")
    report(c)


def test_15_partition_invariance(report):
    c = Checks(15, "partition invariance")
    for name, params, cut in [("tent", {}, (0, [Fraction(3, 4)])),
                              ("tent_A", {"ell": 2}, (3, [Fraction(1, 12)]))]:
        mapd = maps.gallery(name, **params)[0]
        rep = cl.partition_invariance_check(mapd, [cut], N=400)
        c(f"{mapd.name}", rep.agree and not rep.identical_matrices,
          f"{rep.before.kind} -> {rep.after.kind}")
    report(c)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
