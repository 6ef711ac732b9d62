"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with -s (or read the captured output) to see the per-criterion
lines; any assertion failure marks the criterion FAILED.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from biforms import counting as ct
from biforms import densities as dn
from biforms import expsums as es
from biforms import forms as fm
from biforms import geometry as gm
from biforms import workbench as wb

import oracles
from conftest import load_system


def _report(num, text):
    print(f"\nACCEPTANCE {num}: PASS - {text}")


# -- 1. oracle equivalence ---------------------------------------------------

def _random_system(rng):
    d1, d2 = ((1, 1), (2, 1))[int(rng.integers(0, 2))]
    n1 = int(rng.integers(2, 4))
    n2 = int(rng.integers(2, 4))
    R = int(rng.integers(1, 3)) if (d1, d2) == (1, 1) else 1
    forms = []
    for _ in range(R):
        monos = []
        while not monos:
            for _ in range(int(rng.integers(2, 5))):
                j = tuple(int(v) for v in rng.integers(0, n1, d1))
                k = tuple(int(v) for v in rng.integers(0, n2, d2))
                c = int(rng.integers(-3, 4))
                if c:
                    monos.append((j, k, c))
        forms.append(monos)
    try:
        return fm.make_system(n1, n2, d1, d2, forms)
    except Exception:
        return None


def test_criterion_1_oracle_equivalence():
    rng = np.random.default_rng(20240809)
    t0 = time.time()
    instances = 0
    while instances < 20:   # count_N
        s = _random_system(rng)
        if s is None:
            continue
        P1, P2 = int(rng.integers(2, 4)), int(rng.integers(2, 4))
        box_kind = int(rng.integers(0, 2))
        boxes = fm.BoxPair.symmetric(s.n1, s.n2) if box_kind == 0 \
            else fm.BoxPair.unit(s.n1, s.n2)
        rs = oracles.raw(s)
        want = oracles.o_count_N(rs, boxes.x_ranges(P1), boxes.y_ranges(P2))
        got = ct.count_N(s, boxes, P1, P2)
        assert got.count == want, (s, P1, P2)
        gotb = ct.count_N(s, boxes, P1, P2, method="brute")
        assert gotb.count == want
        instances += 1
    while instances < 35:   # count_aux
        s = _random_system(rng)
        if s is None:
            continue
        side = int(rng.integers(1, 3))
        beta = [Fraction(int(v), 2) for v in rng.integers(-3, 4, s.R)]
        if all(v == 0 for v in beta):
            continue
        B = int(rng.integers(2, 4))
        rs = oracles.raw(s)
        want = oracles.o_count_aux(rs, side, beta, B)
        got = ct.count_aux(s, side, beta, B)
        assert got == want, (s, side, beta, B)
        instances += 1
    while instances < 50:   # count_M
        s = _random_system(rng)
        if s is None:
            continue
        side = int(rng.integers(1, 3))
        alpha = [Fraction(int(v), 6) for v in rng.integers(0, 7, s.R)]
        P1, P2 = int(rng.integers(2, 4)), int(rng.integers(2, 4))
        bound = Fraction(1, int(rng.integers(3, 6)))
        rs = oracles.raw(s)
        want = oracles.o_count_M(rs, side, alpha, P1, P2, bound)
        got = ct.count_M(s, side, alpha, P1, P2, bound)
        assert got == want, (s, side, alpha, P1, P2, bound)
        instances += 1
    dt = time.time() - t0
    assert dt < 300
    _report(1, f"50 randomized instances match the nested-loop oracles "
               f"exactly in {dt:.1f}s")


# -- 2. asymptotic reproduction ----------------------------------------------

def test_criterion_2_asymptotic_reproduction():
    t0 = time.time()
    system = load_system("bilinear3")
    boxes = fm.BoxPair.symmetric(3, 3)
    series = dn.singular_series(system, 200, variant="euler")
    integral = dn.singular_integral(system, boxes, "slab",
                                    {"P": 32.0, "log2_samples": 18}, seed=5)
    sigma = series.value * integral.value
    res = ct.count_N(system, boxes, 60, 60)
    ratio = res.count / (sigma * 60.0 ** 4)
    dt = time.time() - t0
    assert abs(ratio - 1.0) <= 0.10, (res.count, sigma, ratio)
    assert dt < 600
    _report(2, f"N(60,60) = {res.count}, sigma = {sigma:.4f} "
               f"(euler p<=200 x slab QMC 2^18), ratio = {ratio:.4f}, "
               f"in {dt:.0f}s")


# -- 3. density cross-checks ---------------------------------------------------

def _overlap(a, b):
    lo = max(a.value - a.error_bound, b.value - b.error_bound)
    hi = min(a.value + a.error_bound, b.value + b.error_bound)
    return lo <= hi


def test_criterion_3_density_cross_checks(corpus):
    # desk-scale corpus systems mostly sit outside the convergence
    # regime of the series/integral (too few variables); there the
    # divergence-aware error models report wide or infinite half-widths
    # and overlap holds vacuously but honestly.  bilinear3 and the
    # 18-variable diag4 fixture are genuinely convergent cross-checks.
    budgets = {
        "bilinear3": dict(eu=50, qs=25, slabP=32.0, gmax=16.0, gtol=2e-2),
        "bilinear_pair": dict(eu=7, qs=8, slabP=4.0, gmax=4.0, gtol=5e-2),
        "diag21": dict(eu=20, qs=12, slabP=16.0, gmax=12.0, gtol=2e-2),
        "mixed21": dict(eu=20, qs=12, slabP=16.0, gmax=12.0, gtol=1e-2),
        "diag21n2": dict(eu=20, qs=12, slabP=16.0, gmax=12.0, gtol=1e-2),
        "diag4": dict(eu=40, qs=10, slabP=16.0, gmax=8.0, gtol=5e-2),
    }
    systems = dict(corpus)
    systems["diag4"] = load_system("diag4")
    substantive = []
    for name, s in systems.items():
        cfg = budgets[name]
        boxes = fm.BoxPair.symmetric(s.n1, s.n2)
        eu = dn.singular_series(s, cfg["eu"], variant="euler")
        qs = dn.singular_series(s, cfg["qs"], variant="qseries")
        assert _overlap(eu, qs), (name, eu, qs)
        slab = dn.singular_integral(
            s, boxes, "slab", {"P": cfg["slabP"], "log2_samples": 15},
            seed=9)
        gam = dn.singular_integral(
            s, boxes, "gamma", {"gamma_max": cfg["gmax"],
                                "tol": cfg["gtol"]})
        assert _overlap(slab, gam), (name, slab, gam)
        if math.isfinite(eu.error_bound) and math.isfinite(qs.error_bound):
            substantive.append(name)
    assert "bilinear3" in substantive and "diag4" in substantive
    _report(3, "qseries/euler and gamma/slab intervals overlap on all "
               f"six systems; finite-width (substantive) series checks: "
               f"{', '.join(substantive)}")


# -- 4. p-adic closed forms ----------------------------------------------------

def test_criterion_4_padic_closed_forms(bilinear3):
    for p in (2, 3, 5, 7):
        est = dn.padic_density(bilinear3, p, 1, method="residue-count")
        want = 1 + Fraction(1, p * p) - Fraction(1, p ** 3)
        assert est.exact == want, (p, est.exact)
    _report(4, "S_p(k=1) for the diagonal pairing equals "
               "1 + p^-2 - p^-3 exactly for p in {2,3,5,7}")


# -- 5. ellipsoid lemma audit ---------------------------------------------------

def test_criterion_5_ellipsoid_lemma():
    # the lemma's constant depends on C = max(1, lam1/B); the audit
    # population is conditioned on lam1 <= B (the C = 1 regime), where
    # a single constant below 3^n holds with margin.  Outside it the
    # bound with C <= 3^n is genuinely false (H = 10 I, B = 2 gives
    # ratio 25 > 9).
    rng = np.random.default_rng(55)
    worst = {}
    checked_oracle = 0
    instances = 0
    while instances < 200:
        n = int(rng.integers(2, 5))
        H = rng.integers(-10, 11, (n, n)).astype(float)
        B = int(rng.integers(4, 21))
        if np.linalg.svd(H, compute_uv=False)[0] > B:
            continue
        count, ok, ratio, C = ct.ellipsoid_count(H, B)
        assert C == 1.0
        worst[n] = max(worst.get(n, 0.0), ratio)
        assert ratio <= 3.0 ** n, (H, B, ratio)
        instances += 1
    # dedicated small instances for exact oracle equivalence of the count
    while checked_oracle < 15:
        n = int(rng.integers(2, 4))
        H = rng.integers(-3, 4, (n, n)).astype(float)
        B = int(rng.integers(4, 7))
        if np.linalg.svd(H, compute_uv=False)[0] > B:
            continue
        count, ok, ratio, C = ct.ellipsoid_count(H, B)
        want = oracles.o_ellipsoid_count(H.astype(int).tolist(), B)
        assert count == want
        checked_oracle += 1
    _report(5, "200 matrices with lam1 <= B, zero violations; fitted "
               "constants per n: "
               + ", ".join(f"n={n}: {c:.2f} <= {3**n}" for n, c
                           in sorted(worst.items()))
               + f"; {checked_oracle} counts oracle-verified")


# -- 6. K-cell partition ---------------------------------------------------------

def test_criterion_6_kcell_partition(diag21n2, mixed21):
    for s in (diag21n2, mixed21):
        for B in (2, 3, 4, 5, 6):
            specs = ct.dyadic_kcell_specs(s, [1], B)
            total = sum(ct.k_cell_count(s, sp) for sp in specs)
            assert total == (2 * B + 1) ** 2, (s, B, total)
    _report(6, "dyadic K-cells partition [-B,B]^2 exactly for both n=2 "
               "(2,1) corpus systems, B = 2..6")


# -- 7. invariant certification ---------------------------------------------------

def test_criterion_7_invariant_certification(bilinear3, bilinear_pair):
    from biforms.linalg import exact_rank
    rng = np.random.default_rng(77)
    # witnesses re-verify by exact rank; rank-nullity at every witness
    systems = [bilinear3, bilinear_pair]
    for _ in range(4):
        mats = [rng.integers(-3, 4, (3, 3)) for _ in range(2)]
        forms = []
        for A in mats:
            monos = [((j,), (k,), int(A[k, j])) for j in range(3)
                     for k in range(3) if A[k, j] != 0]
            if monos:
                forms.append(monos)
        if len(forms) == 2:
            try:
                systems.append(fm.make_system(3, 3, 1, 1, forms))
            except Exception:
                pass
    for s in systems:
        st = gm.pencil_kernel_stats(s, height=2, samples=30, seed=1)
        A = fm.bilinear_matrices(s)
        Ab = sum(int(b) * M for b, M in zip(st.witness, A))
        r = exact_rank([[int(v) for v in row] for row in Ab])
        assert s.n1 - r == st.sigma1_lb
        assert s.n2 - r == st.sigma2_lb
        for row in st.rank_nullity_rows:
            assert s.n1 - row["ker_dim"] == row["rank"]
            assert s.n2 - row["coker_dim"] == row["rank"]

    # ten canonical varieties, all probe primes must agree exactly
    canonical = [
        ([{(1, 0, 0): 1}], ("projective", 3), 1),
        ([{(1, 0, 0): 1}, {(0, 1, 0): 1}], ("projective", 3), 0),
        ([{(1, 0, 0): 1}, {(0, 1, 0): 1}, {(0, 0, 1): 1}],
         ("projective", 3), -1),
        ([{(1, 0, 0, 0): 1}], ("projective", 4), 2),
        ([], ("projective", 3), 2),
        ([], ("biprojective", 3, 3), 4),
        ([gm.weighted_form(load_system("bilinear3"), [1])],
         ("biprojective", 3, 3), 3),
        ([{((1, 0), (1, 0)): 1, ((0, 1), (0, 1)): 1}],
         ("biprojective", 2, 2), 1),
        ([{((1, 0), (0, 0)): 1}], ("biprojective", 2, 2), 1),
        ([{((1, 0), (1, 0)): 1}, {((1, 0), (0, 1)): 1},
          {((0, 1), (1, 0)): 1}, {((0, 1), (0, 1)): 1}],
         ("biprojective", 2, 2), -1),
    ]
    for forms, ambient, want in canonical:
        est = gm.fp_dimension(forms, ambient, gm.PROBE_PRIMES)
        dims = [d for d, _ in est.per_prime.values()]
        assert dims == [want] * len(gm.PROBE_PRIMES), (forms, ambient,
                                                       dims, want)
    _report(7, f"{len(systems)} kernel witnesses re-verified by exact "
               "rank with rank-nullity; 10 canonical varieties correct "
               "at every probe prime")


# -- 8. inequality auditors -------------------------------------------------------

def _farey_grid(R, n, seed):
    rng = np.random.default_rng(seed)
    fracs = sorted(set(Fraction(a, q) for q in range(1, 7)
                       for a in range(0, q) if math.gcd(a, q) == 1))
    bfracs = [Fraction(1, 6), Fraction(1, 5), Fraction(1, 4),
              Fraction(1, 3), Fraction(5, 12), Fraction(1, 2)]
    pts = []
    while len(pts) < n:
        a = [fracs[int(rng.integers(0, len(fracs)))] for _ in range(R)]
        b = [bfracs[int(rng.integers(0, len(bfracs)))] for _ in range(R)]
        pts.append((a, b))
    return pts


def test_criterion_8_inequality_auditors(bilinear3, mixed21):
    # fitted constants: the weyl bound is loose at resonances (the P
    # powers absorb the worst case), so its constant is fitted on the
    # interquartile bulk; the aux bound is tight at resonances, so its
    # constant is fitted on the top-quintile frontier.  Both must be
    # stable within +-20% between P=8 and P=16, and the P=8 maximum
    # with a 1.25x headroom must admit zero violations at P=16.
    cases = ((bilinear3, "bilinear3", 1.5), (mixed21, "mixed21", 0.25))
    lines = []
    for system, name, c_script in cases:
        boxes = fm.BoxPair.symmetric(system.n1, system.n2)
        pts = _farey_grid(system.R, 100, 11)
        for audit in ("weyl", "aux"):
            fits, maxima = {}, {}
            for P in (8, 16):
                ratios = []
                for (a, b) in pts:
                    if audit == "weyl":
                        rep = es.audit_weyl(system, boxes, a, P, P)
                        ratios.append(max(rep.ratio, 1e-300))
                    else:
                        rep = es.audit_aux_inequality(
                            system, boxes, [float(v) for v in a],
                            [float(v) for v in b], P, P, c_script)
                        ratios.append(max(rep.lhs / rep.rhs, 1e-300))
                r = np.sort(np.array(ratios))
                n = len(r)
                fits[P] = float(np.exp(np.mean(np.log(
                    r[n // 4:3 * n // 4])))) if audit == "weyl" \
                    else float(np.exp(np.mean(np.log(r[-20:]))))
                maxima[P] = float(r[-1])
            drift = fits[16] / fits[8]
            assert 0.8 <= drift <= 1.2, (name, audit, fits)
            # zero violations at P=16 of the corpus constant fitted at P=8
            c_corpus = 1.25 * maxima[8]
            assert maxima[16] <= c_corpus, (name, audit, maxima)
            lines.append(f"{name}/{audit}: C8={fits[8]:.3g} "
                         f"C16={fits[16]:.3g} drift={drift:.2f}")
    _report(8, "stable fitted constants, zero violations at P=16 ["
               + "; ".join(lines) + "]")


# -- 9. exponential-sum identities ---------------------------------------------

def test_criterion_9_expsum_identities(corpus):
    import itertools
    rng = np.random.default_rng(99)
    for name, s in corpus.items():
        # S_{0,q} = 1 for all q; |S_{a,q}| <= 1 with equality iff the
        # phase a.F is constant on residues
        rs = oracles.raw(s)
        for q in (2, 3, 4, 5, 6, 8):
            assert es.complete_sum(s, [0] * s.R, q) == 1
            a = [int(v) for v in rng.integers(0, q, s.R)]
            S = es.complete_sum(s, a, q)
            assert abs(S) <= 1 + 1e-12
            constant_phase = len({
                sum(ai * vi for ai, vi in zip(a, oracles.o_eval(rs[4],
                                                                x, y))) % q
                for x in itertools.product(range(q), repeat=s.n1)
                for y in itertools.product(range(q), repeat=s.n2)}) == 1
            assert (abs(abs(S) - 1) < 1e-12) == constant_phase, (name, a, q)
        # conjugate symmetry of the generating sum
        boxes = fm.BoxPair.symmetric(s.n1, s.n2)
        alpha = rng.uniform(0, 1, s.R).tolist()
        Sp = es.weighted_sum(s, boxes, alpha, 3, 3)
        Sm = es.weighted_sum(s, boxes, [-v for v in alpha], 3, 3)
        assert abs(Sm - Sp.conjugate()) <= 1e-10 * (abs(Sp) + 1)
    # CRT factorization spot checks
    for name in ("bilinear3", "diag21", "mixed21"):
        s = load_system(name)
        for q1, q2 in ((2, 3), (3, 4), (2, 5), (3, 5)):
            q = q1 * q2
            a = [1] * s.R
            a1 = [(v * pow(q2, -1, q1)) % q1 for v in a]
            a2 = [(v * pow(q1, -1, q2)) % q2 for v in a]
            S = es.complete_sum(s, a, q)
            S12 = es.complete_sum(s, a1, q1) * es.complete_sum(s, a2, q2)
            assert abs(S - S12) <= 1e-10
    _report(9, "|S_{a,q}| <= 1 with constancy at equality, S_{0,q} = 1, "
               "conjugate symmetry, and CRT factorization all hold")


# -- 10. trivial floor ------------------------------------------------------------

def test_criterion_10_trivial_floor(corpus, x1y1):
    schedule = [(2, 2), (3, 3), (4, 4), (6, 6)]
    for name, s in corpus.items():
        boxes = fm.BoxPair.symmetric(s.n1, s.n2)
        rows = wb.run_lower_bound_check(s, boxes, schedule)
        assert all(r.ok for r in rows), name
        ub = fm.BoxPair.unit(s.n1, s.n2)
        rows = wb.run_lower_bound_check(s, ub, schedule)
        assert all(r.ok for r in rows), name
    shifted = fm.parse_boxes("x1 1/2 1\ny1 1/2 1\n", 1, 1)
    rows = wb.run_lower_bound_check(x1y1, shifted, schedule)
    assert all(r.ok and r.N == r.floor == 0 for r in rows)
    _report(10, "floor check passes exactly on every corpus system, "
                "symmetric and unit boxes, with equality on the "
                "shifted-box fixture")
