import math
from fractions import Fraction

import numpy as np
import pytest

from biforms import counting as ct
from biforms import forms as fm
from biforms.util import BudgetExceededError, ValidationError

import oracles


def _sym_ranges(n, P):
    return [(-math.floor(P), math.floor(P))] * n


def test_count_N_golden(corpus, golden, sym_boxes):
    for name, s in corpus.items():
        boxes = sym_boxes(s)
        for row in golden[name]["counts"]:
            res = ct.count_N(s, boxes, row["P1"], row["P2"])
            assert res.count == row["count"], (name, row)


def test_count_N_methods_agree(corpus, sym_boxes):
    for name, s in corpus.items():
        boxes = sym_boxes(s)
        a = ct.count_N(s, boxes, 3, 3, method="brute")
        b = ct.count_N(s, boxes, 3, 3)
        assert a.count == b.count, name
        assert a.count <= a.enumerated


def test_count_N_origin_always_counted(corpus):
    for s in corpus.values():
        boxes = fm.BoxPair.unit(s.n1, s.n2)
        assert ct.count_N(s, boxes, 2, 2).count >= 1


def test_count_N_method_tags(bilinear3, bilinear_pair, sym_boxes):
    r1 = ct.count_N(bilinear3, sym_boxes(bilinear3), 2, 2)
    assert r1.method == "bilinear-hyperplane"
    r2 = ct.count_N(bilinear_pair, sym_boxes(bilinear_pair), 2, 2)
    assert r2.method == "fixed-y-linear"


def test_count_N_rejects_bad_P(bilinear3, sym_boxes):
    with pytest.raises(ValidationError):
        ct.count_N(bilinear3, sym_boxes(bilinear3), 1, 2)


def test_count_N_just_above_one(bilinear3, sym_boxes):
    # P = 1.5 restricts to {-1,0,1}^6; cross-checked against the oracle
    boxes = sym_boxes(bilinear3)
    rs = oracles.raw(bilinear3)
    want = oracles.o_count_N(rs, [(-1, 1)] * 3, [(-1, 1)] * 3)
    assert ct.count_N(bilinear3, boxes, 1.5, 1.5).count == want


def test_count_N_empty_box_is_zero(x1y1):
    # a box holding no integer points at this P is a zero count, not an
    # error
    boxes = fm.parse_boxes("x1 1/3 1/2\ny1 1/3 1/2\n", 1, 1)
    res = ct.count_N(x1y1, boxes, 1.2, 1.2)
    assert res.count == 0


def test_count_N_budget(bilinear3, sym_boxes):
    with pytest.raises(BudgetExceededError):
        ct.count_N(bilinear3, sym_boxes(bilinear3), 30, 30, budget=100,
                   method="brute")


def test_count_N_threads_match(bilinear3, sym_boxes):
    boxes = sym_boxes(bilinear3)
    a = ct.count_N(bilinear3, boxes, 3, 3, method="brute")
    b = ct.count_N(bilinear3, boxes, 3, 3, method="brute", threads=4)
    assert a.count == b.count


def test_count_N_asymmetric_boxes(bilinear3):
    boxes = fm.parse_boxes("x1 0 1\ny2 -1/2 1/2\n", 3, 3)
    rs = oracles.raw(bilinear3)
    got = ct.count_N(bilinear3, boxes, 3, 3)
    want = oracles.o_count_N(rs, [r for r in boxes.x_ranges(3)],
                             [r for r in boxes.y_ranges(3)])
    assert got.count == want
    brute = ct.count_N(bilinear3, boxes, 3, 3, method="brute")
    assert brute.count == want


def test_count_aux_golden(corpus, golden):
    for name, s in corpus.items():
        for row in golden[name]["aux"]:
            got = ct.count_aux(s, row["side"], row["beta"], row["B"])
            assert got == row["count"], (name, row)


def test_count_aux_identity_closed_form(bilinear3):
    # identity matrix: condition |y_l| < 1 forces y = 0
    for B in (2, 3, 7):
        assert ct.count_aux(bilinear3, 1, [1], B) == 1


def test_count_aux_monotone_in_B(mixed21):
    vals = [ct.count_aux(mixed21, 2, [1], B) for B in (2, 3, 4, 5)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_count_aux_beta_scaling_invariance(mixed21, bilinear_pair):
    assert ct.count_aux(mixed21, 2, [1], 4) == \
        ct.count_aux(mixed21, 2, [2], 4)
    assert ct.count_aux(bilinear_pair, 1, [1, -1], 3) == \
        ct.count_aux(bilinear_pair, 1, [Fraction(1, 2), Fraction(-1, 2)], 3)


def test_count_aux_float_beta_close_to_exact(mixed21):
    # far from ties, the float path agrees with the exact path
    exact = ct.count_aux(mixed21, 2, [Fraction(1, 3)], 3)
    fl = ct.count_aux(mixed21, 2, [1 / 3], 3)
    assert exact == fl


def test_count_M_zero_alpha_full_box(bilinear3, diag21):
    assert ct.count_M(bilinear3, 1, [0], 3, 3, Fraction(1, 4)) == 5 ** 3
    assert ct.count_M(diag21, 1, [0], 3, 2, Fraction(1, 4)) == \
        5 ** 3 * 3 ** 3


def test_count_M_parity_example(bilinear3):
    # alpha = 1/2: dist(y_l / 2) < 1/4 forces every y_l even
    assert ct.count_M(bilinear3, 1, [Fraction(1, 2)], 3, 3,
                      Fraction(1, 4)) == 27


def test_count_M_monotone_in_bound(mixed21):
    a = ct.count_M(mixed21, 1, [Fraction(1, 3)], 3, 3, Fraction(1, 8))
    b = ct.count_M(mixed21, 1, [Fraction(1, 3)], 3, 3, Fraction(1, 4))
    assert a <= b


def test_count_M_matches_oracle(corpus):
    rng = np.random.default_rng(2)
    for name, s in corpus.items():
        rs = oracles.raw(s)
        for side in (1, 2):
            alpha = [Fraction(int(rng.integers(0, 5)), 6)
                     for _ in range(s.R)]
            got = ct.count_M(s, side, alpha, 3, 3, Fraction(1, 5))
            want = oracles.o_count_M(rs, side, alpha, 3, 3, Fraction(1, 5))
            assert got == want, (name, side, alpha)


def test_count_M_rejects_bad_bound(bilinear3):
    with pytest.raises(ValidationError):
        ct.count_M(bilinear3, 1, [0], 3, 3, 0)


def test_singular_values_basic():
    sv = ct.singular_values(np.eye(4))
    assert sv.values == (1.0, 1.0, 1.0, 1.0)
    sv = ct.singular_values(np.diag([3.0, -4.0]))
    assert sv.values == (4.0, 3.0)


def test_singular_values_det_product():
    rng = np.random.default_rng(17)
    for n in (2, 3, 4, 5, 6):
        M = rng.integers(-9, 10, (n, n)).astype(float)
        sv = ct.singular_values(M)
        prod = float(np.prod(sv.values))
        det = abs(np.linalg.det(M))
        assert prod == pytest.approx(det, rel=1e-9, abs=1e-9)
        assert sv.values[0] <= n * np.max(np.abs(M)) + 1e-12


def test_singular_values_rejects_nan():
    with pytest.raises(ValidationError):
        ct.singular_values(np.array([[np.nan, 0.0], [0.0, 1.0]]))


def test_ellipsoid_zero_matrix():
    n = 3
    count, ok, ratio, C = ct.ellipsoid_count(np.zeros((n, n)), 2)
    assert count == 5 ** n
    assert ratio == pytest.approx(5 ** n / 2 ** n)
    assert C == 1.0


def test_ellipsoid_large_diagonal():
    count, ok, ratio, C = ct.ellipsoid_count(10.0 * np.eye(2), 2)
    assert count == 1  # only y = 0 satisfies |10 y|_inf <= 2


def test_ellipsoid_box_bound_and_oracle():
    rng = np.random.default_rng(23)
    for _ in range(20):
        n = int(rng.integers(2, 4))
        H = rng.integers(-5, 6, (n, n)).astype(float)
        B = int(rng.integers(2, 6))
        count, ok, ratio, C = ct.ellipsoid_count(H, B)
        assert count <= (2 * B + 1) ** n
        assert count == oracles.o_ellipsoid_count(H.astype(int).tolist(), B)


def test_minors_vector_order_one_flattens(diag21n2):
    x = [3, 5]
    D = ct.minors_vector(diag21n2, [1], 1, x)
    Ht = ct.h_tilde(diag21n2, [1], x)
    assert D == pytest.approx(list(Ht.reshape(-1)))


def test_minors_diag_example(diag21n2):
    # H~ = diag(2a, 2b); the 2x2 minor is 4ab with d/da = 4b
    a, b = 3, 5
    D = ct.minors_vector(diag21n2, [1], 2, [a, b])
    assert D == [pytest.approx(4 * a * b)]
    J = ct.jacobian_minors(diag21n2, [1], 2, [a, b])
    assert J[0][0] == pytest.approx(4 * b)
    assert J[0][1] == pytest.approx(4 * a)


def test_minors_match_singular_value_products(mixed21):
    rng = np.random.default_rng(31)
    n = mixed21.n1
    for _ in range(20):
        x = [int(v) for v in rng.integers(-6, 7, n)]
        if all(v == 0 for v in x):
            continue
        lam = np.linalg.svd(ct.h_tilde(mixed21, [1], x),
                            compute_uv=False)
        for i in (1, 2):
            D = ct.minors_vector(mixed21, [1], i, x)
            dmax = max(abs(v) for v in D)
            prod = float(np.prod(lam[:i]))
            assert dmax <= prod * (1 + 1e-9) * n ** (2 * i)
            assert prod <= dmax * n ** (2 * i) + 1e-12


def test_jacobian_minors_match_finite_differences(mixed21):
    # minors are polynomials of low degree: exact central differences
    x = [2, -3]
    i = 2
    J = ct.jacobian_minors(mixed21, [1], i, x)
    for kcol in range(2):
        xp = list(x)
        xm = list(x)
        xp[kcol] += 1
        xm[kcol] -= 1
        Dp = ct.minors_vector(mixed21, [1], i, xp)
        Dm = ct.minors_vector(mixed21, [1], i, xm)
        for j in range(len(Dp)):
            # degree-2 polynomial: central difference is exact
            assert (Dp[j] - Dm[j]) / 2 == pytest.approx(J[j][kcol])


def test_kcell_zero_point_in_K0(diag21n2):
    spec = ct.KCellSpec(0, (1.0,), 1.0, fm.PencilWeights([1]))
    assert ct.k_cell_count(diag21n2, spec) >= 1  # x = 0 qualifies


def test_kcell_spec_validation():
    with pytest.raises(ValidationError):
        ct.KCellSpec(1, (1.0,), 2.0, fm.PencilWeights([1]))
    with pytest.raises(ValidationError):
        ct.KCellSpec(1, (1.0, 2.0), 2.0, fm.PencilWeights([1]))
    with pytest.raises(ValidationError):
        ct.KCellSpec(0, (0.5,), 2.0, fm.PencilWeights([1]))


def test_kcell_partition_small(diag21n2, mixed21):
    for s in (diag21n2, mixed21):
        for B in (2, 4):
            specs = ct.dyadic_kcell_specs(s, [1], B)
            total = sum(ct.k_cell_count(s, sp) for sp in specs)
            assert total == (2 * B + 1) ** s.n1, (s, B)


def test_kcell_trichotomy_has_witness(diag21n2, mixed21):
    # one of the three dyadic alternatives must carry N2aux: some cell in
    # the decomposition is nonempty whenever the box is
    for s in (diag21n2, mixed21):
        B = 4
        n2aux = ct.count_aux(s, 2, [1], B)
        specs = ct.dyadic_kcell_specs(s, [1], B)
        needed = []
        logB = math.log(B)
        for sp in specs:
            cnt = ct.k_cell_count(s, sp)
            if cnt == 0:
                continue
            scale = 2.0 ** sum(math.log2(e) for e in sp.E[:sp.k])
            lhs = scale * n2aux / (B ** s.n1 * max(logB, 1.0) ** s.n1)
            needed.append(lhs / cnt)
        assert needed and min(needed) < math.inf
