import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from biforms import forms as fm
from biforms.util import ValidationError

import oracles


DIAG3 = """
n1 3
n2 3
d1 1
d2 1
R 1
form 1
1 | 1 = 1
2 | 2 = 1
3 | 3 = 1
"""


def test_parse_diagonal_bilinear():
    s = fm.parse_system(DIAG3)
    assert (s.n1, s.n2, s.d1, s.d2, s.R) == (3, 3, 1, 1, 1)
    A, = fm.bilinear_matrices(s)
    assert np.array_equal(A, np.eye(3, dtype=np.int64))


def test_parse_single_monomial_21():
    s = fm.parse_system("n1 2\nn2 2\nd1 2\nd2 1\nR 1\nform 1\n1 1 | 1 = 1\n")
    assert s.tensor(0)[((0, 0), (0,))] == 1


def test_parse_index_out_of_range():
    bad = "n1 3\nn2 3\nd1 1\nd2 1\nR 1\nform 1\n4 | 1 = 1\n"
    with pytest.raises(ValidationError, match="out of range"):
        fm.parse_system(bad)


def test_parse_duplicate_header():
    bad = "n1 3\nn1 3\nn2 3\nd1 1\nd2 1\nR 1\nform 1\n1 | 1 = 1\n"
    with pytest.raises(ValidationError, match="duplicate"):
        fm.parse_system(bad)


def test_parse_empty_form():
    bad = "n1 1\nn2 1\nd1 1\nd2 1\nR 1\nform 1\n"
    with pytest.raises(ValidationError, match="empty"):
        fm.parse_system(bad)


def test_parse_serialize_roundtrip(corpus):
    for name, s in corpus.items():
        again = fm.parse_system(fm.serialize_system(s))
        assert again.coeffs == s.coeffs, name
        for r in range(s.R):
            assert again.tensor(r) == s.tensor(r)


def test_evaluate_hand_values(bilinear3):
    assert fm.evaluate(bilinear3, (1, 2, 3), (3, 2, 1)) == (10,)
    assert fm.evaluate(bilinear3, (0, 0, 0), (5, -7, 2)) == (0,)
    s = fm.parse_system("n1 2\nn2 2\nd1 2\nd2 1\nR 1\nform 1\n1 1 | 1 = 1\n")
    assert fm.evaluate(s, (2, 0), (5, 7)) == (20,)


def test_evaluate_length_mismatch(bilinear3):
    with pytest.raises(ValidationError):
        fm.evaluate(bilinear3, (1, 2), (1, 2, 3))


@settings(max_examples=60, deadline=None)
@given(st.integers(-4, 4), st.integers(-4, 4),
       st.lists(st.integers(-3, 3), min_size=6, max_size=6))
def test_bihomogeneity_scaling(lam, mu, pt):
    s = fm.parse_system(DIAG3)
    x, y = pt[:3], pt[3:]
    base = fm.evaluate(s, x, y)
    scaled = fm.evaluate(s, [lam * v for v in x], [mu * v for v in y])
    assert scaled == tuple(lam ** s.d1 * mu ** s.d2 * v for v in base)


def test_multilinear_unit_vectors(bilinear3):
    assert fm.multilinear_eval(bilinear3, [1], [(1, 0, 0)], [(1, 0, 0)]) == 1
    s21 = fm.parse_system("n1 2\nn2 2\nd1 2\nd2 1\nR 1\nform 1\n1 1 | 1 = 1\n")
    assert fm.multilinear_eval(s21, [1], [(1, 0), (1, 0)], [(1, 0)]) == 2
    assert fm.multilinear_eval(s21, [1], [(1, 0), (0, 0)], [(1, 0)]) == 0


def test_multilinear_matches_oracle(corpus):
    rng = np.random.default_rng(3)
    for name, s in corpus.items():
        rs = oracles.raw(s)
        beta = [1] * s.R
        for _ in range(10):
            xs = [tuple(int(v) for v in rng.integers(-3, 4, s.n1))
                  for _ in range(s.d1)]
            ys = [tuple(int(v) for v in rng.integers(-3, 4, s.n2))
                  for _ in range(s.d2)]
            got = fm.multilinear_eval(s, beta, xs, ys)
            assert Fraction(got) == oracles.o_gamma(rs, beta, xs, ys), name


def test_polarization_identity(corpus):
    # Gamma at repeated arguments recovers d1! d2! (beta.F)
    rng = np.random.default_rng(5)
    for s in corpus.values():
        fact = math.factorial(s.d1) * math.factorial(s.d2)
        beta = [1] + [0] * (s.R - 1)
        for _ in range(10):
            x = tuple(int(v) for v in rng.integers(-3, 4, s.n1))
            y = tuple(int(v) for v in rng.integers(-3, 4, s.n2))
            g = fm.multilinear_eval(s, beta, [x] * s.d1, [y] * s.d2)
            assert g == fact * fm.evaluate(s, x, y)[0]


def test_beta_sup_norm_examples(bilinear3):
    assert fm.beta_sup_norm(bilinear3, [1]) == 1
    s21 = fm.parse_system("n1 2\nn2 2\nd1 2\nd2 1\nR 1\nform 1\n1 1 | 1 = 1\n")
    assert fm.beta_sup_norm(s21, [1]) == 1
    cross = fm.parse_system("n1 2\nn2 1\nd1 2\nd2 1\nR 1\nform 1\n1 2 | 1 = 2\n")
    assert fm.beta_sup_norm(cross, [1]) == 1  # 2 x1 x2 y1 splits evenly


def test_beta_sup_norm_is_norm(bilinear_pair):
    rng = np.random.default_rng(11)
    for _ in range(25):
        b1 = [Fraction(int(v), 3) for v in rng.integers(-6, 7, 2)]
        b2 = [Fraction(int(v), 2) for v in rng.integers(-6, 7, 2)]
        if all(v == 0 for v in b1) or all(v == 0 for v in b2) or \
                all(a + b == 0 for a, b in zip(b1, b2)):
            continue
        n1 = fm.beta_sup_norm(bilinear_pair, b1)
        n2 = fm.beta_sup_norm(bilinear_pair, b2)
        ns = fm.beta_sup_norm(bilinear_pair, [a + b for a, b in zip(b1, b2)])
        assert ns <= n1 + n2
        assert fm.beta_sup_norm(bilinear_pair, [2 * v for v in b1]) == 2 * n1


def test_beta_sup_norm_zero_rejected(bilinear3):
    with pytest.raises(ValidationError):
        fm.beta_sup_norm(bilinear3, [0])


def test_bilinear_matrices_transpose_convention():
    s = fm.parse_system("n1 2\nn2 2\nd1 1\nd2 1\nR 1\nform 1\n1 | 2 = 1\n")
    A, = fm.bilinear_matrices(s)   # x1 y2 -> row 2 (y), column 1 (x)
    assert A[1, 0] == 1 and np.count_nonzero(A) == 1


def test_bilinear_matrices_roundtrip(bilinear_pair):
    rng = np.random.default_rng(7)
    mats = fm.bilinear_matrices(bilinear_pair)
    for _ in range(100):
        x = rng.integers(-5, 6, bilinear_pair.n1)
        y = rng.integers(-5, 6, bilinear_pair.n2)
        vals = fm.evaluate(bilinear_pair, x.tolist(), y.tolist())
        for A, v in zip(mats, vals):
            assert y @ A @ x == v


def test_h_slices_diagonal(diag21n2):
    slices, h_of_y = fm.h_slices(diag21n2, [1])
    assert np.array_equal(slices[0], np.diag([1.0, 0.0]))
    assert np.array_equal(slices[1], np.diag([0.0, 1.0]))
    assert np.array_equal(h_of_y([2, 3]), np.diag([2.0, 3.0]))


def test_h_slices_offdiagonal_split():
    s = fm.parse_system("n1 2\nn2 1\nd1 2\nd2 1\nR 1\nform 1\n1 2 | 1 = 2\n")
    slices, _ = fm.h_slices(s, [1])
    assert np.array_equal(slices[0], np.array([[0.0, 1.0], [1.0, 0.0]]))


def test_h_slices_quadratic_identity(mixed21):
    rng = np.random.default_rng(13)
    _, h_of_y = fm.h_slices(mixed21, [1])
    for _ in range(100):
        x = rng.integers(-4, 5, mixed21.n1).astype(float)
        y = rng.integers(-4, 5, mixed21.n2).astype(float)
        lhs = x @ h_of_y(y) @ x
        rhs = float(fm.evaluate(mixed21, [int(v) for v in x],
                                [int(v) for v in y])[0])
        assert lhs == pytest.approx(rhs, abs=1e-9)


def test_h_slices_wrong_bidegree(bilinear3):
    with pytest.raises(ValidationError):
        fm.h_slices(bilinear3, [1])


def test_boxes_parse_and_defaults():
    b = fm.parse_boxes("x1 -1/2 1/2\ny2 0 1\n", 2, 2)
    assert b.x_intervals[0] == (Fraction(-1, 2), Fraction(1, 2))
    assert b.x_intervals[1] == (Fraction(-1), Fraction(1))
    assert b.y_intervals[1] == (Fraction(0), Fraction(1))
    u = fm.parse_boxes("", 1, 1, unit_default=True)
    assert u.x_intervals[0] == (Fraction(0), Fraction(1))


def test_boxes_validation():
    with pytest.raises(ValidationError):
        fm.parse_boxes("x1 -2 1\n", 1, 1)
    with pytest.raises(ValidationError):
        fm.parse_boxes("x1 1 0\n", 1, 1)
    with pytest.raises(ValidationError):
        fm.parse_boxes("z1 0 1\n", 1, 1)


def test_box_integer_ranges():
    b = fm.BoxPair.symmetric(2, 2)
    assert b.x_ranges(2.5) == [(-2, 2), (-2, 2)]
    assert b.x_point_count(3) == 49
    u = fm.BoxPair.unit(1, 1)
    assert u.x_ranges(4) == [(0, 4)]


def test_jacobian_matches_finite_difference(mixed21):
    x, y = [2, -1], [1, 3]
    J = fm.jacobian(mixed21, x, y)
    f0 = fm.evaluate(mixed21, x, y)[0]
    # exact forward difference on polynomials via two evaluations
    for idx in range(4):
        xp = list(x)
        yp = list(y)
        h = 1
        if idx < 2:
            xp[idx] += h
        else:
            yp[idx - 2] += h
        f1 = fm.evaluate(mixed21, xp, yp)[0]
        # degree <= 2 in x, 1 in y: central difference is exact for y,
        # check x entries via the symmetric difference
        xm = list(x)
        ym = list(y)
        if idx < 2:
            xm[idx] -= h
        else:
            ym[idx - 2] -= h
        fm1 = fm.evaluate(mixed21, xm, ym)[0]
        assert (f1 - fm1) / 2 == J[0][idx]
