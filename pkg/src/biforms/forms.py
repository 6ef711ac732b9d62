"""Systems of bihomogeneous forms with exact integer coefficients.

A system holds R forms of common bidegree (d1, d2) in variable blocks
x = (x_1..x_{n1}), y = (y_1..y_{n2}).  Monomials are keyed by sorted
multi-indices; the symmetrised coefficient tensor is recovered by
dividing each raw coefficient by the number of distinct arrangements of
its multi-index, so tensor * d1! * d2! is always an integer.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations

from .util import ValidationError, parse_rational, scaled_interval_range


def nperm(idx):
    """Number of distinct arrangements of a sorted multi-index."""
    total = math.factorial(len(idx))
    run = 1
    for a, b in zip(idx, idx[1:]):
        if a == b:
            run += 1
        else:
            total //= math.factorial(run)
            run = 1
    return total // math.factorial(run)


def multfact(idx):
    # d! / nperm(idx) = product of multiplicities factorial
    return math.factorial(len(idx)) // nperm(idx)


@dataclass(frozen=True)
class BihomSystem:
    """Immutable system of R bihomogeneous forms of bidegree (d1, d2).

    coeffs[r] maps (j, k) -> integer raw coefficient, where j and k are
    sorted 0-based multi-indices of lengths d1 and d2.
    """

    n1: int
    n2: int
    d1: int
    d2: int
    R: int
    coeffs: tuple  # tuple of dicts {(j, k): int}

    def __post_init__(self):
        for name in ("n1", "n2", "d1", "d2", "R"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if len(self.coeffs) != self.R:
            raise ValidationError("coefficient table does not match R")
        for r, mono in enumerate(self.coeffs):
            if not mono or all(c == 0 for c in mono.values()):
                raise ValidationError(f"form {r + 1} is empty")
            for (j, k), c in mono.items():
                if len(j) != self.d1 or len(k) != self.d2:
                    raise ValidationError("multi-index length mismatch")
                if tuple(sorted(j)) != j or tuple(sorted(k)) != k:
                    raise ValidationError("multi-index not canonical")
                if any(a < 0 or a >= self.n1 for a in j):
                    raise ValidationError("x index out of range")
                if any(a < 0 or a >= self.n2 for a in k):
                    raise ValidationError("y index out of range")
                if not isinstance(c, int):
                    raise ValidationError("coefficients must be integers")

    # -- symmetric tensor -------------------------------------------------

    def tensor(self, r):
        """Symmetrised coefficient tensor of form r at canonical indices."""
        return {jk: Fraction(c, nperm(jk[0]) * nperm(jk[1]))
                for jk, c in self.coeffs[r].items()}

    def tensor_keys(self):
        keys = set()
        for mono in self.coeffs:
            keys.update(mono)
        return sorted(keys)

    def max_abs_coeff(self):
        return max(abs(c) for mono in self.coeffs for c in mono.values())

    def is_bilinear(self):
        return self.d1 == 1 and self.d2 == 1


def make_system(n1, n2, d1, d2, monomial_lists):
    """Build a system from per-form lists of ((j...), (k...), coeff).

    Indices are 0-based and need not be sorted; duplicate monomials
    accumulate.
    """
    coeffs = []
    for monos in monomial_lists:
        d = {}
        for j, k, c in monos:
            key = (tuple(sorted(j)), tuple(sorted(k)))
            d[key] = d.get(key, 0) + int(c)
        coeffs.append({jk: c for jk, c in d.items() if c != 0})
    return BihomSystem(n1, n2, d1, d2, len(coeffs), tuple(coeffs))


# -- parsing ---------------------------------------------------------------

def parse_system(text):
    """Parse the line-oriented system definition format.

    Header: lines "n1 N", "n2 N", "d1 N", "d2 N", "R N" (once each).
    Then "form r" sections with one monomial per line:
        j1 ... jd1 | k1 ... kd2 = coeff
    '#' starts a comment, blank lines are skipped, indices are 1-based.
    """
    header = {}
    forms = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.replace(":", " ").split()
        key = toks[0].lower()
        if key in ("n1", "n2", "d1", "d2", "r"):
            if len(toks) != 2:
                raise ValidationError(f"line {lineno}: malformed header")
            if key in header:
                raise ValidationError(f"line {lineno}: duplicate header {key}")
            try:
                header[key] = int(toks[1])
            except ValueError:
                raise ValidationError(f"line {lineno}: bad integer") from None
            continue
        if key == "form":
            if len(toks) != 2:
                raise ValidationError(f"line {lineno}: malformed form header")
            current = int(toks[1])
            if current in forms:
                raise ValidationError(f"line {lineno}: duplicate form {current}")
            forms[current] = []
            continue
        # monomial line
        if current is None:
            raise ValidationError(f"line {lineno}: monomial before form header")
        if "|" not in line or "=" not in line:
            raise ValidationError(f"line {lineno}: malformed monomial")
        left, right = line.split("=", 1)
        xs_part, ys_part = left.split("|", 1)
        try:
            j = tuple(int(t) for t in xs_part.split())
            k = tuple(int(t) for t in ys_part.split())
            c = int(right.strip())
        except ValueError:
            raise ValidationError(f"line {lineno}: malformed monomial") from None
        forms[current].append((j, k, c, lineno))

    missing = [k for k in ("n1", "n2", "d1", "d2", "r") if k not in header]
    if missing:
        raise ValidationError(f"missing header fields: {', '.join(missing)}")
    n1, n2, d1, d2, R = (header[k] for k in ("n1", "n2", "d1", "d2", "r"))
    if set(forms) != set(range(1, R + 1)):
        raise ValidationError(f"expected forms 1..{R}, got {sorted(forms)}")

    monomial_lists = []
    for r in range(1, R + 1):
        monos = []
        for j, k, c, lineno in forms[r]:
            if len(j) != d1 or len(k) != d2:
                raise ValidationError(f"line {lineno}: expected {d1} x-indices "
                                      f"and {d2} y-indices")
            if any(t < 1 or t > n1 for t in j):
                raise ValidationError(f"line {lineno}: index out of range")
            if any(t < 1 or t > n2 for t in k):
                raise ValidationError(f"line {lineno}: index out of range")
            monos.append((tuple(t - 1 for t in j), tuple(t - 1 for t in k), c))
        if not monos:
            raise ValidationError(f"form {r} is empty")
        monomial_lists.append(monos)
    return make_system(n1, n2, d1, d2, monomial_lists)


def serialize_system(system):
    lines = [f"n1 {system.n1}", f"n2 {system.n2}",
             f"d1 {system.d1}", f"d2 {system.d2}", f"R {system.R}"]
    for r in range(system.R):
        lines.append(f"form {r + 1}")
        for (j, k) in sorted(system.coeffs[r]):
            c = system.coeffs[r][(j, k)]
            js = " ".join(str(t + 1) for t in j)
            ks = " ".join(str(t + 1) for t in k)
            lines.append(f"{js} | {ks} = {c}")
    return "\n".join(lines) + "\n"


# -- weights ---------------------------------------------------------------

class PencilWeights:
    """Weight vector for the pencil beta . F; exact when built from
    ints/Fractions, binary64 otherwise."""

    def __init__(self, values):
        vals = tuple(values)
        if not vals:
            raise ValidationError("empty weight vector")
        self.values = tuple(
            v if isinstance(v, (int, Fraction)) else float(v) for v in vals)
        self.is_exact = all(isinstance(v, (int, Fraction)) for v in self.values)
        if all(v == 0 for v in self.values):
            raise ValidationError("weights must not be all zero")

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def scaled_integers(self):
        """Return (integer weight vector, positive scale s) with values*s
        integral.  Only valid for exact weights."""
        assert self.is_exact
        den = 1
        for v in self.values:
            f = Fraction(v)
            den = den * f.denominator // math.gcd(den, f.denominator)
        return [int(Fraction(v) * den) for v in self.values], den


def as_weights(beta):
    return beta if isinstance(beta, PencilWeights) else PencilWeights(beta)


# -- boxes -----------------------------------------------------------------

@dataclass(frozen=True)
class BoxPair:
    """Closed boxes B1 x B2 with exact rational endpoints inside [-1,1]."""

    x_intervals: tuple  # ((lo, hi) Fractions) * n1
    y_intervals: tuple

    def __post_init__(self):
        for lo, hi in self.x_intervals + self.y_intervals:
            if lo > hi:
                raise ValidationError("empty interval in box")
            if lo < -1 or hi > 1:
                raise ValidationError("box must lie inside [-1,1] per axis")

    @classmethod
    def symmetric(cls, n1, n2):
        iv = (Fraction(-1), Fraction(1))
        return cls((iv,) * n1, (iv,) * n2)

    @classmethod
    def unit(cls, n1, n2):
        iv = (Fraction(0), Fraction(1))
        return cls((iv,) * n1, (iv,) * n2)

    def x_ranges(self, P):
        return [scaled_interval_range(lo, hi, P) for lo, hi in self.x_intervals]

    def y_ranges(self, P):
        return [scaled_interval_range(lo, hi, P) for lo, hi in self.y_intervals]

    def x_point_count(self, P):
        c = 1
        for lo, hi in self.x_ranges(P):
            c *= max(0, hi - lo + 1)
        return c

    def y_point_count(self, P):
        c = 1
        for lo, hi in self.y_ranges(P):
            c *= max(0, hi - lo + 1)
        return c

    def contains_x_zero(self, P):
        return all(lo <= 0 <= hi for lo, hi in self.x_ranges(P))

    def contains_y_zero(self, P):
        return all(lo <= 0 <= hi for lo, hi in self.y_ranges(P))

    def volume(self):
        v = Fraction(1)
        for lo, hi in self.x_intervals + self.y_intervals:
            v *= hi - lo
        return v

    def swap(self):
        return BoxPair(self.y_intervals, self.x_intervals)


def parse_boxes(text, n1, n2, unit_default=False):
    """Box file: lines "x<i> <rat> <rat>" / "y<i> <rat> <rat>".

    Omitted axes default to [-1,1], or [0,1] with unit_default.
    """
    default = (Fraction(0), Fraction(1)) if unit_default \
        else (Fraction(-1), Fraction(1))
    xs = [default] * n1
    ys = [default] * n2
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        if len(toks) != 3 or toks[0][0] not in "xy":
            raise ValidationError(f"line {lineno}: malformed box line")
        try:
            idx = int(toks[0][1:])
        except ValueError:
            raise ValidationError(f"line {lineno}: bad axis name") from None
        lo, hi = parse_rational(toks[1]), parse_rational(toks[2])
        if toks[0][0] == "x":
            if not 1 <= idx <= n1:
                raise ValidationError(f"line {lineno}: x axis out of range")
            xs[idx - 1] = (lo, hi)
        else:
            if not 1 <= idx <= n2:
                raise ValidationError(f"line {lineno}: y axis out of range")
            ys[idx - 1] = (lo, hi)
    return BoxPair(tuple(xs), tuple(ys))


# -- evaluation ------------------------------------------------------------

def evaluate(system, x, y):
    """Exact values (F_1(x,y), ..., F_R(x,y)) at integer points."""
    if len(x) != system.n1 or len(y) != system.n2:
        raise ValidationError("vector length mismatch")
    out = []
    for mono in system.coeffs:
        acc = 0
        for (j, k), c in mono.items():
            t = c
            for a in j:
                t *= x[a]
            for b in k:
                t *= y[b]
            acc += t
        out.append(acc)
    return tuple(out)


def evaluate_weighted(system, beta, x, y):
    beta = as_weights(beta)
    vals = evaluate(system, x, y)
    return sum(b * v for b, v in zip(beta, vals))


def jacobian(system, x, y):
    """Rows (dF_i/dx_1 .. dF_i/dx_n1, dF_i/dy_1 .. dF_i/dy_n2); exact on
    integer points, float on float points."""
    if len(x) != system.n1 or len(y) != system.n2:
        raise ValidationError("vector length mismatch")
    rows = []
    for mono in system.coeffs:
        row = [0] * (system.n1 + system.n2)
        for (j, k), c in mono.items():
            for pos in range(len(j)):
                t = c
                for q, a in enumerate(j):
                    if q != pos:
                        t *= x[a]
                for b in k:
                    t *= y[b]
                row[j[pos]] += t
            for pos in range(len(k)):
                t = c
                for a in j:
                    t *= x[a]
                for q, b in enumerate(k):
                    if q != pos:
                        t *= y[b]
                row[system.n1 + k[pos]] += t
        rows.append(row)
    return rows


def _perm_sum(vectors, idx):
    # sum over distinct arrangements sigma of idx of prod_a vectors[a][sigma_a]
    total = 0
    for sigma in set(permutations(idx)):
        t = 1
        for vec, a in zip(vectors, sigma):
            t *= vec[a]
        total += t
    return total


def multilinear_eval(system, beta, xs, ys):
    """The multilinear form Gamma_{beta.F} at d1 x-vectors and d2 y-vectors.

    Gamma_F(x~, y~) = d1! d2! sum_{j,k} F_{j,k} prod_a x^(a)_{j_a}
    prod_b y^(b)_{k_b}; exact for rational weights.
    """
    beta = as_weights(beta)
    if len(xs) != system.d1 or len(ys) != system.d2:
        raise ValidationError("wrong number of argument vectors")
    for v in xs:
        if len(v) != system.n1:
            raise ValidationError("x vector length mismatch")
    for v in ys:
        if len(v) != system.n2:
            raise ValidationError("y vector length mismatch")
    total = 0
    for b, mono in zip(beta, system.coeffs):
        if b == 0:
            continue
        acc = 0
        for (j, k), c in mono.items():
            px = _perm_sum(xs, j)
            if px == 0:
                continue
            py = _perm_sum(ys, k)
            if py == 0:
                continue
            # d1! d2! * tensor = c * multfact(j) * multfact(k), an integer
            acc += c * multfact(j) * multfact(k) * px * py
        total += b * acc
    return total


def beta_sup_norm(system, beta):
    """max_{j,k} |sum_r beta_r F^(r)_{j,k}| over the symmetric tensor.

    Equals (1/d1!d2!) times the largest mixed partial of beta.F.
    """
    beta = as_weights(beta)
    tensors = [system.tensor(r) for r in range(system.R)]
    best = None
    for key in system.tensor_keys():
        v = sum(b * t.get(key, Fraction(0)) for b, t in zip(beta, tensors))
        v = abs(v)
        if best is None or v > best:
            best = v
    return best


# -- bilinear / (2,1) structure -------------------------------------------

def bilinear_matrices(system):
    """Integer matrices A_i (n2 x n1) with F_i(x,y) = y^T A_i x."""
    import numpy as np
    if not system.is_bilinear():
        raise ValidationError("bilinear_matrices requires bidegree (1,1)")
    mats = []
    for mono in system.coeffs:
        A = np.zeros((system.n2, system.n1), dtype=np.int64)
        for ((j,), (k,)), c in mono.items():
            A[k, j] += c
        mats.append(A)
    return mats


def h_slices_exact(system, beta):
    """Slices H_beta(e_l) as Fraction matrices, l = 1..n2; requires (2,1)."""
    beta = as_weights(beta)
    if system.d1 != 2 or system.d2 != 1:
        raise ValidationError("h_slices requires bidegree (2,1)")
    n1, n2 = system.n1, system.n2
    slices = [[[Fraction(0)] * n1 for _ in range(n1)] for _ in range(n2)]
    for b, mono in zip(beta, system.coeffs):
        if b == 0:
            continue
        bf = Fraction(b) if not isinstance(b, float) else b
        for ((a, c), (k,)), coef in mono.items():
            # x_a x_c y_k: off-diagonal entries split the coefficient
            val = bf * coef if a == c else bf * Fraction(coef, 2)
            slices[k][a][c] += val
            if a != c:
                slices[k][c][a] += val
    return slices


def h_slices(system, beta):
    """Float slices H_beta(e_l) and the map y -> H_beta(y); bidegree (2,1)."""
    import numpy as np
    exact = h_slices_exact(system, beta)
    slices = [np.array([[float(v) for v in row] for row in M])
              for M in exact]

    def h_of_y(y):
        acc = np.zeros((system.n1, system.n1))
        for yl, M in zip(y, slices):
            acc += float(yl) * M
        return acc

    return slices, h_of_y


def y_linear_coeffs(system):
    """For d2 = 1: per form r, per y-index m, the x-polynomial {j: coeff}
    with F_r = sum_m c_{r,m}(x) y_m."""
    if system.d2 != 1:
        raise ValidationError("y_linear_coeffs requires d2 = 1")
    out = []
    for mono in system.coeffs:
        per_m = [dict() for _ in range(system.n2)]
        for (j, (k,)), c in mono.items():
            per_m[k][j] = per_m[k].get(j, 0) + c
        out.append(per_m)
    return out


def swap_xy(system):
    """The same system with the roles of x and y exchanged."""
    coeffs = tuple({(k, j): c for (j, k), c in mono.items()}
                   for mono in system.coeffs)
    return BihomSystem(system.n2, system.n1, system.d2, system.d1,
                       system.R, coeffs)
