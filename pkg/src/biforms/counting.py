"""Exact lattice-point counters: N(P1,P2), the auxiliary and linearised
counters, ellipsoid counts, and the dyadic singular-value cells.

All counts are exact integers.  Enumeration is vectorised with numpy in
int64 where value bounds allow, falling back to exact Python ints
otherwise; a point budget guards against runaway loops.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product

import numpy as np

from . import forms as fm
from .linalg import row_reduce
from .util import (BudgetExceededError, DEFAULT_BUDGET, STRICT_TOL,
                   ValidationError, open_sym_bound)

_INT64_SAFE = 2 ** 62


@dataclass
class CountResult:
    count: int
    enumerated: int
    method: str  # generic-brute | bilinear-hyperplane | fixed-y-linear


@dataclass
class SingularValues:
    values: tuple  # descending, with multiplicity

    def __iter__(self):
        return iter(self.values)


@dataclass
class KCellSpec:
    k: int
    E: tuple
    B: float
    beta: object

    def __post_init__(self):
        if self.k < 0:
            raise ValidationError("k must be >= 0")
        if len(self.E) != self.k + 1:
            raise ValidationError("need k+1 thresholds E_1..E_{k+1}")
        if any(a < b for a, b in zip(self.E, self.E[1:])) or self.E[-1] < 1:
            raise ValidationError("thresholds must be descending and >= 1")
        if self.B < 1:
            raise ValidationError("B must be >= 1")


# -- grids -------------------------------------------------------------

def _range_sizes(ranges):
    return [max(0, hi - lo + 1) for lo, hi in ranges]


def grid_array(ranges):
    """All integer points of a product of ranges, as an (N, d) int64 array."""
    sizes = _range_sizes(ranges)
    n = 1
    for s in sizes:
        n *= s
    if n == 0:
        return np.empty((0, len(ranges)), dtype=np.int64)
    axes = [np.arange(lo, hi + 1, dtype=np.int64) for lo, hi in ranges]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def iter_grid_chunks(ranges, max_rows=4_000_000):
    """Yield grid chunks, splitting along the first axis when needed."""
    sizes = _range_sizes(ranges)
    total = 1
    for s in sizes:
        total *= s
    if total == 0:
        return
    if total <= max_rows or len(ranges) == 1:
        yield grid_array(ranges)
        return
    lo, hi = ranges[0]
    rest = ranges[1:]
    for v in range(lo, hi + 1):
        for chunk in iter_grid_chunks(rest, max_rows):
            col = np.full((chunk.shape[0], 1), v, dtype=np.int64)
            yield np.concatenate([col, chunk], axis=1)


def _grid_total(ranges):
    total = 1
    for s in _range_sizes(ranges):
        total *= s
    return total


# -- count_N ------------------------------------------------------------


def _eval_forms_chunk(system, xfixed, ychunk):
    """Values of all forms at a fixed x over a chunk of y points (int64)."""
    N = ychunk.shape[0]
    out = np.zeros((N, system.R), dtype=np.int64)
    for r, mono in enumerate(system.coeffs):
        acc = np.zeros(N, dtype=np.int64)
        for (j, k), c in mono.items():
            t = c
            for a in j:
                t *= int(xfixed[a])
            if t == 0:
                continue
            term = np.full(N, t, dtype=np.int64)
            for b in k:
                term = term * ychunk[:, b]
            acc += term
        out[:, r] = acc
    return out


def _value_bound(system, P1, P2):
    b = 0
    for mono in system.coeffs:
        b += sum(abs(c) for c in mono.values())
    return b * (math.ceil(P1) ** system.d1) * (math.ceil(P2) ** system.d2)


def _count_brute(system, xr, yr, budget, threads=1):
    nx, ny = _grid_total(xr), _grid_total(yr)
    pairs = nx * ny
    if pairs > budget:
        raise BudgetExceededError(pairs, budget, "count_N brute force")
    if nx == 0 or ny == 0:
        return CountResult(0, 0, "generic-brute")
    sys_ = system
    if nx > ny:  # iterate the smaller block pointwise
        sys_ = fm.swap_xy(system)
        xr, yr = yr, xr
    mx = max(abs(v) for lo, hi in xr for v in (lo, hi))
    my = max(abs(v) for lo, hi in yr for v in (lo, hi))
    vectorised = _value_bound(sys_, mx + 1, my + 1) < _INT64_SAFE

    def run_slice(points):
        cnt = 0
        if vectorised:
            for x in points:
                for ychunk in iter_grid_chunks(yr):
                    vals = _eval_forms_chunk(sys_, x, ychunk)
                    cnt += int(np.count_nonzero(np.all(vals == 0, axis=1)))
        else:
            for x in points:
                for y in product(*[range(lo, hi + 1) for lo, hi in yr]):
                    if all(v == 0 for v in fm.evaluate(sys_, x, y)):
                        cnt += 1
        return cnt

    outer = list(product(*[range(lo, hi + 1) for lo, hi in xr]))
    if threads > 1 and len(outer) > 1:
        # partition on the leading coordinate; exact integer reduction,
        # so the result is independent of the split
        from concurrent.futures import ThreadPoolExecutor
        chunks = [outer[i::threads] for i in range(threads)]
        with ThreadPoolExecutor(max_workers=threads) as ex:
            count = sum(ex.map(run_slice, chunks))
    else:
        count = run_slice(outer)
    return CountResult(count, pairs, "generic-brute")


def _canonical_linear_key(mat_cols, ranges):
    """Canonical form of (columns, ranges) modulo axis permutation and
    per-axis sign flip; both are lattice bijections of the box."""
    items = []
    for col, (lo, hi) in zip(mat_cols, ranges):
        a = (lo, hi, col)
        b = (-hi, -lo, tuple(-v for v in col))
        items.append(min(a, b))
    items.sort()
    key = tuple(items)
    return key


def _count_linear_solutions(mat, ranges):
    """#{v integer in ranges : mat v = 0}, plus points enumerated.

    mat is a list of integer rows (the linear system), ranges the per
    coordinate bounds.
    """
    n = len(ranges)
    rows = [r for r in mat if any(v != 0 for v in r)]
    if not rows:
        return _grid_total(ranges), 0
    rref, pivots = row_reduce(rows)
    free = [c for c in range(n) if c not in pivots]
    free_ranges = [ranges[c] for c in free]
    total_free = _grid_total(free_ranges)
    if total_free == 0:
        return 0, 0
    if not free:
        ok = all(ranges[c][0] <= 0 <= ranges[c][1] for c in range(n))
        return (1 if ok else 0), 1
    grid = grid_array(free_ranges)  # (N, f)
    mask = np.ones(grid.shape[0], dtype=bool)
    for r, pc in enumerate(pivots):
        coeffs = [-rref[r][fc] for fc in free]
        den = 1
        for cf in coeffs:
            den = den * cf.denominator // math.gcd(den, cf.denominator)
        nums = np.array([int(cf * den) for cf in coeffs], dtype=np.int64)
        s = grid @ nums
        if den > 1:
            mask &= (s % den == 0)
        q = s // den  # exact where mask holds
        lo, hi = ranges[pc]
        mask &= (q >= lo) & (q <= hi)
    return int(np.count_nonzero(mask)), grid.shape[0]


def count_N(system, boxes, P1, P2, *, budget=DEFAULT_BUDGET, threads=1,
            method="auto"):
    """#{(x,y) integral : x/P1 in B1, y/P2 in B2, F(x,y) = 0} exactly.

    Closed boxes.  Bidegrees with a linear block (d1 = 1 or d2 = 1) get
    the fixed-block linear-solve path; anything else is brute force.
    """
    if P1 <= 1 or P2 <= 1:
        raise ValidationError("P1, P2 must exceed 1")
    xr = boxes.x_ranges(P1)
    yr = boxes.y_ranges(P2)
    if method not in ("auto", "brute", "linear"):
        raise ValidationError(f"unknown method {method}")
    if method == "brute" or (system.d1 > 1 and system.d2 > 1):
        return _count_brute(system, xr, yr, budget, threads)

    # linear-solve path: put the linear block on the inside
    if system.d2 == 1:
        sys_, outer_ranges, inner_ranges = system, xr, yr
    else:
        sys_, outer_ranges, inner_ranges = fm.swap_xy(system), yr, xr
    struct = fm.y_linear_coeffs(sys_)  # per form, per inner index: x-poly
    n_out = _grid_total(outer_ranges)
    if n_out == 0 or _grid_total(inner_ranges) == 0:
        return CountResult(0, 0, "fixed-y-linear")
    tag = "bilinear-hyperplane" if (system.is_bilinear() and system.R == 1) \
        else "fixed-y-linear"

    cache = {}
    count = 0
    enumerated = n_out
    n_in = len(inner_ranges)
    for xpt in product(*[range(lo, hi + 1) for lo, hi in outer_ranges]):
        # rows of the linear system for the inner block
        mat = []
        for r in range(sys_.R):
            row = []
            for m in range(n_in):
                acc = 0
                for j, c in struct[r][m].items():
                    t = c
                    for a in j:
                        t *= xpt[a]
                    acc += t
                row.append(acc)
            mat.append(row)
        cols = [tuple(mat[r][m] for r in range(sys_.R)) for m in range(n_in)]
        key = _canonical_linear_key(cols, inner_ranges)
        hit = cache.get(key)
        if hit is None:
            if enumerated > budget:
                raise BudgetExceededError(enumerated, budget, "count_N")
            hit = _count_linear_solutions(mat, inner_ranges)
            cache[key] = hit
            enumerated += hit[1]
        count += hit[0]
    return CountResult(count, enumerated, tag)


# -- aux / M counters ----------------------------------------------------

def _open_ranges(B, dim):
    a = open_sym_bound(B)
    return [(-a, a)] * dim


def _beta_int_and_threshold(system, beta, B, power):
    """Integerised weights plus the exact/float threshold tau * scale."""
    beta = fm.as_weights(beta)
    if beta.is_exact:
        ints, _den = beta.scaled_integers()
        norm = fm.beta_sup_norm(system, fm.PencilWeights(ints))
        Bf = Fraction(B) if not isinstance(B, float) else Fraction(B)
        tau = norm * Bf ** power
        return ints, tau, True
    vals = [float(v) for v in beta]
    norm = fm.beta_sup_norm(system, fm.PencilWeights(vals))
    return vals, float(norm) * float(B) ** power, False


def _strict_less(values, tau, exact):
    """Vectorised |values| < tau respecting the exactness policy."""
    if exact:
        # integer values against a Fraction threshold: |v|*den < num
        lim = tau
        num, den = lim.numerator, lim.denominator
        return np.abs(values) * den < num
    return np.abs(values) < tau - STRICT_TOL


def _aux_pair_structure(system, beta_ints, side):
    """For (2,1) systems: function x -> matrix M with the aux condition
    |M v|_inf < tau over the second block v."""
    slices = fm.h_slices_exact(system, fm.PencilWeights(beta_ints))
    n1, n2 = system.n1, system.n2
    # integer matrices: beta is integral so entries live in (1/2)Z; the
    # factor 2 in Gamma clears it.
    if side == 1:
        # Gamma(x, e_l, y) = 2 (x^T H(y))_l: rows l<=n1, columns m<=n2
        def mat(x):
            M = np.zeros((n1, n2), dtype=np.int64)
            for m in range(n2):
                S = slices[m]
                for l in range(n1):
                    acc = 0
                    for a in range(n1):
                        acc += 2 * S[a][l] * x[a]
                    M[l, m] = int(acc)
            return M
    else:
        # Gamma(x1, x2, e_l) = 2 x1^T H(e_l) x2: rows l<=n2, cols over x2
        def mat(x):
            M = np.zeros((n2, n1), dtype=np.int64)
            for l in range(n2):
                S = slices[l]
                for b in range(n1):
                    acc = 0
                    for a in range(n1):
                        acc += 2 * S[a][b] * x[a]
                    M[l, b] = int(acc)
            return M
    return mat


def count_aux(system, side, beta, B, *, budget=DEFAULT_BUDGET):
    """The auxiliary counter over open boxes (-B, B).

    side=1 counts (x^, y~) with |Gamma(x^, e_l, y~)| < |beta.F| B^(d1+d2-2)
    for every l <= n1; side=2 swaps the roles of the blocks.
    """
    if side not in (1, 2):
        raise ValidationError("side must be 1 or 2")
    beta = fm.as_weights(beta)
    d1, d2, n1, n2 = system.d1, system.d2, system.n1, system.n2
    weights, tau, exact = _beta_int_and_threshold(system, beta, B,
                                                  d1 + d2 - 2)

    if system.is_bilinear():
        A = fm.bilinear_matrices(system)
        Ab = sum(w * M for w, M in zip(weights, A))
        dim, T = ((n2, Ab.T) if side == 1 else (n1, Ab))
        # side 1: condition on y via A^T y; side 2: on x via A x
        ranges = _open_ranges(B, dim)
        total = _grid_total(ranges)
        if total > budget:
            raise BudgetExceededError(total, budget, "count_aux")
        count = 0
        Tm = np.asarray(T, dtype=np.int64 if exact else float)
        for chunk in iter_grid_chunks(ranges):
            vals = chunk @ Tm.T
            count += int(np.count_nonzero(
                np.all(_strict_less(vals, tau, exact), axis=1)))
        return count

    if d1 == 2 and d2 == 1 and exact:
        mat = _aux_pair_structure(system, weights, side)
        first_dim, second_dim = (n1, n2) if side == 1 else (n1, n1)
        r1 = _open_ranges(B, first_dim)
        r2 = _open_ranges(B, second_dim)
        total = _grid_total(r1) * _grid_total(r2)
        if total > budget:
            raise BudgetExceededError(total, budget, "count_aux")
        count = 0
        grid2 = grid_array(r2)
        for x in product(*[range(lo, hi + 1) for lo, hi in r1]):
            M = mat(np.array(x, dtype=np.int64))
            vals = grid2 @ M.T
            count += int(np.count_nonzero(
                np.all(_strict_less(vals, tau, exact), axis=1)))
        return count

    return _count_aux_generic(system, side, beta, B, tau, exact, budget)


def _count_aux_generic(system, side, beta, B, tau, exact, budget):
    d1, d2, n1, n2 = system.d1, system.d2, system.n1, system.n2
    if side == 1:
        nxv, nyv, nl = d1 - 1, d2, n1
    else:
        nxv, nyv, nl = d1, d2 - 1, n2
    a = open_sym_bound(B)
    dims = nxv * n1 + nyv * n2
    total = (2 * a + 1) ** dims
    if total > budget:
        raise BudgetExceededError(total, budget, "count_aux")
    rng = range(-a, a + 1)
    count = 0
    weights = list(beta)
    for pt in product(rng, repeat=dims):
        xs = [pt[i * n1:(i + 1) * n1] for i in range(nxv)]
        ys = [pt[nxv * n1 + i * n2: nxv * n1 + (i + 1) * n2]
              for i in range(nyv)]
        ok = True
        for l in range(nl):
            e = [0] * (n1 if side == 1 else n2)
            e[l] = 1
            if side == 1:
                g = fm.multilinear_eval(system, weights, xs + [e], ys)
            else:
                g = fm.multilinear_eval(system, weights, xs, ys + [e])
            if exact:
                if not abs(Fraction(g)) < tau:
                    ok = False
                    break
            elif not abs(g) < tau - STRICT_TOL:
                ok = False
                break
        if ok:
            count += 1
    return count


def _dist_mask_exact(values, q, bound):
    """dist(values/q) < bound for integer arrays, exact."""
    res = np.mod(values, q)
    res = np.minimum(res, q - res)
    bf = Fraction(bound)
    # res/q < bound  <=>  res * bound.den < bound.num * q
    return res * bf.denominator < bf.numerator * q


def _dist_mask_float(values, bound):
    d = np.abs(values - np.rint(values))
    return d < bound - STRICT_TOL


def count_M(system, side, alpha, P1, P2, bound, *, budget=DEFAULT_BUDGET):
    """The linearised counter M_side with dist-to-nearest-integer bound.

    side=1: x^ in (-P1,P1)^((d1-1)n1), y~ in (-P2,P2)^(d2 n2), and
    ||Gamma(x^, e_l, y~)|| < bound for every l <= n1; side=2 symmetric.
    """
    if side not in (1, 2):
        raise ValidationError("side must be 1 or 2")
    if bound <= 0:
        raise ValidationError("bound must be positive")
    if P1 <= 1 or P2 <= 1:
        raise ValidationError("P1, P2 must exceed 1")
    alpha = list(alpha)
    exact = all(isinstance(v, (int, Fraction)) for v in alpha)
    d1, d2, n1, n2 = system.d1, system.d2, system.n1, system.n2
    a1, a2 = open_sym_bound(P1), open_sym_bound(P2)

    if exact:
        den = 1
        for v in alpha:
            f = Fraction(v)
            den = den * f.denominator // math.gcd(den, f.denominator)
        aint = [int(Fraction(v) * den) for v in alpha]
        q = den
    else:
        aint = [float(v) for v in alpha]
        q = None

    if all(v == 0 for v in alpha):
        nx = (2 * a1 + 1) ** ((d1 - 1 if side == 1 else d1) * n1)
        ny = (2 * a2 + 1) ** ((d2 if side == 1 else d2 - 1) * n2)
        return nx * ny

    if system.is_bilinear():
        A = fm.bilinear_matrices(system)
        if exact:
            Aa = sum(w * M for w, M in zip(aint, A))
        else:
            Aa = sum(w * M.astype(float) for w, M in zip(aint, A))
        dim, T, a = ((n2, Aa.T, a2) if side == 1 else (n1, Aa, a1))
        ranges = [(-a, a)] * dim
        total = _grid_total(ranges)
        if total > budget:
            raise BudgetExceededError(total, budget, "count_M")
        count = 0
        for chunk in iter_grid_chunks(ranges):
            vals = chunk @ T.T
            if exact:
                mask = np.all(_dist_mask_exact(vals, q, bound), axis=1)
            else:
                mask = np.all(_dist_mask_float(vals, bound), axis=1)
            count += int(np.count_nonzero(mask))
        return count

    if d1 == 2 and d2 == 1 and exact:
        mat = _aux_pair_structure(system, aint, side)
        if side == 1:
            r1, r2 = [(-a1, a1)] * n1, [(-a2, a2)] * n2
        else:
            r1, r2 = [(-a1, a1)] * n1, [(-a1, a1)] * n1
        total = _grid_total(r1) * _grid_total(r2)
        if total > budget:
            raise BudgetExceededError(total, budget, "count_M")
        count = 0
        grid2 = grid_array(r2)
        for x in product(*[range(lo, hi + 1) for lo, hi in r1]):
            M = mat(np.array(x, dtype=np.int64))
            vals = grid2 @ M.T
            count += int(np.count_nonzero(
                np.all(_dist_mask_exact(vals, q, bound), axis=1)))
        return count

    return _count_M_generic(system, side, alpha, a1, a2, bound, exact, budget)


def _count_M_generic(system, side, alpha, a1, a2, bound, exact, budget):
    from .util import dist_to_int_float, dist_to_int_fraction
    d1, d2, n1, n2 = system.d1, system.d2, system.n1, system.n2
    if side == 1:
        nxv, nyv, nl = d1 - 1, d2, n1
    else:
        nxv, nyv, nl = d1, d2 - 1, n2
    dims1, dims2 = nxv * n1, nyv * n2
    total = (2 * a1 + 1) ** dims1 * (2 * a2 + 1) ** dims2
    if total > budget:
        raise BudgetExceededError(total, budget, "count_M")
    count = 0
    for pt1 in product(range(-a1, a1 + 1), repeat=dims1):
        xs = [pt1[i * n1:(i + 1) * n1] for i in range(nxv)]
        for pt2 in product(range(-a2, a2 + 1), repeat=dims2):
            ys = [pt2[i * n2:(i + 1) * n2] for i in range(nyv)]
            ok = True
            for l in range(nl):
                e = [0] * (n1 if side == 1 else n2)
                e[l] = 1
                if side == 1:
                    g = fm.multilinear_eval(system, alpha, xs + [e], ys)
                else:
                    g = fm.multilinear_eval(system, alpha, xs, ys + [e])
                if exact:
                    if not dist_to_int_fraction(Fraction(g)) < Fraction(bound):
                        ok = False
                        break
                elif not dist_to_int_float(float(g)) < bound - STRICT_TOL:
                    ok = False
                    break
            if ok:
                count += 1
    return count


# -- singular values, ellipsoids, minors, cells --------------------------

def singular_values(M):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValidationError("square matrix expected")
    if not np.all(np.isfinite(M)):
        raise ValidationError("matrix entries must be finite")
    s = np.linalg.svd(M, compute_uv=False)
    return SingularValues(tuple(float(v) for v in s))


def ellipsoid_count(H, B, *, audit_constant=None):
    """Exact #{y integral : |y|_inf <= B, |Hy|_inf <= B} with the
    singular-value bound diagnostics."""
    H = np.asarray(H, dtype=float)
    n = H.shape[0]
    if B < 1:
        raise ValidationError("B must be >= 1")
    if not np.all(np.isfinite(H)):
        raise ValidationError("matrix entries must be finite")
    a = math.floor(B)
    ranges = [(-a, a)] * n
    count = 0
    for chunk in iter_grid_chunks(ranges):
        vals = chunk.astype(float) @ H.T
        count += int(np.count_nonzero(
            np.all(np.abs(vals) <= B + STRICT_TOL, axis=1)))
    lam = np.linalg.svd(H, compute_uv=False)
    partials = 1.0 + np.cumprod(lam)
    istar = int(np.argmax(partials))
    ratio = count * float(partials[istar]) / float(B) ** n
    C = max(1.0, float(lam[0]) / B)
    if audit_constant is None:
        audit_constant = 3.0 ** n
    return count, bool(ratio <= audit_constant), ratio, C


def h_tilde_exact(system, beta, x):
    """The normalised slice matrix at x: row l is Gamma(x, e_., e_l) =
    2 x^T H_beta(e_l), divided by |beta.F|_inf.  Exact Fractions."""
    beta = fm.as_weights(beta)
    slices = fm.h_slices_exact(system, beta)
    norm = fm.beta_sup_norm(system, beta)
    if norm == 0:
        raise ValidationError("beta.F vanishes identically")
    n1, n2 = system.n1, system.n2
    rows = []
    for l in range(n2):
        S = slices[l]
        row = []
        for b in range(n1):
            acc = Fraction(0)
            for a in range(n1):
                acc += 2 * Fraction(S[a][b]) * x[a]
            row.append(acc / norm)
        rows.append(row)
    return rows


def h_tilde(system, beta, x):
    rows = h_tilde_exact(system, beta, x)
    return np.array([[float(v) for v in row] for row in rows])


def _minor_dets(rows, i):
    from itertools import combinations
    from .linalg import det_exact
    m, n = len(rows), len(rows[0])
    out = []
    for rs in combinations(range(m), i):
        for cs in combinations(range(n), i):
            out.append(det_exact([[rows[r][c] for c in cs] for r in rs]))
    return out


def minors_vector(system, beta, i, x):
    """All i x i minors of the normalised slice matrix at x, row-major
    over (row-subset, column-subset) pairs in lexicographic order."""
    if system.d1 != 2 or system.d2 != 1:
        raise ValidationError("minors_vector requires bidegree (2,1)")
    n = min(system.n1, system.n2)
    if not 1 <= i <= n:
        raise ValidationError("minor order out of range")
    rows = h_tilde_exact(system, beta, x)
    return [float(v) for v in _minor_dets(rows, i)]


def jacobian_minors(system, beta, i, x):
    """Jacobian of the minor vector, by exact differentiation.

    Each minor is multilinear in the matrix rows, and each row is linear
    in x, so d(det)/dx_k is a sum of dets with one row replaced by its
    x_k-coefficient row.
    """
    from itertools import combinations
    from .linalg import det_exact
    if system.d1 != 2 or system.d2 != 1:
        raise ValidationError("jacobian_minors requires bidegree (2,1)")
    beta = fm.as_weights(beta)
    slices = fm.h_slices_exact(system, beta)
    norm = fm.beta_sup_norm(system, beta)
    n1, n2 = system.n1, system.n2
    rows = h_tilde_exact(system, beta, x)
    # derivative of row l wrt x_k: 2 * H(e_l)[k, :] / norm
    drows = [[[2 * Fraction(slices[l][k][b]) / norm for b in range(n1)]
              for k in range(n1)] for l in range(n2)]
    jac = []
    for rs in combinations(range(n2), i):
        for cs in combinations(range(n1), i):
            grad = []
            for k in range(n1):
                acc = Fraction(0)
                for ri, r in enumerate(rs):
                    sub = []
                    for rr in rs:
                        src = drows[rr][k] if rr == r else rows[rr]
                        sub.append([src[c] for c in cs])
                    acc += det_exact(sub)
                grad.append(float(acc))
            jac.append(grad)
    return np.array(jac)


def _kcell_membership(lams, spec):
    """Vectorised cell test; lams is (N, n) descending singular values."""
    tol = STRICT_TOL
    k = spec.k
    E = np.asarray(spec.E, dtype=float)
    ok = np.ones(lams.shape[0], dtype=bool)
    for i in range(k):
        m = tol * max(1.0, E[i])
        ok &= lams[:, i] > E[i] / 2 + m
        ok &= lams[:, i] <= E[i] + m
    m = tol * max(1.0, E[k])
    for i in range(k, lams.shape[1]):
        ok &= lams[:, i] <= E[k] + m
    return ok


def k_cell_count(system, spec, *, budget=DEFAULT_BUDGET):
    """#{x integral, |x|_inf <= B} lying in the dyadic cell of spec."""
    if system.d1 != 2 or system.d2 != 1:
        raise ValidationError("k_cell_count requires bidegree (2,1)")
    if system.n1 != system.n2:
        raise ValidationError("k_cell_count requires n1 = n2")
    n = system.n1
    if spec.k > n:
        raise ValidationError("k out of range")
    a = math.floor(spec.B)
    total = (2 * a + 1) ** n
    if total > budget:
        raise BudgetExceededError(total, budget, "k_cell_count")
    lams = _kcell_singular_values(system, spec.beta, a, n)
    return int(np.count_nonzero(_kcell_membership(lams, spec)))


def _kcell_singular_values(system, beta, a, n):
    beta = fm.as_weights(beta)
    slices = fm.h_slices_exact(system, beta)
    norm = float(fm.beta_sup_norm(system, beta))
    slicesf = [np.array([[float(v) for v in row] for row in M])
               for M in slices]
    grid = grid_array([(-a, a)] * n).astype(float)
    N = grid.shape[0]
    mats = np.zeros((N, n, n))
    for l in range(n):
        # row l = 2 x^T H(e_l) / norm
        mats[:, l, :] = 2.0 * grid @ slicesf[l] / norm
    return np.linalg.svd(mats, compute_uv=False)


def dyadic_kcell_specs(system, beta, B):
    """The cell specs of the dyadic decomposition of [-B,B]^n: K_0(1)
    plus K_k(2^{e_1},...,2^{e_k},1) over k and descending e_i >= 1.

    The top exponent is capped by the a-priori bound on the largest
    singular value over the box.
    """
    beta = fm.as_weights(beta)
    n = system.n1
    norm = float(fm.beta_sup_norm(system, beta))
    slices = fm.h_slices_exact(system, beta)
    rowmax = 0.0
    for l in range(n):
        for b in range(n):
            rowmax = max(rowmax, sum(abs(float(slices[l][a][b]))
                                     for a in range(n)))
    lam_cap = n * 2.0 * rowmax * math.floor(B) / norm + 1.0
    emax = max(1, math.ceil(math.log2(lam_cap)))
    specs = [KCellSpec(0, (1.0,), B, beta)]

    def descending(k, top):
        if k == 0:
            yield ()
            return
        for e in range(1, top + 1):
            for rest in descending(k - 1, e):
                yield (e,) + rest

    for k in range(1, n + 1):
        for es in descending(k, emax):
            E = tuple(float(2 ** e) for e in es) + (1.0,)
            specs.append(KCellSpec(k, E, B, beta))
    return specs
