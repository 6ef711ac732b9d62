"""Exact linear algebra over the rationals and the integers.

Everything here works on plain Python ints / Fractions so that ranks,
kernels and solution counts are exact.  numpy is deliberately not used:
these routines back certified invariants and modular solution counts.
"""

from fractions import Fraction
from math import gcd


def _as_fraction_rows(mat):
    return [[Fraction(v) for v in row] for row in mat]


def row_reduce(mat):
    """Reduced row echelon form.

    Returns (rref, pivot_columns).  `mat` is a sequence of rows of
    ints/Fractions; the input is not modified.
    """
    rows = _as_fraction_rows(mat)
    m = len(rows)
    n = len(rows[0]) if m else 0
    pivots = []
    r = 0
    for c in range(n):
        pr = next((i for i in range(r, m) if rows[i][c] != 0), None)
        if pr is None:
            continue
        rows[r], rows[pr] = rows[pr], rows[r]
        pv = rows[r][c]
        rows[r] = [v / pv for v in rows[r]]
        for i in range(m):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == m:
            break
    return rows, pivots


def exact_rank(mat):
    if not mat:
        return 0
    _, pivots = row_reduce(mat)
    return len(pivots)


def exact_nullspace(mat, ncols=None):
    """Basis of {v : Mv = 0} over Q, as lists of Fractions."""
    if not mat:
        return [[Fraction(1) if i == j else Fraction(0) for i in range(ncols)]
                for j in range(ncols or 0)]
    n = len(mat[0])
    rref, pivots = row_reduce(mat)
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for fc in free:
        v = [Fraction(0)] * n
        v[fc] = Fraction(1)
        for r, pc in enumerate(pivots):
            v[pc] = -rref[r][fc]
        basis.append(v)
    return basis


def det_exact(mat):
    """Determinant of a square matrix of ints/Fractions, exact."""
    rows = _as_fraction_rows(mat)
    n = len(rows)
    det = Fraction(1)
    for c in range(n):
        pr = next((i for i in range(c, n) if rows[i][c] != 0), None)
        if pr is None:
            return Fraction(0)
        if pr != c:
            rows[c], rows[pr] = rows[pr], rows[c]
            det = -det
        pv = rows[c][c]
        det *= pv
        for i in range(c + 1, n):
            if rows[i][c] != 0:
                f = rows[i][c] / pv
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[c])]
    return det


def integerize(vec):
    """Scale a rational vector to a primitive integer vector (gcd 1).

    Sign convention: the first nonzero entry is positive.  Returns a list
    of ints; the zero vector maps to itself.
    """
    fr = [Fraction(v) for v in vec]
    if all(v == 0 for v in fr):
        return [0] * len(fr)
    den = 1
    for v in fr:
        den = den * v.denominator // gcd(den, v.denominator)
    ints = [int(v * den) for v in fr]
    g = 0
    for v in ints:
        g = gcd(g, abs(v))
    ints = [v // g for v in ints]
    lead = next(v for v in ints if v != 0)
    if lead < 0:
        ints = [-v for v in ints]
    return ints


def smith_diagonal(mat):
    """Elementary divisors s_1 | s_2 | ... of an integer matrix.

    Plain gcd based reduction; fine for the small matrices (<= ~8x8)
    that appear here.  Returns the nonnegative diagonal, zeros trimmed.
    """
    a = [[int(v) for v in row] for row in mat]
    m = len(a)
    n = len(a[0]) if m else 0
    divisors = []
    top = 0
    while top < min(m, n):
        # find a nonzero pivot
        piv = None
        for i in range(top, m):
            for j in range(top, n):
                if a[i][j] != 0:
                    piv = (i, j)
                    break
            if piv:
                break
        if piv is None:
            break
        i0, j0 = piv
        a[top], a[i0] = a[i0], a[top]
        for row in a:
            row[top], row[j0] = row[j0], row[top]
        while True:
            # clear column
            changed = False
            for i in range(top + 1, m):
                while a[i][top] != 0:
                    q = a[top][top] and a[i][top] // a[top][top]
                    a[i] = [x - q * y for x, y in zip(a[i], a[top])]
                    if a[i][top] != 0:
                        a[top], a[i] = a[i], a[top]
                        changed = True
            # clear row
            for j in range(top + 1, n):
                while a[top][j] != 0:
                    q = a[top][top] and a[top][j] // a[top][top]
                    for row in a:
                        row[j] -= q * row[top]
                    if a[top][j] != 0:
                        for row in a:
                            row[top], row[j] = row[j], row[top]
                        changed = True
            if not changed:
                break
        # divisibility fix-up: pivot must divide the remaining block
        d = abs(a[top][top])
        fixed = True
        for i in range(top + 1, m):
            for j in range(top + 1, n):
                if a[i][j] % d != 0:
                    a[top] = [x + y for x, y in zip(a[top], a[i])]
                    fixed = False
                    break
            if not fixed:
                break
        if not fixed:
            continue
        divisors.append(d)
        top += 1
    return divisors


def solve_mod_p(mat, rhs, p):
    """Solve M v = b over F_p.

    Returns (particular, nullspace_basis) with entries in 0..p-1, or
    None when inconsistent.
    """
    m = len(mat)
    n = len(mat[0]) if m else 0
    a = [[mat[i][j] % p for j in range(n)] + [rhs[i] % p] for i in range(m)]
    pivots = []
    r = 0
    for c in range(n):
        pr = next((i for i in range(r, m) if a[i][c] % p != 0), None)
        if pr is None:
            continue
        a[r], a[pr] = a[pr], a[r]
        inv = pow(a[r][c], -1, p)
        a[r] = [(v * inv) % p for v in a[r]]
        for i in range(m):
            if i != r and a[i][c] % p != 0:
                f = a[i][c]
                a[i] = [(u - f * v) % p for u, v in zip(a[i], a[r])]
        pivots.append(c)
        r += 1
        if r == m:
            break
    for i in range(r, m):
        if a[i][n] % p != 0:
            return None
    part = [0] * n
    for i, c in enumerate(pivots):
        part[c] = a[i][n]
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for fc in free:
        v = [0] * n
        v[fc] = 1
        for i, c in enumerate(pivots):
            v[c] = (-a[i][fc]) % p
        basis.append(v)
    return part, basis


def rank_mod_p(mat, p):
    m = len(mat)
    if m == 0:
        return 0
    n = len(mat[0])
    sol = solve_mod_p(mat, [0] * m, p)
    _, basis = sol
    return n - len(basis)


def count_kernel_mod(mat, modulus):
    """#{y in (Z/m)^n : My = 0 (mod m)} for an integer matrix M."""
    if modulus == 1:
        return 1
    n = len(mat[0]) if mat else 0
    divs = smith_diagonal(mat)
    count = modulus ** (n - len(divs))
    for s in divs:
        count *= gcd(s, modulus)
    return count
