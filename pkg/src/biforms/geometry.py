"""Pencil invariants, finite-field dimension probes, and the theorem
hypothesis report.

True maxima over all real weight vectors are out of reach; rational
height scans give certified lower bounds (exact integer ranks), random
real directions give hints, and dimensions of the auxiliary varieties
are estimated by point counts over a few probe primes.  Verdicts that
rest on estimates are labelled conditional.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product

import numpy as np

from . import forms as fm
from .counting import iter_grid_chunks
from .linalg import exact_rank, integerize
from .util import (BudgetExceededError, DEFAULT_BUDGET, ValidationError,
                   is_prime)

PROBE_PRIMES = (101, 103, 107, 109)
CONE_BUDGET = 10 ** 8


# -- polynomial forms as exponent dictionaries ---------------------------

def form_dict(system, r):
    """Form r as {(x-exponents, y-exponents): coeff}."""
    out = {}
    for (j, k), c in system.coeffs[r].items():
        xe = [0] * system.n1
        ye = [0] * system.n2
        for a in j:
            xe[a] += 1
        for b in k:
            ye[b] += 1
        key = (tuple(xe), tuple(ye))
        out[key] = out.get(key, 0) + c
    return out


def weighted_form(system, beta_ints):
    out = {}
    for b, r in zip(beta_ints, range(system.R)):
        if b == 0:
            continue
        for key, c in form_dict(system, r).items():
            out[key] = out.get(key, 0) + b * c
    return {k: v for k, v in out.items() if v != 0}


def form_partial(f, block, idx):
    """d/dx_idx (block='x') or d/dy_idx of an exponent-dict form."""
    out = {}
    for (xe, ye), c in f.items():
        e = xe if block == "x" else ye
        if e[idx] == 0:
            continue
        ne = list(e)
        ne[idx] -= 1
        key = (tuple(ne), ye) if block == "x" else (xe, tuple(ne))
        out[key] = out.get(key, 0) + c * e[idx]
    return {k: v for k, v in out.items() if v != 0}


def form_mul(f, g):
    out = {}
    for (xa, ya), ca in f.items():
        for (xb, yb), cb in g.items():
            key = (tuple(a + b for a, b in zip(xa, xb)),
                   tuple(a + b for a, b in zip(ya, yb)))
            out[key] = out.get(key, 0) + ca * cb
    return {k: v for k, v in out.items() if v != 0}


def _degrees(f):
    xd = max((sum(xe) for (xe, _) in f), default=0)
    yd = max((sum(ye) for (_, ye) in f), default=0)
    return xd, yd


def _eval_forms_grid_mod(forms, grid, p, offset=0):
    """Evaluate exponent-dict forms mod p on grid columns starting at
    offset; x-exponents use columns offset.., y-exponents follow."""
    N = grid.shape[0]
    vals = np.zeros((N, len(forms)), dtype=np.int64)
    for fi, f in enumerate(forms):
        acc = np.zeros(N, dtype=np.int64)
        for (xe, ye), c in f.items():
            t = c % p
            if t == 0:
                continue
            term = np.full(N, t, dtype=np.int64)
            col = offset
            for e in list(xe) + list(ye):
                if e:
                    term = (term * pow_mod_col(grid[:, col], e, p)) % p
                col += 1
            acc = (acc + term) % p
        vals[:, fi] = acc
    return vals


def pow_mod_col(col, e, p):
    out = np.ones_like(col)
    base = col % p
    while e:
        if e & 1:
            out = (out * base) % p
        base = (base * base) % p
        e >>= 1
    return out


def _batch_rank_mod_p(C, p):
    """Ranks of a batch of small matrices over F_p via minor tests.

    C has shape (N, K, M); supports min(K, M) <= 3, else a Python loop.
    """
    N, K, M = C.shape
    r = min(K, M)
    ranks = np.zeros(N, dtype=np.int64)
    if r > 3:
        from .linalg import solve_mod_p
        for i in range(N):
            part, basis = solve_mod_p(C[i].tolist(), [0] * K, p)
            ranks[i] = M - len(basis)
        return ranks
    nonzero = np.any(C % p != 0, axis=(1, 2))
    ranks[nonzero] = 1
    if r >= 2:
        has2 = np.zeros(N, dtype=bool)
        for rows in combinations(range(K), 2):
            for cols in combinations(range(M), 2):
                det = (C[:, rows[0], cols[0]] * C[:, rows[1], cols[1]]
                       - C[:, rows[0], cols[1]] * C[:, rows[1], cols[0]]) % p
                has2 |= det != 0
        ranks[has2] = 2
    if r >= 3:
        has3 = np.zeros(N, dtype=bool)
        for rows in combinations(range(K), 3):
            for cols in combinations(range(M), 3):
                a = C[:, rows, :][:, :, cols]
                det = (a[:, 0, 0] * (a[:, 1, 1] * a[:, 2, 2]
                                     - a[:, 1, 2] * a[:, 2, 1])
                       - a[:, 0, 1] * (a[:, 1, 0] * a[:, 2, 2]
                                       - a[:, 1, 2] * a[:, 2, 0])
                       + a[:, 0, 2] * (a[:, 1, 0] * a[:, 2, 1]
                                       - a[:, 1, 1] * a[:, 2, 0])) % p
                has3 |= det != 0
        ranks[has3] = 3
    return ranks


def _cone_count(forms, n1, n2, p, budget=CONE_BUDGET):
    """#{(x,y) in F_p^{n1+n2} : all forms vanish}; n2 = 0 for a single
    block.  Fast paths: forms all of y-degree <= 1 (or x-degree <= 1
    mirrored), or independent of one block."""
    if n2 == 0:
        return _count_block(forms, n1, p, budget)
    xds = [_degrees(f) for f in forms]
    if all(xd == 0 for xd, _ in xds):
        return p ** n1 * _count_block([_project_y(f) for f in forms], n2, p,
                                      budget)
    if all(yd == 0 for _, yd in xds):
        return p ** n2 * _count_block([_project_x(f) for f in forms], n1, p,
                                      budget)
    if all(yd <= 1 for _, yd in xds):
        return _count_linear_fiber(forms, n1, n2, p, budget)
    if all(xd <= 1 for xd, _ in xds):
        return _count_linear_fiber([_swap_form(f) for f in forms],
                                   n2, n1, p, budget)
    rows = p ** (n1 + n2)
    if rows > budget:
        raise BudgetExceededError(rows, budget, "cone count")
    total = 0
    for chunk in iter_grid_chunks([(0, p - 1)] * (n1 + n2)):
        vals = _eval_forms_grid_mod(forms, chunk, p)
        total += int(np.count_nonzero(np.all(vals == 0, axis=1)))
    return total


def _project_y(f):
    return {ye: c for (xe, ye), c in f.items()}


def _project_x(f):
    return {xe: c for (xe, ye), c in f.items()}


def _swap_form(f):
    return {(ye, xe): c for (xe, ye), c in f.items()}


def _count_block(forms, n, p, budget):
    """#{z in F_p^n : forms(z) = 0} for single-block exponent dicts."""
    if forms and all(all(sum(xe) <= 1 for xe in f) for f in forms):
        # linear system: kernel size from the rank, no enumeration
        mat = []
        for f in forms:
            row = [0] * n
            for xe, c in f.items():
                idx = next((i for i, e in enumerate(xe) if e), None)
                if idx is not None:
                    row[idx] = (row[idx] + c) % p
            mat.append(row)
        from .linalg import solve_mod_p
        _, basis = solve_mod_p(mat, [0] * len(mat), p)
        return p ** len(basis)
    rows = p ** n
    if rows > budget:
        raise BudgetExceededError(rows, budget, "cone count")
    total = 0
    for chunk in iter_grid_chunks([(0, p - 1)] * n):
        N = chunk.shape[0]
        ok = np.ones(N, dtype=bool)
        for f in forms:
            acc = np.zeros(N, dtype=np.int64)
            for xe, c in f.items():
                t = c % p
                if t == 0:
                    continue
                term = np.full(N, t, dtype=np.int64)
                for col, e in enumerate(xe):
                    if e:
                        term = (term * pow_mod_col(chunk[:, col], e, p)) % p
                acc = (acc + term) % p
            ok &= acc == 0
        total += int(np.count_nonzero(ok))
    return total


def _count_linear_fiber(forms, n1, n2, p, budget):
    """All forms have y-degree <= 1: enumerate x, count the kernel of
    the y-linear system per point."""
    rows = p ** n1
    if rows > budget:
        raise BudgetExceededError(rows, budget, "cone count")
    pure_x = []
    linear = []
    for f in forms:
        if _degrees(f)[1] == 0:
            pure_x.append(_project_x(f))
        else:
            linear.append(f)
    total = 0
    for chunk in iter_grid_chunks([(0, p - 1)] * n1):
        N = chunk.shape[0]
        ok = np.ones(N, dtype=bool)
        for f in pure_x:
            acc = np.zeros(N, dtype=np.int64)
            for xe, c in f.items():
                t = c % p
                if t == 0:
                    continue
                term = np.full(N, t, dtype=np.int64)
                for col, e in enumerate(xe):
                    if e:
                        term = (term * pow_mod_col(chunk[:, col], e, p)) % p
                acc = (acc + term) % p
            ok &= acc == 0
        if not linear:
            total += int(np.count_nonzero(ok)) * p ** n2
            continue
        C = np.zeros((N, len(linear), n2), dtype=np.int64)
        for fi, f in enumerate(linear):
            for (xe, ye), c in f.items():
                t = c % p
                if t == 0:
                    continue
                m = next((i for i, e in enumerate(ye) if e), None)
                if m is None:
                    # constant-in-y part would make the system affine;
                    # multihomogeneous inputs never produce one
                    raise ValidationError("inhomogeneous linear fiber")
                term = np.full(N, t, dtype=np.int64)
                for col, e in enumerate(xe):
                    if e:
                        term = (term * pow_mod_col(chunk[:, col], e, p)) % p
                C[:, fi, m] = (C[:, fi, m] + term) % p
        ranks = _batch_rank_mod_p(C, p)
        counts = np.where(ok, p ** (n2 - ranks), 0)
        total += int(np.sum(counts))
    return total


@dataclass
class FpDimension:
    estimate: int
    per_prime: dict
    stable: bool


def fp_dimension(forms, ambient, primes=PROBE_PRIMES, *,
                 budget=CONE_BUDGET):
    """Dimension estimate by counting cone points over probe primes.

    ambient: ("projective", n) | ("biprojective", n1, n2) |
    ("affine", n1, n2).  The convention dim(empty) = -1 is used; for
    biprojective ambients the degenerate x=0 / y=0 strata are removed
    before taking logarithms, so empty varieties are detected even when
    the strata are large.
    """
    kind = ambient[0]
    # projective inputs may come as single-block or two-block dicts
    if kind == "projective" and forms and \
            isinstance(next(iter(forms[0]))[0], tuple):
        forms = [_project_x(f) for f in forms]
    per_prime = {}
    for p in primes:
        if not is_prime(p):
            raise ValidationError(f"probe prime {p} is not prime")
        if kind == "projective":
            cnt = _count_block(forms, ambient[1], p, budget)
            honest = cnt - 1  # remove the cone vertex
            dim = -1 if honest <= 0 else round(math.log(honest, p)) - 1
        elif kind == "biprojective":
            n1, n2 = ambient[1], ambient[2]
            cnt = _cone_count(forms, n1, n2, p, budget)
            sx = _stratum_count(forms, n1, n2, p, "x", budget)
            sy = _stratum_count(forms, n1, n2, p, "y", budget)
            honest = cnt - sx - sy + 1
            dim = -1 if honest <= 0 else round(math.log(honest, p)) - 2
        elif kind == "affine":
            n1, n2 = ambient[1], ambient[2]
            cnt = _cone_count(forms, n1, n2, p, budget)
            dim = -1 if cnt == 0 else (0 if cnt == 1
                                       else round(math.log(cnt, p)))
        else:
            raise ValidationError(f"unknown ambient {kind}")
        per_prime[p] = (dim, cnt)
    dims = [d for d, _ in per_prime.values()]
    modal = max(set(dims), key=dims.count)
    need = min(3, len(primes))
    stable = dims.count(modal) >= need
    return FpDimension(modal, per_prime, stable)


def _stratum_count(forms, n1, n2, p, which, budget):
    """# points of the x=0 (or y=0) stratum satisfying the forms."""
    if which == "x":
        surviving = [f for f in forms if all(sum(xe) == 0 for (xe, _) in f)]
        return _count_block([_project_y(f) for f in surviving], n2, p,
                            budget)
    surviving = [f for f in forms if all(sum(ye) == 0 for (_, ye) in f)]
    return _count_block([_project_x(f) for f in surviving], n1, p, budget)


# -- pencil kernel statistics --------------------------------------------

def _primitive_weight_vectors(R, height):
    seen = set()
    for vec in product(range(-height, height + 1), repeat=R):
        if all(v == 0 for v in vec):
            continue
        key = tuple(integerize(list(vec)))
        if key not in seen:
            seen.add(key)
            yield list(key)


@dataclass
class PencilStats:
    sigma1_lb: int
    sigma2_lb: int
    rho_ub: int
    witness: list
    rank_nullity_rows: list
    real_sample_min_rank: int


def pencil_kernel_stats(system, height=3, samples=200, *, seed=0,
                        svd_tol=1e-9):
    """Certified lower bounds for the pencil kernel invariants of a
    bilinear system, by an exact rational height scan plus random real
    directions (re-certified by exact rank when they rationalise)."""
    if not system.is_bilinear():
        raise ValidationError("pencil_kernel_stats requires bidegree (1,1)")
    A = fm.bilinear_matrices(system)
    n1, n2 = system.n1, system.n2

    def exact_rank_at(vec):
        Ab = sum(int(b) * M for b, M in zip(vec, A))
        return exact_rank([[int(v) for v in row] for row in Ab])

    best_rank = None
    witness = None
    rows = []
    for vec in _primitive_weight_vectors(system.R, height):
        r = exact_rank_at(vec)
        rows.append((vec, r, n1 - r, n2 - r))
        if best_rank is None or r < best_rank:
            best_rank, witness = r, vec

    rng = np.random.default_rng(seed)
    real_min = n1 if n1 < n2 else n2
    Afl = [M.astype(float) for M in A]
    for _ in range(samples):
        beta = rng.standard_normal(system.R)
        Ab = sum(b * M for b, M in zip(beta, Afl))
        sv = np.linalg.svd(Ab, compute_uv=False)
        thresh = svd_tol * max(Ab.shape) * (sv[0] if sv[0] > 0 else 1.0)
        r = int(np.count_nonzero(sv > thresh))
        real_min = min(real_min, r)
        if r < best_rank:
            # try to certify the direction exactly
            cand = [Fraction(float(b)).limit_denominator(1000)
                    for b in beta / np.max(np.abs(beta))]
            vec = integerize(cand)
            if any(vec):
                rr = exact_rank_at(vec)
                if rr < best_rank:
                    best_rank, witness = rr, list(vec)

    rank_rows = [{"beta": vec, "rank": r, "ker_dim": kd, "coker_dim": cd}
                 for vec, r, kd, cd in rows]
    return PencilStats(n1 - best_rank, n2 - best_rank, best_rank, witness,
                       rank_rows, real_min)


# -- s invariants and singular loci ---------------------------------------

@dataclass
class SInvariants:
    s1_est: int
    s2_est: int
    witness1: list
    witness2: list
    probe_primes: tuple
    stable: bool


def s_invariants(system, height=2, primes=PROBE_PRIMES):
    """Heuristic (lower-bound) estimates of the two pencil invariants of
    a (2,1) system, from a rational weight scan and fp dimensions."""
    if system.d1 != 2 or system.d2 != 1:
        raise ValidationError("s_invariants requires bidegree (2,1)")
    n1, n2 = system.n1, system.n2
    best1 = best2 = None
    wit1 = wit2 = None
    stable = True
    for vec in _primitive_weight_vectors(system.R, height):
        bf = weighted_form(system, vec)
        # slice system {q_l(x)}: the y_l coefficients, pure x quadratics
        slices = []
        for l in range(n2):
            q = {}
            for (xe, ye), c in bf.items():
                if ye[l] == 1:
                    q[xe] = q.get(xe, 0) + c
            slices.append(q)
        d1est = fp_dimension([{(xe, ()): c for xe, c in s.items()}
                              for s in slices if s],
                             ("projective", n1), primes)
        # bilinear system H_beta(y) x = 0 via the x-gradient of beta.F
        grads = [form_partial(bf, "x", j) for j in range(n1)]
        d2est = fp_dimension([g for g in grads if g],
                             ("biprojective", n1, n2), primes)
        stable &= d1est.stable and d2est.stable
        if best1 is None or d1est.estimate > best1:
            best1, wit1 = d1est.estimate, vec
        if best2 is None or d2est.estimate > best2:
            best2, wit2 = d2est.estimate, vec
    return SInvariants(1 + best1, best2 // 2 + 1, wit1, wit2,
                       tuple(primes), stable)


def singular_locus_dim(system, beta, primes=PROBE_PRIMES):
    """fp-estimated biprojective dimension of Sing V(beta.F): the common
    zeros of beta.F and all its first partials; -1 when empty."""
    beta = fm.as_weights(beta)
    if not beta.is_exact:
        raise ValidationError("beta must be rational")
    ints, _ = beta.scaled_integers()
    bf = weighted_form(system, ints)
    forms = [bf]
    forms += [form_partial(bf, "x", j) for j in range(system.n1)]
    forms += [form_partial(bf, "y", j) for j in range(system.n2)]
    forms = [f for f in forms if f]
    return fp_dimension(forms, ("biprojective", system.n1, system.n2),
                        primes)


def smoothness_probe(system, primes=None):
    """Probe Sing V(F) = {F = 0, rank J < R} over a few primes.

    Points are classified by vectorised Jacobian rank on the solution
    set; the degenerate x=0 / y=0 strata are removed before estimating
    the dimension.  Returns (verdict, per-prime dims, witness), the
    witness being a singular point away from the strata when one shows.
    """
    from .densities import _solutions_mod_p
    grid_budget = 3 * 10 ** 7
    n = system.n1 + system.n2
    if primes is None:
        # prefer good-reduction primes above 10x the largest coefficient,
        # as far as the full-grid budget allows
        from .util import primes_up_to
        pool = [p for p in primes_up_to(200) if p ** n <= grid_budget]
        preferred = [p for p in pool if p > 10 * system.max_abs_coeff()]
        primes = tuple((preferred or pool)[-3:])
        if not primes:
            return "unknown", None, None
    per_prime = {}
    witness = None
    for p in primes:
        try:
            pts, ranks = _solutions_mod_p(system, p, budget=grid_budget)
        except BudgetExceededError:
            return "unknown", None, None
        sing = pts[ranks < system.R]
        x_zero = np.all(sing[:, :system.n1] == 0, axis=1)
        y_zero = np.all(sing[:, system.n1:] == 0, axis=1)
        cnt = sing.shape[0]
        honest = cnt - int(np.count_nonzero(x_zero)) \
            - int(np.count_nonzero(y_zero)) + 1
        dim = -1 if honest <= 0 else round(math.log(honest, p)) - 2
        per_prime[p] = (dim, cnt)
        if witness is None and honest > 0:
            away = sing[~x_zero & ~y_zero]
            if away.shape[0]:
                row = away[0]
                witness = (p, tuple(int(v) for v in row[:system.n1]),
                           tuple(int(v) for v in row[system.n1:]))
    dims = [d for d, _ in per_prime.values()]
    modal = max(set(dims), key=dims.count)
    stable = dims.count(modal) >= min(2, len(primes))
    if not stable:
        return "unknown", per_prime, witness
    if modal == -1:
        return "smooth-probable", per_prime, None
    return "singular", per_prime, witness


def _det_forms(mat):
    """Determinant of a small matrix of exponent-dict forms."""
    n = len(mat)
    if n == 1:
        return mat[0][0]
    out = {}
    from itertools import permutations as perms
    for sigma in perms(range(n)):
        inv = sum(1 for i in range(n) for j in range(i + 1, n)
                  if sigma[i] > sigma[j])
        sign = -1 if inv % 2 else 1
        term = None
        for i in range(n):
            term = mat[i][sigma[i]] if term is None \
                else form_mul(term, mat[i][sigma[i]])
            if not term:
                break
        if not term:
            continue
        for k, v in term.items():
            out[k] = out.get(k, 0) + sign * v
    return {k: v for k, v in out.items() if v != 0}


# -- invariant report and hypothesis table --------------------------------

@dataclass
class InvariantReport:
    bidegree: tuple
    sigma1_lb: int | None = None
    sigma2_lb: int | None = None
    rho_ub: int | None = None
    s1_est: int | None = None
    s2_est: int | None = None
    sing_locus_dim_est: int | None = None
    smooth_verdict: str = "unknown"
    witnesses: dict = field(default_factory=dict)
    probe_primes: tuple = PROBE_PRIMES
    stable: bool = True


def compute_invariants(system, *, height=2, samples=100, primes=PROBE_PRIMES,
                       seed=0):
    rep = InvariantReport(bidegree=(system.d1, system.d2),
                          probe_primes=tuple(primes))
    if system.is_bilinear():
        st = pencil_kernel_stats(system, height=height, samples=samples,
                                 seed=seed)
        rep.sigma1_lb = st.sigma1_lb
        rep.sigma2_lb = st.sigma2_lb
        rep.rho_ub = st.rho_ub
        rep.witnesses["sigma"] = st.witness
        sl = singular_locus_dim(system, st.witness, primes)
        rep.sing_locus_dim_est = sl.estimate
        rep.stable &= sl.stable
    elif system.d1 == 2 and system.d2 == 1:
        si = s_invariants(system, height=height, primes=primes)
        rep.s1_est = si.s1_est
        rep.s2_est = si.s2_est
        rep.witnesses["s1"] = si.witness1
        rep.witnesses["s2"] = si.witness2
        rep.stable &= si.stable
        sl = singular_locus_dim(system, si.witness2, primes)
        rep.sing_locus_dim_est = sl.estimate
    verdict, _, witness = smoothness_probe(system)
    if witness is not None:
        rep.witnesses["singular_point"] = witness
    rep.smooth_verdict = verdict
    return rep


def _bu(P1, P2):
    b = max(math.log(P1) / math.log(P2), 1.0)
    u = max(math.log(P2) / math.log(P1), 1.0)
    return b, u


def hypothesis_report(system, P1, P2, invariants):
    """One row per theorem condition: lhs, rhs, slack, verdict, and
    whether the verdict is conditional on heuristic estimates."""
    if P1 <= 1 or P2 <= 1:
        raise ValidationError("P1, P2 must exceed 1")
    b, u = _bu(P1, P2)
    R = system.R
    n1, n2 = system.n1, system.n2
    d1, d2 = system.d1, system.d2
    rows = []

    def row(name, lhs, rhs, conditional, sense=">"):
        ok = lhs > rhs if sense == ">" else lhs < rhs
        rows.append({"condition": name, "lhs": lhs, "rhs": rhs,
                     "slack": lhs - rhs if sense == ">" else rhs - lhs,
                     "verdict": bool(ok),
                     "conditional": bool(conditional)})

    if system.is_bilinear():
        s1, s2 = invariants.sigma1_lb, invariants.sigma2_lb
        if s1 is not None:
            row("bilinear: n1 - sigma1 > (2b+2)R", n1 - s1, (2 * b + 2) * R,
                True)
            row("bilinear: n2 - sigma2 > (2b+2)R", n2 - s2, (2 * b + 2) * R,
                True)
            Cs = min(n1 - s1, n2 - s2) / 2
            row("exponent C > (b d1 + u d2) R", Cs, (b * d1 + u * d2) * R,
                True)
        row("bilinear smooth: min(n1,n2) > (2b+2)R", min(n1, n2),
            (2 * b + 2) * R, False)
        row("bilinear smooth: n1+n2 > (4b+5)R", n1 + n2, (4 * b + 5) * R,
            False)
    elif d1 == 2 and d2 == 1:
        s1, s2 = invariants.s1_est, invariants.s2_est
        if s1 is not None:
            row("(2,1): n1 - s1 > (8b+4u)R", n1 - s1, (8 * b + 4 * u) * R,
                True)
            row("(2,1): (n1+n2)/2 - s2 > (8b+4u)R", (n1 + n2) / 2 - s2,
                (8 * b + 4 * u) * R, True)
            Cs = min(n1 - s1, (n1 + n2) / 2 - s2) / 4
            row("exponent C > (b d1 + u d2) R", Cs, (b * d1 + u * d2) * R,
                True)
        row("(2,1) smooth: n1 > (16b+8u+1)R", n1, (16 * b + 8 * u + 1) * R,
            False)
        row("(2,1) smooth: n2 > (8b+4u+1)R", n2, (8 * b + 4 * u + 1) * R,
            False)

    # reference condition with the fp-estimated Birch-style loci
    try:
        dims = _birch_locus_dims(system, invariants.probe_primes)
        rhs = 2 ** (d1 + d2 - 2) * max(R * (R + 1) * (d1 + d2 - 1),
                                       R * (b * d1 + u * d2))
        for i, dv in enumerate(dims, start=1):
            row(f"reference: n1+n2 - dim V_{i}* > 2^(d1+d2-2) "
                "max(R(R+1)(d1+d2-1), R(b d1+u d2))",
                n1 + n2 - dv, rhs, True)
    except (BudgetExceededError, ValidationError):
        pass
    row("linear regime improves reference: d1 b + d2 u < (R+1)/2",
        d1 * b + d2 * u, (R + 1) / 2, False, sense="<")
    return rows


def _birch_locus_dims(system, primes):
    """fp-estimated affine dimensions of the rank-deficiency loci of the
    two block Jacobians."""
    forms = [form_dict(system, r) for r in range(system.R)]
    out = []
    for block, nvars in (("x", system.n1), ("y", system.n2)):
        jac = [[form_partial(f, block, j) for j in range(nvars)]
               for f in forms]
        minors = []
        for cols in combinations(range(nvars), system.R):
            minors.append(_det_forms([[jac[i][c] for c in cols]
                                      for i in range(system.R)]))
        minors = [m for m in minors if m]
        if not minors:
            out.append(system.n1 + system.n2)
            continue
        est = fp_dimension(minors, ("affine", system.n1, system.n2), primes)
        out.append(est.estimate)
    return out
