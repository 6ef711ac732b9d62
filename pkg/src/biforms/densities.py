"""Local densities and the main-term constant.

p-adic densities come from exact residue counting mod p^k, accelerated
by Hensel stratification: nonsingular solutions mod p lift in closed
form, singular strata that coincide with a coordinate-scaling stratum
reduce to the same count at a lower level (bihomogeneity), and whatever
is left is lifted point by point under a budget.

The archimedean side offers two independent routes: integrating the
oscillatory integral over the frequency cube, and the slab-measure
limit evaluated by quasi-Monte Carlo with an exact fiber measure when
one block is linear.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

import numpy as np

from . import forms as fm
from .counting import grid_array, iter_grid_chunks
from .expsums import complete_sum, oscillatory_integral
from .linalg import count_kernel_mod, solve_mod_p
from .util import (BudgetExceededError, DEFAULT_BUDGET, ValidationError,
                   is_prime, primes_up_to)

ROW_BUDGET = 3 * 10 ** 7     # vectorised residue enumeration rows
SNF_ROW_BUDGET = 4 * 10 ** 5  # per-point Smith-form loops (pure Python)
GRID_BUDGET = 6 * 10 ** 6    # full (x,y) residue grids for classification
LIFT_BUDGET = 2 * 10 ** 5    # explicit Hensel lift nodes


@dataclass
class DensityEstimate:
    value: float
    error_bound: float
    method: str
    level: str
    exact: Fraction | None = None
    parts: dict = field(default_factory=dict)


@dataclass
class PadicZeroVerdict:
    found: bool
    witness: tuple | None      # (x, y) mod p^depth
    p: int
    depth: int


@dataclass
class RealZeroVerdict:
    found: bool
    point: tuple | None
    residual: float
    jacobian_sigma_min: float


# -- exact residue counting ----------------------------------------------

def _linear_block_counts(system, p, k, budget=ROW_BUDGET):
    """a_k by enumerating the d2=1 block: sum over x mod p^k of
    #{y : C(x) y = 0 mod p^k}; exact."""
    if system.d2 != 1:
        if system.d1 == 1:
            return _linear_block_counts(fm.swap_xy(system), p, k, budget)
        raise ValidationError("no linear block")
    m = p ** k
    rows = m ** system.n1
    if rows > budget:
        raise BudgetExceededError(rows, budget, "residue enumeration")
    struct = fm.y_linear_coeffs(system)
    total = 0
    n2 = system.n2
    for chunk in iter_grid_chunks([(0, m - 1)] * system.n1):
        N = chunk.shape[0]
        C = np.zeros((N, system.R, n2), dtype=np.int64)
        for r, per_m in enumerate(struct):
            for mm, poly in enumerate(per_m):
                for j, c in poly.items():
                    t = c % m
                    if t == 0:
                        continue
                    term = np.full(N, t, dtype=np.int64)
                    for a in j:
                        term = (term * chunk[:, a]) % m
                    C[:, r, mm] = (C[:, r, mm] + term) % m
        if system.R == 1:
            g = np.full(N, m, dtype=np.int64)
            for mm in range(n2):
                g = np.gcd(g, C[:, 0, mm])
            total += int(m ** (n2 - 1)) * int(np.sum(g))
        else:
            if rows > SNF_ROW_BUDGET:
                raise BudgetExceededError(rows, SNF_ROW_BUDGET,
                                          "per-point SNF enumeration")
            for i in range(N):
                total += count_kernel_mod(C[i].tolist(), m)
    return total


def _derivative_monomials(system):
    """Per form, per variable: the derivative as {(j', k'): coeff}."""
    out = []
    for mono in system.coeffs:
        per_var = [dict() for _ in range(system.n1 + system.n2)]
        for (j, k), c in mono.items():
            for pos in range(len(j)):
                jj = j[:pos] + j[pos + 1:]
                key = (jj, k)
                d = per_var[j[pos]]
                d[key] = d.get(key, 0) + c
            for pos in range(len(k)):
                kk = k[:pos] + k[pos + 1:]
                key = (j, kk)
                d = per_var[system.n1 + k[pos]]
                d[key] = d.get(key, 0) + c
        out.append(per_var)
    return out


def _eval_monomials_mod(monos, pts, n1, p):
    N = pts.shape[0]
    acc = np.zeros(N, dtype=np.int64)
    for (j, k), c in monos.items():
        t = c % p
        if t == 0:
            continue
        term = np.full(N, t, dtype=np.int64)
        for a in j:
            term = (term * pts[:, a]) % p
        for b in k:
            term = (term * pts[:, n1 + b]) % p
        acc = (acc + term) % p
    return acc


def _jacobian_ranks_mod_p(system, pts, p):
    """Vectorised Jacobian ranks mod p at an array of points."""
    N = pts.shape[0]
    n = system.n1 + system.n2
    derivs = _derivative_monomials(system)
    J = np.zeros((N, system.R, n), dtype=np.int64)
    for r in range(system.R):
        for v in range(n):
            if derivs[r][v]:
                J[:, r, v] = _eval_monomials_mod(derivs[r][v], pts,
                                                 system.n1, p)
    if min(system.R, n) <= 3:
        from .geometry import _batch_rank_mod_p
        return _batch_rank_mod_p(J, p)
    ranks = np.empty(N, dtype=np.int64)
    for i in range(N):
        ranks[i] = _rank_mod_p_int(J[i].tolist(), p)
    return ranks


def _solutions_mod_p(system, p, budget=GRID_BUDGET):
    """All residue solutions mod p with their Jacobian ranks.

    Returns (points array (N, n1+n2), ranks array (N,)).
    """
    n = system.n1 + system.n2
    rows = p ** n
    if rows > budget:
        raise BudgetExceededError(rows, budget, "mod-p classification")
    sols = []
    for chunk in iter_grid_chunks([(0, p - 1)] * n):
        vals = np.stack([_eval_monomials_mod(mono, chunk, system.n1, p)
                         for mono in system.coeffs], axis=1)
        mask = np.all(vals == 0, axis=1)
        sols.append(chunk[mask])
    pts = np.concatenate(sols, axis=0)
    ranks = _jacobian_ranks_mod_p(system, pts, p)
    return pts, ranks


def _rank_mod_p_int(mat, p):
    a = [[v % p for v in row] for row in mat]
    m, n = len(a), len(a[0])
    r = 0
    for c in range(n):
        pr = next((i for i in range(r, m) if a[i][c]), None)
        if pr is None:
            continue
        a[r], a[pr] = a[pr], a[r]
        inv = pow(a[r][c], -1, p)
        a[r] = [(v * inv) % p for v in a[r]]
        for i in range(m):
            if i != r and a[i][c]:
                f = a[i][c]
                a[i] = [(u - f * v) % p for u, v in zip(a[i], a[r])]
        r += 1
        if r == m:
            break
    return r


class _HenselCounter:
    """Exact #solutions mod p^k with memoisation over k."""

    def __init__(self, system, p, budget=DEFAULT_BUDGET):
        self.system = system
        self.p = p
        self.budget = budget
        self.memo = {}
        self.via_hensel = set()
        self._level1 = None
        self._lift_nodes = 0

    def count(self, k):
        if k == 0:
            return 1
        if k in self.memo:
            return self.memo[k]
        try:
            val = _linear_block_counts(self.system, self.p, k)
        except (BudgetExceededError, ValidationError):
            val = self._hensel_count(k)
            self.via_hensel.add(k)
        self.memo[k] = val
        return val

    # -- Hensel machinery -------------------------------------------

    def _classify(self):
        if self._level1 is None:
            pts, ranks = _solutions_mod_p(self.system, self.p)
            sing = pts[ranks < self.system.R]
            self._level1 = (pts.shape[0], sing)
        return self._level1

    def _hensel_count(self, k):
        sys_, p = self.system, self.p
        n1, n2, R = sys_.n1, sys_.n2, sys_.R
        n = n1 + n2
        total_sols, sing = self._classify()
        n_sing = sing.shape[0]
        n_ns = total_sols - n_sing
        total = n_ns * p ** ((k - 1) * (n - R))

        sing_set = {tuple(int(v) for v in row) for row in sing}
        zero = tuple([0] * n)
        stratum_x = p ** n2    # size of {x=0 mod p} (all solutions, d1>=1)
        stratum_y = p ** n1
        x_zero = {s for s in sing_set if all(v == 0 for v in s[:n1])}
        y_zero = {s for s in sing_set if all(v == 0 for v in s[n1:])}
        full_x = len(x_zero) == stratum_x
        full_y = len(y_zero) == stratum_y

        rest = set(sing_set)
        if full_x and full_y:
            total += self._branch_x(k) + self._branch_y(k) - self._branch_0(k)
            rest -= x_zero | y_zero
        elif full_x:
            total += self._branch_x(k)
            rest -= x_zero
        elif full_y:
            total += self._branch_y(k)
            rest -= y_zero
        elif zero in sing_set:
            total += self._branch_0(k)
            rest -= {zero}
        for s in sorted(rest):
            total += self._lift_count(list(s), 1, k)
        return total

    def _branch_x(self, k):
        # x = p x': F(p x', y) = p^d1 F(x', y)
        sys_, p = self.system, self.p
        j = k - sys_.d1
        if j <= 0:
            return p ** (sys_.n1 * (k - 1) + sys_.n2 * k)
        return self.count(j) * p ** (sys_.n1 * (k - 1 - j) + sys_.n2 * (k - j))

    def _branch_y(self, k):
        sys_, p = self.system, self.p
        j = k - sys_.d2
        if j <= 0:
            return p ** (sys_.n2 * (k - 1) + sys_.n1 * k)
        return self.count(j) * p ** (sys_.n2 * (k - 1 - j) + sys_.n1 * (k - j))

    def _branch_0(self, k):
        sys_, p = self.system, self.p
        j = k - sys_.d1 - sys_.d2
        n = sys_.n1 + sys_.n2
        if j <= 0:
            return p ** (n * (k - 1))
        return self.count(j) * p ** (n * (k - 1 - j))

    def _lift_count(self, point, j, k):
        """Exact number of solutions mod p^k above a singular point mod p^j."""
        if j == k:
            return 1
        self._lift_nodes += 1
        if self._lift_nodes > LIFT_BUDGET:
            raise BudgetExceededError(self._lift_nodes, LIFT_BUDGET,
                                      "Hensel lifting")
        sys_, p = self.system, self.p
        n1 = sys_.n1
        pj = p ** j
        x, y = point[:n1], point[n1:]
        Fv = fm.evaluate(sys_, x, y)
        rhs = [(-(v // pj)) % p for v in Fv]
        J = fm.jacobian(sys_, x, y)
        sol = solve_mod_p(J, rhs, p)
        if sol is None:
            return 0
        part, basis = sol
        if j + 1 == k:
            # every lift is a level-k solution; no need to expand them
            return p ** len(basis)
        self._lift_nodes += p ** len(basis)
        if self._lift_nodes > LIFT_BUDGET:
            raise BudgetExceededError(self._lift_nodes, LIFT_BUDGET,
                                      "Hensel lifting")
        total = 0
        n = len(point)
        for coeffs in product(range(p), repeat=len(basis)):
            delta = list(part)
            for c, vec in zip(coeffs, basis):
                if c:
                    delta = [(d + c * v) % p for d, v in zip(delta, vec)]
            nxt = [point[i] + pj * delta[i] for i in range(n)]
            total += self._lift_count(nxt, j + 1, k)
        return total


def count_solutions_mod_pk(system, p, k, *, budget=DEFAULT_BUDGET):
    """#{(x,y) mod p^k : F = 0 mod p^k}, exact."""
    if not is_prime(p):
        raise ValidationError(f"{p} is not prime")
    if k < 1:
        raise ValidationError("k must be >= 1")
    return _HenselCounter(system, p, budget).count(k)


def padic_density(system, p, k, *, method="auto", budget=DEFAULT_BUDGET):
    """Truncated p-adic density: a_k / p^(k (n1+n2-R)), exact rational.

    method 'residue-count' forces plain enumeration; 'hensel' forces the
    stratified path; 'auto' enumerates when affordable.
    """
    if not is_prime(p):
        raise ValidationError(f"{p} is not prime")
    if k < 1:
        raise ValidationError("k must be >= 1")
    if method == "residue-count":
        a = _linear_block_counts(system, p, k)
        tag = "residue-count"
    elif method == "hensel":
        counter = _HenselCounter(system, p, budget)
        a = counter._hensel_count(k) if k > 1 else counter.count(1)
        tag = "hensel-stabilized"
    elif method == "auto":
        counter = _HenselCounter(system, p, budget)
        a = counter.count(k)
        tag = "hensel-stabilized" if k in counter.via_hensel \
            else "residue-count"
    else:
        raise ValidationError(f"unknown method {method}")
    exact = Fraction(a, p ** (k * (system.n1 + system.n2 - system.R)))
    return DensityEstimate(float(exact), 0.0, tag, f"p={p},k={k}", exact)


def _singular_residue_count(system, p):
    """#singular solutions mod p, or None when out of cheap reach.

    For R = 1 with a linear block the singular locus is cut out by the
    pure-x coefficient forms plus a y-linear system, so one pass over
    the x residues suffices.
    """
    if system.R == 1 and (system.d2 == 1 or system.d1 == 1):
        sys_ = system if system.d2 == 1 else fm.swap_xy(system)
        if p ** sys_.n1 > ROW_BUDGET:
            return None
        struct = fm.y_linear_coeffs(sys_)[0]
        derivs = [[form for form in [_x_partial_poly(struct, j, m)
                                     for m in range(sys_.n2)]]
                  for j in range(sys_.n1)]
        count = 0
        for x in product(range(p), repeat=sys_.n1):
            if any(_eval_poly_mod(struct[m], x, p) for m in range(sys_.n2)):
                continue
            rows = [[_eval_poly_mod(derivs[j][m], x, p)
                     for m in range(sys_.n2)] for j in range(sys_.n1)]
            _, basis = solve_mod_p(rows, [0] * sys_.n1, p)
            count += p ** len(basis)
        return count
    try:
        _, ranks = _solutions_mod_p(system, p)
    except BudgetExceededError:
        return None
    return int(np.count_nonzero(ranks < system.R))


def _x_partial_poly(struct, j, m):
    out = {}
    for jj, c in struct[m].items():
        mult = jj.count(j)
        if mult:
            rest = list(jj)
            rest.remove(j)
            key = tuple(rest)
            out[key] = out.get(key, 0) + mult * c
    return out


def _eval_poly_mod(poly, x, p):
    acc = 0
    for jj, c in poly.items():
        t = c % p
        for a in jj:
            t = (t * x[a]) % p
        acc = (acc + t) % p
    return acc


def padic_density_limit(system, p, *, tol=1e-6, k_max=24,
                        budget=DEFAULT_BUDGET):
    """Adaptive-k density: raise k until the increment drops below tol
    or the budget stops us.

    When the budget cuts the sequence short, the reported error bound
    is 2 #sing p^(2R - n1 - n2) (each singular residue shifts the next
    level by at most p^(n1+n2) lifts), falling back to |value|/p when
    even the singular count is out of reach.
    """
    counter = _HenselCounter(system, p, budget)
    norm = system.n1 + system.n2 - system.R
    prev = None
    k = 1
    incs = []
    truncated = False
    while k <= k_max:
        try:
            a = counter.count(k)
        except BudgetExceededError:
            if prev is None:
                raise
            truncated = True
            k -= 1
            break
        cur = Fraction(a, p ** (k * norm))
        if prev is not None:
            incs.append(abs(float(cur - prev)))
            if incs[-1] < tol:
                prev = cur
                break
            if len(incs) >= 3 and incs[-1] >= 0.9 * incs[-3] \
                    and incs[-1] > 100 * tol:
                # no contraction in sight: stop burning budget
                prev = cur
                break
        prev = cur
        k += 1
    k = min(k, k_max)
    if incs and incs[-1] < tol:
        err = 0.0
    elif truncated:
        nsing = _singular_residue_count(system, p)
        if nsing is not None:
            err = 2.0 * nsing * float(p) ** (2 * system.R - system.n1
                                             - system.n2)
        else:
            err = float(prev) / p
    elif len(incs) >= 3 and incs[-1] >= 0.9 * incs[-3]:
        # increments are not contracting: the local density shows no
        # convergence within reach, so no finite tail claim is honest
        err = math.inf
    elif incs:
        err = incs[-1]
    else:
        err = float(prev) / p
    return DensityEstimate(float(prev), err, "hensel-stabilized",
                           f"p={p},k<={k}", prev)


# -- singular series -------------------------------------------------------

def singular_series(system, Q, variant="euler", *, per_prime_tol=1e-6,
                    budget=DEFAULT_BUDGET):
    """Truncated singular series.

    qseries: sum of S_{a,q} over q <= Q, gcd(a_1..a_R, q) = 1.
    euler:   product of adaptive-k p-adic densities over p <= Q.
    """
    if Q < 1:
        raise ValidationError("Q must be >= 1")
    if variant == "qseries":
        return _series_qseries(system, Q, budget)
    if variant == "euler":
        return _series_euler(system, Q, per_prime_tol, budget)
    raise ValidationError(f"unknown variant {variant}")


def _series_qseries(system, Q, budget):
    qmax = math.floor(Q)
    partial = {}
    total = 0.0
    marks = sorted({max(1, qmax // 4), max(1, qmax // 2), qmax})
    for q in range(1, qmax + 1):
        Aq = 0.0
        for a in product(range(q), repeat=system.R):
            g = q
            for v in a:
                g = math.gcd(g, v)
            if g != 1:
                continue
            Aq += complete_sum(system, list(a), q, budget=budget).real
        total += Aq
        if q in marks:
            partial[q] = total
    # geometric tail extrapolation on successive truncation increments;
    # a non-contracting sequence means no convergence is detectable at
    # this truncation and the half-width is reported as infinite
    err = 0.0
    if len(marks) == 3 and marks[0] < marks[1] < marks[2]:
        t1 = abs(partial[marks[1]] - partial[marks[0]])
        t2 = abs(partial[marks[2]] - partial[marks[1]])
        if t2 == 0.0:
            err = 0.0
        elif t1 > 0 and t2 / t1 < 0.95:
            r = t2 / t1
            err = 2.0 * t2 * r / (1.0 - r)
        else:
            err = math.inf
    return DensityEstimate(total, err, "qseries", f"Q={qmax}")


def _series_euler(system, Q, per_prime_tol, budget):
    value = 1.0
    err_rel = 0.0
    devs = []
    pmax = math.floor(Q)
    levels = {}
    for p in primes_up_to(pmax):
        est = padic_density_limit(system, p, tol=per_prime_tol,
                                  budget=budget)
        value *= est.value
        if est.value > 0 and math.isfinite(est.error_bound):
            err_rel += est.error_bound / est.value
        elif not math.isfinite(est.error_bound):
            err_rel = math.inf
        devs.append((p, abs(est.value - 1.0) * p * p))
        levels[p] = est.level
    # tail model: per-prime deviation c p^gamma with sum c p^(gamma-2)
    # beyond pmax; gamma >= 0.9 means the product shows no convergence
    # at this truncation and the half-width is infinite
    big = [(p, d) for p, d in devs if p >= 3 and d > 0]
    if len(big) >= 3:
        xs = np.log([p for p, _ in big])
        ys = np.log([d for _, d in big])
        gamma = float(np.polyfit(xs, ys, 1)[0])
    else:
        gamma = 0.0
    if gamma >= 0.9:
        tail = math.inf
    else:
        c = float(np.median([d for _, d in devs])) if devs else 0.0
        tail = c / ((1.0 - gamma) * pmax * math.log(max(pmax, 3)))
    err = abs(value) * err_rel + abs(value) * tail
    return DensityEstimate(value, err, "euler-product",
                           f"p<={pmax},tol={per_prime_tol}",
                           parts={"levels": levels, "tail": tail,
                                  "gamma": gamma})


# -- singular integral -----------------------------------------------------

def _uniform_sum_cdf(bvals, t):
    """P(sum b_i U_i <= t) for U_i ~ U[0,1] i.i.d., b_i > 0; exact
    piecewise-polynomial (Irwin-Hall with weights)."""
    nz = [b for b in bvals if b > 1e-300]
    nn = len(nz)
    if nn == 0:
        return 1.0 if t >= 0 else 0.0
    tot = 0.0
    for S in product((0, 1), repeat=nn):
        x = t - sum(c * b for c, b in zip(S, nz))
        if x > 0:
            tot += (-1) ** sum(S) * x ** nn
    prod = 1.0
    for b in nz:
        prod *= b
    return tot / (math.factorial(nn) * prod)


def _fiber_measure_linear(coeffs, intervals, eps):
    """mu{ v in prod intervals : |sum coeffs_m v_m| <= eps }, exact."""
    # shift to nonnegative weights on U[0,1]
    c0 = 0.0
    bvals = []
    vol = 1.0
    for a, (lo, hi) in zip(coeffs, intervals):
        w = hi - lo
        vol *= w
        if a >= 0:
            c0 += a * lo
            bvals.append(a * w)
        else:
            c0 += a * hi
            bvals.append(-a * w)
    if vol == 0:
        return 0.0
    # T = c0 + sum b_i U_i, want P(|T| <= eps)
    pr = _uniform_sum_cdf(bvals, eps - c0) - _uniform_sum_cdf(bvals, -eps - c0)
    return vol * max(0.0, pr)


def singular_integral(system, boxes, variant="slab", level=None, *,
                      seed=0, budget=DEFAULT_BUDGET):
    """Truncated singular integral.

    gamma: integrate S_inf over the frequency cube |gamma|_inf <= G_max.
    slab:  (2 eps)^-R mu{(u,v) in B : |F_i(u,v)| <= eps} at
           eps = P^-(d1+d2)/2, by scrambled-Sobol QMC; exact fiber
           measure in the linear block when R = 1.
    """
    if variant == "gamma":
        level = level or {}
        return _integral_gamma(system, boxes,
                               float(level.get("gamma_max", 30.0)),
                               float(level.get("tol", 1e-4)))
    if variant == "slab":
        level = level or {}
        P = float(level.get("P", 32.0))
        n = int(level.get("log2_samples", 16))
        est = _integral_slab(system, boxes, P, n, seed)
        # truncation drift: compare with the half-P level as an estimate
        # of how far the finite-P slab is from its limit
        ref = _integral_slab(system, boxes, P / 2.0, max(n - 2, 8),
                             seed + 1)
        drift = abs(est.value - ref.value)
        return DensityEstimate(est.value, est.error_bound + drift,
                               est.method, est.level,
                               parts={**est.parts, "drift": drift,
                                      "half_P_value": ref.value})
    raise ValidationError(f"unknown variant {variant}")


def _integral_gamma(system, boxes, gamma_max, tol):
    if gamma_max <= 0:
        return DensityEstimate(0.0, 0.0, "quadrature", "Gmax=0")
    R = system.R
    inner_tol = tol / (4.0 * (2.0 * gamma_max) ** R)

    evals = 0

    def sinf_real(gam):
        nonlocal evals
        evals += 1
        res = oscillatory_integral(system, boxes, list(gam),
                                   max(inner_tol, 1e-9))
        return res.value.real

    # conjugate symmetry: imaginary parts cancel pairwise over the cube
    if R == 1:
        val, err = _adaptive_1d(sinf_real, 0.0, gamma_max, tol / 2)
        val, err = 2 * val, 2 * err
    else:
        val, err = _adaptive_cube(sinf_real, R, gamma_max, tol)
    # heuristic decay tail: fit an envelope c * g^-kappa on two sample
    # rings (max over jitter to dodge oscillation zeros), safety factor 2
    def ring(r):
        return max(abs(sinf_real([r * (1 + 0.03 * i)] + [0.0] * (R - 1)))
                   for i in range(5))

    r1, r2 = 0.5 * gamma_max, 0.95 * gamma_max
    e1, e2 = ring(r1), ring(r2)
    if e1 > 0 and e2 > 0:
        kappa = max(1.05, math.log(e1 / e2) / math.log(r2 / r1))
        c = e2 * r2 ** kappa
        tail = 2.0 * 2 * R * c * gamma_max ** (1 - kappa) / (kappa - 1) \
            * (2 * gamma_max) ** (R - 1)
    else:
        tail = 0.0
    return DensityEstimate(val, err + tail, "quadrature",
                           f"Gmax={gamma_max},tol={tol}",
                           parts={"evals": evals, "tail": tail})


def _adaptive_1d(f, lo, hi, tol, depth=24):
    import heapq

    def panel(a, b):
        nodes, weights = np.polynomial.legendre.leggauss(12)
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        v12 = sum(w * f([mid + half * t]) for t, w in zip(nodes, weights)) * half
        nodes8, weights8 = np.polynomial.legendre.leggauss(8)
        v8 = sum(w * f([mid + half * t]) for t, w in zip(nodes8, weights8)) * half
        return v12, abs(v12 - v8)

    v, e = panel(lo, hi)
    heap = [(-e, 0, lo, hi, v, e)]
    cnt = 1
    while len(heap) < 2 ** depth:
        if sum(it[5] for it in heap) < tol:
            break
        _, _, a, b, v, e = heapq.heappop(heap)
        m = 0.5 * (a + b)
        for aa, bb in ((a, m), (m, b)):
            vv, ee = panel(aa, bb)
            heapq.heappush(heap, (-ee, cnt, aa, bb, vv, ee))
            cnt += 1
        if cnt > 2000:
            break
    return (sum(it[4] for it in heap), sum(it[5] for it in heap))


def _adaptive_cube(f, R, gmax, tol):
    # tensor Gauss-Legendre at two orders over the symmetric cube
    def tensor(order):
        nodes, weights = np.polynomial.legendre.leggauss(order)
        nodes = nodes * gmax
        weights = weights * gmax
        tot = 0.0
        for idx in product(range(order), repeat=R):
            g = [nodes[i] for i in idx]
            w = 1.0
            for i in idx:
                w *= weights[i]
            tot += w * f(g)
        return tot

    v1, v2 = tensor(8), tensor(12)
    return v2, abs(v2 - v1)


def _integral_slab(system, boxes, P, log2_samples, seed):
    from scipy.stats import qmc
    R = system.R
    eps = 0.5 * P ** (-(system.d1 + system.d2))
    n_replicates = 8
    per = max(2 ** log2_samples // n_replicates, 64)

    linear_fiber = (R == 1 and (system.d2 == 1 or system.d1 == 1))
    if linear_fiber and system.d2 == 1:
        sys_, outer_iv, inner_iv = system, boxes.x_intervals, boxes.y_intervals
    elif linear_fiber:
        sys_, outer_iv, inner_iv = fm.swap_xy(system), boxes.y_intervals, \
            boxes.x_intervals
    else:
        sys_ = system

    means = []
    if linear_fiber:
        struct = fm.y_linear_coeffs(sys_)[0]
        dim = len(outer_iv)
        lo = np.array([float(a) for a, _ in outer_iv])
        hi = np.array([float(b) for _, b in outer_iv])
        volu = float(np.prod(hi - lo))
        iv = [(float(a), float(b)) for a, b in inner_iv]
        for rep in range(n_replicates):
            sob = qmc.Sobol(d=dim, scramble=True,
                            seed=seed * 1000 + rep)
            U = lo + (hi - lo) * sob.random(per)
            acc = 0.0
            for u in U:
                coeffs = []
                for m in range(sys_.n2):
                    a = 0.0
                    for j, c in struct[m].items():
                        t = float(c)
                        for ax in j:
                            t *= u[ax]
                        a += t
                    coeffs.append(a)
                acc += _fiber_measure_linear(coeffs, iv, eps)
            means.append(volu * acc / per / (2 * eps) ** R)
    else:
        iv = list(boxes.x_intervals) + list(boxes.y_intervals)
        dim = len(iv)
        lo = np.array([float(a) for a, _ in iv])
        hi = np.array([float(b) for _, b in iv])
        voltot = float(np.prod(hi - lo))
        n1 = system.n1
        for rep in range(n_replicates):
            sob = qmc.Sobol(d=dim, scramble=True, seed=seed * 1000 + rep)
            pts = lo + (hi - lo) * sob.random(per)
            ok = np.ones(pts.shape[0], dtype=bool)
            for r, mono in enumerate(system.coeffs):
                vals = np.zeros(pts.shape[0])
                for (j, k), c in mono.items():
                    term = np.full(pts.shape[0], float(c))
                    for a in j:
                        term = term * pts[:, a]
                    for b in k:
                        term = term * pts[:, n1 + b]
                    vals += term
                ok &= np.abs(vals) <= eps
            means.append(voltot * np.count_nonzero(ok) / per / (2 * eps) ** R)

    value = float(np.mean(means))
    se = float(np.std(means, ddof=1) / math.sqrt(n_replicates))
    return DensityEstimate(value, 3 * se, "slab-measure-mc",
                           f"P={P},n=2^{log2_samples},seed={seed}",
                           parts={"replicates": means})


# -- smooth local zeros ------------------------------------------------------

def smooth_padic_zero(system, p, depth=1, *, budget=GRID_BUDGET):
    """Search for a solution mod p^depth certifying a smooth Z_p zero.

    Depth 1 uses the plain Hensel criterion: F = 0 mod p with Jacobian
    rank R mod p.  Depth d lifts solutions level by level and accepts a
    point a with F(a) = 0 mod p^d whose Jacobian has an R x R minor of
    p-valuation e with 2e < d (quantitative Newton lifting).
    """
    if not is_prime(p):
        raise ValidationError(f"{p} is not prime")
    pts, ranks = _solutions_mod_p(system, p, budget)
    full = np.nonzero(ranks == system.R)[0]
    if full.size:
        pt = pts[full[0]]
        return PadicZeroVerdict(True, (tuple(int(v) for v in pt[:system.n1]),
                                       tuple(int(v) for v in pt[system.n1:])),
                                p, 1)
    if depth <= 1:
        return PadicZeroVerdict(False, None, p, 1)
    # lift the singular solutions and test the quantitative criterion
    level = [tuple(int(v) for v in row) for row in pts]
    for d in range(2, depth + 1):
        nxt = []
        pj = p ** (d - 1)
        for pt in level:
            x, y = list(pt[:system.n1]), list(pt[system.n1:])
            Fv = fm.evaluate(system, x, y)
            rhs = [(-(v // pj)) % p for v in Fv]
            J = fm.jacobian(system, x, y)
            sol = solve_mod_p(J, rhs, p)
            if sol is None:
                continue
            part, basis = sol
            for coeffs in product(range(p), repeat=len(basis)):
                delta = list(part)
                for c, vec in zip(coeffs, basis):
                    if c:
                        delta = [(dd + c * v) % p
                                 for dd, v in zip(delta, vec)]
                cand = tuple(pt[i] + pj * delta[i] for i in range(len(pt)))
                nxt.append(cand)
                if len(nxt) > budget:
                    raise BudgetExceededError(len(nxt), budget,
                                              "p-adic zero search")
        for pt in nxt:
            x, y = list(pt[:system.n1]), list(pt[system.n1:])
            e = _min_minor_valuation(fm.jacobian(system, x, y),
                                     system.R, p, d)
            if e is not None and 2 * e < d:
                return PadicZeroVerdict(True, (tuple(x), tuple(y)), p, d)
        level = nxt
        if not level:
            break
    return PadicZeroVerdict(False, None, p, depth)


def _min_minor_valuation(J, R, p, cap):
    from itertools import combinations
    from .linalg import det_exact
    ncols = len(J[0])
    best = None
    for cols in combinations(range(ncols), R):
        d = int(det_exact([[J[r][c] for c in cols] for r in range(R)]))
        if d == 0:
            continue
        e = 0
        while d % p == 0 and e < cap:
            d //= p
            e += 1
        best = e if best is None else min(best, e)
        if best == 0:
            return 0
    return best


def smooth_real_zero(system, boxes, *, seed=0, starts=64,
                     residual_tol=1e-10, sigma_min_tol=1e-6):
    """Damped Gauss-Newton from a low-discrepancy start grid; a witness
    needs residual < tol, smallest Jacobian singular value > threshold,
    and membership in the closed boxes.  Absence is never certified."""
    from scipy.stats import qmc
    iv = list(boxes.x_intervals) + list(boxes.y_intervals)
    lo = np.array([float(a) for a, _ in iv])
    hi = np.array([float(b) for _, b in iv])
    n1 = system.n1
    sob = qmc.Sobol(d=len(iv), scramble=True, seed=seed)
    pts = lo + (hi - lo) * sob.random(starts)
    best = RealZeroVerdict(False, None, math.inf, 0.0)
    for z0 in pts:
        z = z0.copy()
        for _ in range(60):
            F = np.array(fm.evaluate(system, z[:n1].tolist(),
                                     z[n1:].tolist()), dtype=float)
            res = np.linalg.norm(F, ord=np.inf)
            if res < residual_tol:
                break
            J = np.array(fm.jacobian(system, z[:n1].tolist(),
                                     z[n1:].tolist()), dtype=float)
            step, *_ = np.linalg.lstsq(J, -F, rcond=None)
            t = 1.0
            improved = False
            for _ in range(25):
                cand = np.clip(z + t * step, lo, hi)
                Fc = np.array(fm.evaluate(system, cand[:n1].tolist(),
                                          cand[n1:].tolist()), dtype=float)
                if np.linalg.norm(Fc, ord=np.inf) < res:
                    z = cand
                    improved = True
                    break
                t *= 0.5
            if not improved:
                break
        F = np.array(fm.evaluate(system, z[:n1].tolist(), z[n1:].tolist()),
                     dtype=float)
        res = float(np.linalg.norm(F, ord=np.inf))
        J = np.array(fm.jacobian(system, z[:n1].tolist(), z[n1:].tolist()),
                     dtype=float)
        smin = float(np.linalg.svd(J, compute_uv=False)[-1])
        inside = bool(np.all(z >= lo - 1e-12) and np.all(z <= hi + 1e-12))
        if res < residual_tol and smin > sigma_min_tol and inside:
            return RealZeroVerdict(True, tuple(float(v) for v in z), res, smin)
        if res < best.residual:
            best = RealZeroVerdict(False, tuple(float(v) for v in z), res,
                                   smin)
    return best


# -- sigma -------------------------------------------------------------------

def sigma_factor(system, boxes, budget=None):
    """sigma = (singular series) x (singular integral), with first-order
    interval error propagation and a positivity expectation flag."""
    budget = dict(budget or {})
    series = singular_series(
        system, budget.get("p_max", 100),
        variant=budget.get("series_variant", "euler"),
        per_prime_tol=budget.get("per_prime_tol", 1e-6))
    level = {"P": budget.get("slab_P", 32.0),
             "log2_samples": budget.get("log2_samples", 16),
             "gamma_max": budget.get("gamma_max", 30.0),
             "tol": budget.get("gamma_tol", 1e-4)}
    integral = singular_integral(
        system, boxes, variant=budget.get("integral_variant", "slab"),
        level=level, seed=budget.get("seed", 0))

    value = series.value * integral.value
    err = (abs(series.value) * integral.error_bound
           + abs(integral.value) * series.error_bound
           + series.error_bound * integral.error_bound)

    positivity = None
    if budget.get("check_zeros", True):
        real = smooth_real_zero(system, boxes,
                                seed=budget.get("seed", 0))
        ps = primes_up_to(budget.get("zero_p_max", 13))
        padic_ok = []
        for p in ps:
            try:
                padic_ok.append(smooth_padic_zero(system, p).found)
            except BudgetExceededError:
                padic_ok.append(None)
        positivity = {
            "real_zero": real.found,
            "padic_zeros": dict(zip(ps, padic_ok)),
            "expected_positive": real.found and all(v for v in padic_ok
                                                    if v is not None),
        }
    return DensityEstimate(value, err, "sigma",
                           f"series[{series.level}] x integral[{integral.level}]",
                           parts={"series": series, "integral": integral,
                                  "positivity": positivity})
