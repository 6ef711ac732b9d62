"""Exponential sums, their complete and archimedean companions, arc
classification, and the empirical inequality auditors.

The generating sum S(alpha) couples the two variable blocks, but for a
block that enters linearly the inner sum is a product of geometric sums
with a closed form, which is what makes desk-scale P feasible.
"""

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from math import gcd

import numpy as np

from . import forms as fm
from .counting import count_M, grid_array, iter_grid_chunks, _grid_total
from .util import (BudgetExceededError, DEFAULT_BUDGET, KahanComplex,
                   ValidationError)

PHASE_TERM_LIMIT = 10 ** 8


@dataclass(frozen=True)
class ArcParams:
    delta: float
    P1: float
    P2: float
    d1: int
    d2: int

    def __post_init__(self):
        if self.delta <= 0:
            raise ValidationError("Delta must be positive")
        if self.P1 <= 1 or self.P2 <= 1:
            raise ValidationError("P1, P2 must exceed 1")

    @property
    def b(self):
        return max(math.log(self.P1) / math.log(self.P2), 1.0)

    @property
    def u(self):
        return max(math.log(self.P2) / math.log(self.P1), 1.0)

    @property
    def P(self):
        return self.P1 ** self.d1 * self.P2 ** self.d2


@dataclass
class ArcMembership:
    kind: str                  # "major" | "minor"
    witness: tuple | None      # (a tuple, q) when major

    def __post_init__(self):
        if self.kind not in ("major", "minor"):
            raise ValidationError("kind must be major or minor")
        if (self.kind == "major") != (self.witness is not None):
            raise ValidationError("witness present iff major")


@dataclass
class OscillatoryResult:
    value: complex
    error: float
    converged: bool
    panels: int


def _phase_coeff_grids(system, weights, outer_grid):
    """For d2 = 1: the linear phase coefficients t_m(x) = sum_i w_i
    c_{i,m}(x) on a grid of x points.  Returns (N, n2) float array."""
    struct = fm.y_linear_coeffs(system)
    N = outer_grid.shape[0]
    out = np.zeros((N, system.n2))
    for w, per_m in zip(weights, struct):
        if w == 0:
            continue
        wf = float(w)
        for m, poly in enumerate(per_m):
            if not poly:
                continue
            acc = np.zeros(N)
            for j, c in poly.items():
                term = np.full(N, float(c))
                for a in j:
                    term = term * outer_grid[:, a]
                acc += term
            out[:, m] += wf * acc
    return out


def _geometric_block(T, ranges):
    """prod_m sum_{v=lo_m..hi_m} e(T[:,m] v), vectorised over rows of T."""
    total = np.ones(T.shape[0], dtype=complex)
    for m, (lo, hi) in enumerate(ranges):
        L = hi - lo + 1
        if L <= 0:
            return np.zeros(T.shape[0], dtype=complex)
        t = T[:, m]
        frac = t - np.rint(t)
        center = 0.5 * (lo + hi)
        with np.errstate(invalid="ignore", divide="ignore"):
            dirichlet = np.sin(np.pi * t * L) / np.sin(np.pi * t)
        near_int = np.abs(frac) < 1e-13
        dirichlet = np.where(near_int, float(L), dirichlet)
        phase = np.exp(2j * np.pi * t * center)
        vals = np.where(near_int, float(L) + 0j, phase * dirichlet)
        total = total * vals
    return total


def weighted_sum(system, boxes, alpha, P1, P2, *, budget=PHASE_TERM_LIMIT):
    """S(alpha) = sum over x in P1*B1, y in P2*B2 of e(alpha . F(x,y))."""
    if P1 <= 1 or P2 <= 1:
        raise ValidationError("P1, P2 must exceed 1")
    alpha = [float(a) for a in alpha]
    if len(alpha) != system.R:
        raise ValidationError("alpha length mismatch")
    xr = boxes.x_ranges(P1)
    yr = boxes.y_ranges(P2)

    if system.d2 == 1:
        return _weighted_sum_linear(system, alpha, xr, yr, budget)
    if system.d1 == 1:
        return _weighted_sum_linear(fm.swap_xy(system), alpha, yr, xr, budget)

    pairs = _grid_total(xr) * _grid_total(yr)
    if pairs > budget:
        raise BudgetExceededError(pairs, budget, "weighted_sum")
    acc = KahanComplex()
    for x in product(*[range(lo, hi + 1) for lo, hi in xr]):
        for y in product(*[range(lo, hi + 1) for lo, hi in yr]):
            vals = fm.evaluate(system, x, y)
            ph = sum(a * v for a, v in zip(alpha, vals))
            acc.add(cmath.exp(2j * math.pi * ph))
    return acc.value()


def _weighted_sum_linear(system, alpha, xr, yr, budget):
    n_outer = _grid_total(xr)
    if n_outer * max(1, len(yr)) > budget:
        raise BudgetExceededError(n_outer, budget, "weighted_sum")
    if n_outer == 0 or _grid_total(yr) == 0:
        return 0j
    acc = KahanComplex()
    for chunk in iter_grid_chunks(xr):
        T = _phase_coeff_grids(system, alpha, chunk.astype(float))
        vals = _geometric_block(T, yr)
        acc.add(complex(np.sum(vals)))  # pairwise inside, Kahan across
    return acc.value()


# -- complete sums --------------------------------------------------------

def _residue_solution_count(system, a, q, budget=DEFAULT_BUDGET):
    """#{x mod q} with the y-linear phase coefficients all = 0 mod q,
    i.e. q^{n2} * (that count) solutions of a.F = 0 summing trivially."""
    struct = fm.y_linear_coeffs(system)
    rows = q ** system.n1
    if rows > budget:
        raise BudgetExceededError(rows, budget, "complete_sum")
    grid = grid_array([(0, q - 1)] * system.n1)
    w = np.zeros((grid.shape[0], system.n2), dtype=np.int64)
    for ai, per_m in zip(a, struct):
        ai = ai % q
        if ai == 0:
            continue
        for m, poly in enumerate(per_m):
            for j, c in poly.items():
                t = (ai * c) % q
                if t == 0:
                    continue
                term = np.full(grid.shape[0], t, dtype=np.int64)
                for b in j:
                    term = (term * grid[:, b]) % q
                w[:, m] = (w[:, m] + term) % q
    return int(np.count_nonzero(np.all(w == 0, axis=1)))


def complete_sum(system, a, q, *, budget=DEFAULT_BUDGET):
    """Normalised complete sum S_{a,q} = q^{-n1-n2} sum_{x,y mod q}
    e((a/q) . F(x,y)); |S_{a,q}| <= 1, depends on a mod q only."""
    if q < 1:
        raise ValidationError("q must be positive")
    a = [int(v) % q for v in a]
    if len(a) != system.R:
        raise ValidationError("a length mismatch")
    if q == 1 or all(v == 0 for v in a):
        return 1 + 0j
    if system.d2 == 1:
        cnt = _residue_solution_count(system, a, q, budget)
        return complex(Fraction(cnt, q ** system.n1))
    if system.d1 == 1:
        cnt = _residue_solution_count(fm.swap_xy(system), a, q, budget)
        return complex(Fraction(cnt, q ** system.n2))
    # generic: histogram of residues of a.F mod q, then one root-of-unity pass
    n = system.n1 + system.n2
    rows = q ** n
    if rows > budget:
        raise BudgetExceededError(rows, budget, "complete_sum")
    counts = np.zeros(q, dtype=np.int64)
    for x in product(range(q), repeat=system.n1):
        for chunk in iter_grid_chunks([(0, q - 1)] * system.n2):
            vals = np.zeros(chunk.shape[0], dtype=np.int64)
            for ai, mono in zip(a, system.coeffs):
                if ai == 0:
                    continue
                for (j, k), c in mono.items():
                    t = ai * c
                    for idx in j:
                        t *= x[idx]
                    t %= q
                    if t == 0:
                        continue
                    term = np.full(chunk.shape[0], t, dtype=np.int64)
                    for idx in k:
                        term = (term * chunk[:, idx]) % q
                    vals = (vals + term) % q
            counts += np.bincount(vals, minlength=q)
    roots = np.exp(2j * np.pi * np.arange(q) / q)
    return complex(np.dot(counts, roots) / q ** n)


# -- oscillatory integral --------------------------------------------------

_GL_CACHE = {}


def _gl_nodes(n):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def _panel_integral(f, lo, hi, order):
    """Tensor Gauss-Legendre of a vectorised integrand over a box."""
    dim = len(lo)
    nodes, weights = _gl_nodes(order)
    axes, wts = [], []
    for d in range(dim):
        mid, half = 0.5 * (lo[d] + hi[d]), 0.5 * (hi[d] - lo[d])
        axes.append(mid + half * nodes)
        wts.append(half * weights)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
    wmesh = np.meshgrid(*wts, indexing="ij")
    wall = np.ones(pts.shape[0])
    for wm in wmesh:
        wall = wall * wm.reshape(-1)
    return complex(np.dot(f(pts), wall))


def oscillatory_integral(system, boxes, gamma, tol, *,
                         max_panels=4096, order=8):
    """S_inf(gamma) = integral over B1 x B2 of e(gamma . F(u,v)) du dv,
    by adaptive panel refinement of a tensor Gauss-Legendre rule.

    A linear block is integrated in closed form, leaving the adaptive
    rule on the other block only.
    """
    if tol <= 0:
        raise ValidationError("tol must be positive")
    gamma = [float(g) for g in gamma]
    if len(gamma) != system.R:
        raise ValidationError("gamma length mismatch")
    if system.d2 == 1:
        sys_, outer, inner = system, boxes.x_intervals, boxes.y_intervals
    elif system.d1 == 1:
        sys_, outer, inner = fm.swap_xy(system), boxes.y_intervals, \
            boxes.x_intervals
    else:
        return _oscillatory_full(system, boxes, gamma, tol, max_panels, order)
    inner_iv = [(float(lo), float(hi)) for lo, hi in inner]

    def integrand(pts):
        T = _phase_coeff_grids(sys_, gamma, pts)
        total = np.ones(pts.shape[0], dtype=complex)
        for m, (lo, hi) in enumerate(inner_iv):
            t = T[:, m]
            small = np.abs(t) < 1e-12
            ts = np.where(small, 1.0, t)
            vals = (np.exp(2j * np.pi * ts * hi)
                    - np.exp(2j * np.pi * ts * lo)) / (2j * np.pi * ts)
            # exact first-order value on the small-|t| branch
            vals = np.where(small, (hi - lo) * np.exp(1j * np.pi * t *
                                                      (hi + lo)), vals)
            total = total * vals
        return total

    lo = [float(a) for a, _ in outer]
    hi = [float(b) for _, b in outer]
    return _adaptive_panels(integrand, lo, hi, tol, max_panels, order)


def _oscillatory_full(system, boxes, gamma, tol, max_panels, order):
    iv = list(boxes.x_intervals) + list(boxes.y_intervals)
    lo = [float(a) for a, _ in iv]
    hi = [float(b) for _, b in iv]
    n1 = system.n1

    def integrand(pts):
        N = pts.shape[0]
        ph = np.zeros(N)
        for g, mono in zip(gamma, system.coeffs):
            if g == 0:
                continue
            for (j, k), c in mono.items():
                term = np.full(N, float(c))
                for a in j:
                    term = term * pts[:, a]
                for b in k:
                    term = term * pts[:, n1 + b]
                ph += g * term
        return np.exp(2j * np.pi * ph)

    return _adaptive_panels(integrand, lo, hi, tol, max_panels, order)


def _adaptive_panels(integrand, lo, hi, tol, max_panels, order):
    import heapq
    coarse = _panel_integral(integrand, lo, hi, order)
    fine = _panel_integral(integrand, lo, hi, order + 4)
    err = abs(fine - coarse)
    heap = [(-err, 0, tuple(lo), tuple(hi), fine, err)]
    counter = 1
    panels = 1
    while panels < max_panels:
        total_err = sum(item[5] for item in heap)
        if total_err < tol:
            break
        neg, _, plo, phi, val, perr = heapq.heappop(heap)
        # split along the widest axis
        widths = [b - a for a, b in zip(plo, phi)]
        ax = widths.index(max(widths))
        mid = 0.5 * (plo[ax] + phi[ax])
        for piece_lo, piece_hi in (
                (plo, tuple(mid if i == ax else v for i, v in enumerate(phi))),
                (tuple(mid if i == ax else v for i, v in enumerate(plo)), phi)):
            c = _panel_integral(integrand, list(piece_lo), list(piece_hi),
                                order)
            f = _panel_integral(integrand, list(piece_lo), list(piece_hi),
                                order + 4)
            e = abs(f - c)
            heapq.heappush(heap, (-e, counter, piece_lo, piece_hi, f, e))
            counter += 1
        panels += 1
    value = sum(item[4] for item in heap)
    error = sum(item[5] for item in heap)
    return OscillatoryResult(value, error, error < tol, panels)


# -- arcs ------------------------------------------------------------------

def arc_classify(params, alpha, *, variant="standard"):
    """Classify alpha in [0,1]^R as major (with minimal-q witness) or minor.

    standard: 2 ||q alpha - a||_inf < P1^-d1 P2^-d2 P^Delta,  q <= P^Delta
    primed:   ||alpha - a/q||_inf  < P1^-d1 P2^-d2 P^Delta,   0 <= a_i < q
    """
    alpha = [float(v) for v in alpha]
    if any(v < 0 or v > 1 for v in alpha):
        raise ValidationError("alpha must lie in [0,1]^R")
    if variant not in ("standard", "primed"):
        raise ValidationError("unknown arc variant")
    P = params.P
    bound = params.P1 ** (-params.d1) * params.P2 ** (-params.d2) \
        * P ** params.delta
    qmax = math.floor(P ** params.delta)
    for q in range(1, qmax + 1):
        cand = []
        for v in alpha:
            t = q * v
            af = math.floor(t)
            ac = af + 1
            # nearest with deterministic tie toward the smaller value
            a = af if (t - af) <= (ac - t) else ac
            hi = q if variant == "standard" else q - 1
            cand.append(min(max(a, 0), hi))
        g = q
        for v in cand:
            g = gcd(g, v)
        if g != 1:
            continue
        if variant == "standard":
            dev = max(abs(q * v - a) for v, a in zip(alpha, cand))
            if 2 * dev < bound:
                return ArcMembership("major", (tuple(cand), q))
        else:
            dev = max(abs(v - a / q) for v, a in zip(alpha, cand))
            if dev < bound:
                return ArcMembership("major", (tuple(cand), q))
    return ArcMembership("minor", None)


# -- auditors ---------------------------------------------------------------

@dataclass
class WeylAuditReport:
    lhs: float
    rhs: float
    ratio: float
    M1: int
    S_abs: float
    eps: float


def audit_weyl(system, boxes, alpha, P1, P2, *, eps=0.01,
               budget=PHASE_TERM_LIMIT):
    """Both sides of the Weyl-differencing bound
    |S|^(2^dt) <= P1^(n1(2^dt-d1+1)+eps) P2^(n2(2^dt-d2)) M1(., P1^-1)
    with implied constant 1; reported as a ratio, never asserted."""
    dt = system.d1 + system.d2 - 2
    S = weighted_sum(system, boxes, alpha, P1, P2, budget=budget)
    # the counter budget is the global enumeration budget, not the
    # phase-sum term limit
    M1 = count_M(system, 1, alpha, P1, P2, Fraction(1, math.ceil(P1))
                 if all(isinstance(v, (int, Fraction)) for v in alpha)
                 else 1.0 / P1, budget=max(budget, DEFAULT_BUDGET))
    lhs = abs(S) ** (2 ** dt)
    rhs = P1 ** (system.n1 * (2 ** dt - system.d1 + 1) + eps) \
        * P2 ** (system.n2 * (2 ** dt - system.d2)) * M1
    ratio = lhs / rhs if rhs > 0 else math.inf
    return WeylAuditReport(lhs, rhs, ratio, M1, abs(S), eps)


@dataclass
class AuxAuditReport:
    satisfied: bool
    log_margin: float
    lhs: float
    rhs: float
    beta_norm: float


def audit_aux_inequality(system, boxes, alpha, beta, P1, P2, C_script, *,
                         C=1.0, eps=0.01, budget=PHASE_TERM_LIMIT):
    """The auxiliary inequality with supplied exponent C_script and
    constant C:

    min(|S(a)|,|S(a+b)|) / (P1^(n1+eps) P2^n2)
        <= C max(P2^-1, P1^-d1 P2^-d2 / |b|_inf, |b|_inf^(1/(dt+1)))^C_script
    """
    if not (P1 >= P2 > 1):
        raise ValidationError("require P1 >= P2 > 1")
    beta = [float(b) for b in beta]
    bnorm = max(abs(b) for b in beta)
    if bnorm == 0:
        raise ValidationError("beta must be nonzero")
    dt = system.d1 + system.d2 - 2
    Sa = weighted_sum(system, boxes, alpha, P1, P2, budget=budget)
    Sab = weighted_sum(system, boxes,
                       [a + b for a, b in zip(alpha, beta)], P1, P2,
                       budget=budget)
    lhs = min(abs(Sa), abs(Sab)) / (P1 ** (system.n1 + eps)
                                    * P2 ** system.n2)
    base = max(1.0 / P2,
               P1 ** (-system.d1) * P2 ** (-system.d2) / bnorm,
               bnorm ** (1.0 / (dt + 1)))
    rhs = C * base ** C_script
    margin = math.log(rhs) - math.log(lhs) if lhs > 0 else math.inf
    return AuxAuditReport(lhs <= rhs, margin, lhs, rhs, bnorm)
