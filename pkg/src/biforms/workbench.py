"""End-to-end experiments: desk-scale verification of the asymptotic
count and the trivial-solution floor."""

import math
from dataclasses import dataclass, field

import numpy as np

from . import counting as ct
from . import densities as dn
from .util import BudgetExceededError, ValidationError


@dataclass
class ExperimentPlan:
    system: object
    boxes: object
    schedule: list                    # [(P1, P2), ...]
    budgets: dict = field(default_factory=dict)
    output: str | None = None

    def __post_init__(self):
        mins = [min(p1, p2) for p1, p2 in self.schedule]
        if any(nxt <= prev for prev, nxt in zip(mins, mins[1:])):
            raise ValidationError("schedule must increase in min(P1,P2)")
        for key, v in self.budgets.items():
            if key in ("seed", "check_zeros", "series_variant",
                       "integral_variant"):
                continue
            if isinstance(v, (int, float)) and v <= 0:
                raise ValidationError(f"budget {key} must be positive")


@dataclass
class AsymptoticRow:
    P1: float
    P2: float
    b: float
    u: float
    N: int | None
    main_term: float
    ratio: float | None
    skipped: bool = False


@dataclass
class AsymptoticResult:
    rows: list
    sigma: object
    delta: float | None
    delta_fitted: bool


def run_asymptotic(plan, *, enforce_sigma_width=True):
    """Exact N against the predicted main term sigma P1^(n1-d1 R)
    P2^(n2-d2 R) along the schedule, plus a residual-exponent fit.

    The two sides come from independent code paths: exact enumeration
    vs. Euler product and slab measure.
    """
    system, boxes = plan.system, plan.boxes
    sigma = dn.sigma_factor(system, boxes, plan.budgets)
    if sigma.value <= 0:
        raise ValidationError("sigma estimate is not positive")
    rel = sigma.error_bound / abs(sigma.value)
    if enforce_sigma_width and rel >= 0.05:
        raise ValidationError(f"sigma relative half-width {rel:.3f} >= 5%")

    e1 = system.n1 - system.d1 * system.R
    e2 = system.n2 - system.d2 * system.R
    rows = []
    budget = plan.budgets.get("count_budget", 10 ** 9)
    for P1, P2 in plan.schedule:
        b = max(math.log(P1) / math.log(P2), 1.0)
        u = max(math.log(P2) / math.log(P1), 1.0)
        main = sigma.value * P1 ** e1 * P2 ** e2
        try:
            res = ct.count_N(system, boxes, P1, P2, budget=budget)
        except BudgetExceededError:
            rows.append(AsymptoticRow(P1, P2, b, u, None, main, None, True))
            continue
        ratio = res.count / main if main > 0 else None
        rows.append(AsymptoticRow(P1, P2, b, u, res.count, main, ratio))

    # residual exponent: log|ratio - 1| against log min(P1,P2) on the
    # back half, ignoring rows already at the noise floor of sigma
    usable = []
    half = len(plan.schedule) // 2
    for row in rows[half:]:
        if row.skipped or row.ratio is None:
            continue
        dev = abs(row.ratio - 1.0)
        if dev > 10.0 * rel:
            usable.append((math.log(min(row.P1, row.P2)), math.log(dev)))
    if len(usable) >= 2:
        xs = np.array([u for u, _ in usable])
        ys = np.array([v for _, v in usable])
        slope = np.polyfit(xs, ys, 1)[0]
        return AsymptoticResult(rows, sigma, -float(slope), True)
    return AsymptoticResult(rows, sigma, None, False)


@dataclass
class FloorRow:
    P1: float
    P2: float
    N: int
    floor: int
    ok: bool


def run_lower_bound_check(system, boxes, schedule, *, budget=10 ** 9):
    """N >= (x-slice with y=0) + (y-slice with x=0) - overlap, exactly.

    Any x with y = 0 kills every form (d2 >= 1), and symmetrically, so
    the slices are a certified floor whenever 0 lies in the other box.
    """
    out = []
    for P1, P2 in schedule:
        fx = boxes.x_point_count(P1) if boxes.contains_y_zero(P2) else 0
        fy = boxes.y_point_count(P2) if boxes.contains_x_zero(P1) else 0
        overlap = 1 if (boxes.contains_x_zero(P1)
                        and boxes.contains_y_zero(P2)) else 0
        floor = fx + fy - overlap
        res = ct.count_N(system, boxes, P1, P2, budget=budget)
        out.append(FloorRow(P1, P2, res.count, floor, res.count >= floor))
    return out
