"""Optimal nonlinear pricing: pointwise marginal prices, payment anchoring,
seller best responses, and the full contract pipeline.

Discretization conventions. The payment schedule is a left-Riemann sum of a
per-cell marginal price: t(q_k) = t0 + sum_{j<k} p_j * dq. Each cell's price
is chosen from the cell-averaged expected marginal costs

    cbar_j(x) = (EC(q_{j+1}, x) - EC(q_j, x)) / dq,

and the cell-averaged marginal utility vbar_j = (V(q_{j+1}) - V(q_j)) / dq.
With these averages the seller's grid utility telescopes exactly into
per-cell margins, so the pointwise per-cell maximization is exactly optimal
among candidate schedules on the grid (not merely up to O(dq)); the averages
coincide with the pointwise c(q, x) and V'(q) as dq -> 0.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .costmodel import CostModel, SellerType, TypeSpace, dominates, find_worst_type
from .errors import ConfigurationError, ParameterDomainError
from .weather import WeatherModel

DEFAULT_N_CELLS = 2000


@dataclass(frozen=True)
class QuantityGrid:
    """Uniform quantity grid from 0 to q_max with n_cells cells."""

    q_max: float
    n_cells: int

    def __post_init__(self) -> None:
        if self.q_max <= 0.0:
            raise ConfigurationError(f"q_max must be positive, got {self.q_max}")
        if self.n_cells < 1:
            raise ConfigurationError(f"n_cells must be >= 1, got {self.n_cells}")

    @property
    def dq(self) -> float:
        return self.q_max / self.n_cells

    @property
    def points(self) -> np.ndarray:
        return np.linspace(0.0, self.q_max, self.n_cells + 1)


class BuyerUtility:
    """Buyer's marginal utility V'(q), nonincreasing; V(0) = 0.

    Two families: affine V'(q) = a - b*q (a > 0, b >= 0) and piecewise
    linear through breakpoints, held constant beyond the last breakpoint.
    """

    def __init__(self, kind: str, **spec: object) -> None:
        self.kind = kind
        if kind == "affine":
            a = float(spec["intercept"])  # type: ignore[arg-type]
            b = float(spec["slope"])  # type: ignore[arg-type]
            if a <= 0.0 or b < 0.0:
                raise ConfigurationError("affine V' needs intercept > 0 and slope >= 0")
            self.intercept, self.slope = a, b
        elif kind == "piecewise":
            pts = [(float(q), float(v)) for q, v in spec["breakpoints"]]  # type: ignore
            if len(pts) < 2:
                raise ConfigurationError("piecewise V' needs at least two breakpoints")
            qs = [q for q, _ in pts]
            vs = [v for _, v in pts]
            if qs[0] != 0.0:
                raise ConfigurationError("piecewise V' must start at q = 0")
            if any(b <= a for a, b in zip(qs, qs[1:])):
                raise ConfigurationError("piecewise V' breakpoints must be increasing in q")
            if any(b > a for a, b in zip(vs, vs[1:])):
                raise ConfigurationError("piecewise V' must be nonincreasing")
            self.break_q = np.array(qs)
            self.break_v = np.array(vs)
            # cumulative integral of V' at the breakpoints (trapezoids)
            seg = 0.5 * (self.break_v[1:] + self.break_v[:-1]) * np.diff(self.break_q)
            self.break_int = np.concatenate([[0.0], np.cumsum(seg)])
        else:
            raise ConfigurationError(f"unknown buyer utility kind {kind!r}")

    @classmethod
    def affine(cls, intercept: float, slope: float) -> "BuyerUtility":
        return cls("affine", intercept=intercept, slope=slope)

    @classmethod
    def piecewise(cls, breakpoints: Sequence[tuple[float, float]]) -> "BuyerUtility":
        return cls("piecewise", breakpoints=breakpoints)

    def marginal(self, q):
        q = np.asarray(q, dtype=float)
        if self.kind == "affine":
            out = self.intercept - self.slope * q
        else:
            out = np.interp(q, self.break_q, self.break_v)
        return float(out) if out.ndim == 0 else out

    def value(self, q):
        """V(q) = integral of V' from 0 to q."""
        q = np.asarray(q, dtype=float)
        if self.kind == "affine":
            out = self.intercept * q - 0.5 * self.slope * q * q
        else:
            i = np.clip(np.searchsorted(self.break_q, q, side="right") - 1, 0, None)
            q0, v0 = self.break_q[i], self.break_v[i]
            vq = np.interp(q, self.break_q, self.break_v)
            out = self.break_int[i] + 0.5 * (v0 + vq) * (q - q0)
        return float(out) if out.ndim == 0 else out

    def q_zero(self) -> Optional[float]:
        """Smallest q with V'(q) <= 0, or None if V' stays positive."""
        if self.kind == "affine":
            if self.slope == 0.0:
                return None
            return self.intercept / self.slope
        if self.break_v[-1] > 0.0:
            return None
        idx = int(np.argmax(self.break_v <= 0.0))
        if idx == 0:
            return 0.0
        q0, q1 = self.break_q[idx - 1], self.break_q[idx]
        v0, v1 = self.break_v[idx - 1], self.break_v[idx]
        return float(q0 + v0 * (q1 - q0) / (v0 - v1))


def default_grid(vprime: BuyerUtility, n_cells: int = DEFAULT_N_CELLS) -> QuantityGrid:
    qz = vprime.q_zero()
    if qz is None or qz <= 0.0:
        raise ConfigurationError(
            "V' never reaches zero; q_max must be given explicitly in the grid spec"
        )
    return QuantityGrid(q_max=qz, n_cells=n_cells)


@dataclass
class PriceSchedule:
    """Marginal price per grid cell plus the payment anchor t(0).

    p[j] prices the cell [points[j], points[j+1]); NaN marks closed cells.
    closed_from is the first closed cell index (procurement stops there),
    or None when every cell is open.
    """

    grid: QuantityGrid
    p: np.ndarray
    t0: float = 0.0
    closed_from: Optional[int] = None

    @property
    def n_open(self) -> int:
        return self.grid.n_cells if self.closed_from is None else self.closed_from

    @property
    def last_point(self) -> int:
        """Index of the last grid point the seller may deliver."""
        return self.n_open

    def payments(self) -> np.ndarray:
        """t at every grid point; flat beyond the closed range."""
        contrib = np.where(np.isnan(self.p), 0.0, self.p) * self.grid.dq
        return self.t0 + np.concatenate([[0.0], np.cumsum(contrib)])

    def payment_at_index(self, k: int) -> float:
        return float(self.payments()[k])


@dataclass(frozen=True)
class TypeOutcome:
    type_id: str
    q: float
    payment: float
    expected_cost: float
    utility: float
    threshold_q: float
    quasi_concave: bool


@dataclass
class ContractOutcome:
    """Solved contract: per-type best responses plus aggregate buyer utility
    computed both directly and via the survival-integral identity."""

    schedule: PriceSchedule
    per_type: tuple[TypeOutcome, ...]
    buyer_utility: float
    buyer_utility_survival: float
    admissible_ids: tuple[str, ...]

    def by_id(self, type_id: str) -> TypeOutcome:
        for rec in self.per_type:
            if rec.type_id == type_id:
                return rec
        raise ConfigurationError(f"no outcome for type {type_id!r}")


def cell_marginal_costs(
    space: TypeSpace, model: CostModel, weather: WeatherModel, grid: QuantityGrid
) -> np.ndarray:
    """cbar[i, j]: average expected marginal cost of type i on cell j."""
    pts = grid.points
    rows = [model.expected_cost_grid(x, pts, weather) for x in space]
    return np.diff(np.array(rows), axis=1) / grid.dq


def cell_marginal_utility(vprime: BuyerUtility, grid: QuantityGrid) -> np.ndarray:
    return np.diff(vprime.value(grid.points)) / grid.dq


def survival_probability(
    p_hat: float,
    q: float,
    space: TypeSpace,
    model: CostModel,
    weather: WeatherModel,
) -> float:
    """Prior mass of types whose expected marginal cost at q is <= p_hat."""
    return math.fsum(
        x.prior_weight
        for x in space
        if p_hat >= model.expected_marginal_cost(x, q, weather)
    )


def _best_cell_price(
    costs: np.ndarray, priors: np.ndarray, v_marg: float
) -> Optional[float]:
    """Maximize survival(p_hat) * (v_marg - p_hat) over candidate prices.

    Candidates are the per-type costs; the survival function is a step
    function jumping exactly there, so the maximum is attained at a
    candidate. Ties break to the smallest candidate. Returns None when no
    margin is profitable (the cell is closed).
    """
    order = np.argsort(costs, kind="stable")
    cs = costs[order]
    cum = np.cumsum(priors[order])
    # survival at candidate value cs[i] must count every type with cost <= cs[i]
    surv = cum[np.searchsorted(cs, cs, side="right") - 1]
    obj = surv * (v_marg - cs)
    best = int(np.argmax(obj))
    if obj[best] <= 0.0 and v_marg < cs[0]:
        return None
    # smallest maximizing candidate
    ties = np.nonzero(obj == obj[best])[0]
    return float(cs[ties[0]])


def optimal_marginal_price(
    q: float,
    space: TypeSpace,
    model: CostModel,
    weather: WeatherModel,
    vprime: BuyerUtility,
) -> Optional[float]:
    """Pointwise optimal marginal price at quantity q; None means closed."""
    if len(space) == 0:
        raise ConfigurationError("empty admissible set")
    costs = np.array([model.expected_marginal_cost(x, q, weather) for x in space])
    priors = np.array([x.prior_weight for x in space])
    return _best_cell_price(costs, priors, float(vprime.marginal(q)))


def build_price_schedule(
    space: TypeSpace,
    model: CostModel,
    weather: WeatherModel,
    vprime: BuyerUtility,
    grid: QuantityGrid,
) -> PriceSchedule:
    """Pointwise-optimal price for every cell; t0 is left at 0 (see
    anchor_payment)."""
    cbar = cell_marginal_costs(space, model, weather, grid)
    vbar = cell_marginal_utility(vprime, grid)
    priors = np.array([x.prior_weight for x in space])
    p = np.full(grid.n_cells, np.nan)
    closed_from: Optional[int] = None
    for j in range(grid.n_cells):
        price = _best_cell_price(cbar[:, j], priors, float(vbar[j]))
        if price is None:
            if closed_from is None:
                closed_from = j
        else:
            if closed_from is not None:
                # V' is nonincreasing and costs nondecreasing, so closure
                # must be permanent; anything else is a bug.
                raise RuntimeError(f"cell {j} reopened after closure at {closed_from}")
            p[j] = price
    return PriceSchedule(grid=grid, p=p, t0=0.0, closed_from=closed_from)


def _responses_zero_anchor(
    schedule: PriceSchedule,
    space: TypeSpace,
    model: CostModel,
    weather: WeatherModel,
) -> tuple[np.ndarray, np.ndarray]:
    """Best-response grid indices and expected costs with t0 = 0.

    t0 shifts every grid utility equally, so the argmax is anchor-free.
    Ties break to the largest quantity.
    """
    pts = schedule.grid.points
    last = schedule.last_point
    dq = schedule.grid.dq
    ecs = np.array([model.expected_cost_grid(x, pts, weather) for x in space])
    cbars = np.diff(ecs, axis=1) / dq
    util = np.empty((len(space), last + 1))
    util[:, 0] = -ecs[:, 0]
    if last > 0:
        margins = (schedule.p[None, :last] - cbars[:, :last]) * dq
        util[:, 1:] = util[:, :1] + np.cumsum(margins, axis=1)
    rev = util[:, ::-1]
    idx = last - np.argmax(rev, axis=1)
    return idx, ecs


def anchor_payment(
    schedule: PriceSchedule,
    space: TypeSpace,
    model: CostModel,
    weather: WeatherModel,
) -> float:
    """Set and return t(0).

    With a worst type the anchor is its startup cost C(0, worst). Without
    one it is found a posteriori as the largest per-type deficit
    max_x [EC(q(x), x) - integral of p to q(x)], which makes every type's
    utility nonnegative and at least one exactly zero.
    """
    worst = find_worst_type(space, model, weather, schedule.grid.points)
    if worst is not None:
        w0 = weather.speeds[0]
        t0 = model.realized_cost(worst, 0.0, w0)
    else:
        idx, ecs = _responses_zero_anchor(schedule, space, model, weather)
        cum = np.concatenate(
            [[0.0], np.cumsum(np.nan_to_num(schedule.p) * schedule.grid.dq)]
        )
        deficits = [
            float(ecs[i, k] - cum[k]) for i, k in enumerate(idx)
        ]
        t0 = max(deficits)
    schedule.t0 = t0
    return t0


def best_response(
    x: SellerType,
    schedule: PriceSchedule,
    model: CostModel,
    weather: WeatherModel,
) -> TypeOutcome:
    """Global argmax of t(l) - EC(l, x) over deliverable grid points.

    Also computes the per-cell threshold quantity (produce while the cell
    price covers the cell's average marginal cost) and flags whether the
    two agree within one cell (the quasi-concavity audit).
    """
    grid = schedule.grid
    pts = grid.points
    last = schedule.last_point
    t = schedule.payments()
    ec = model.expected_cost_grid(x, pts, weather)
    cbar = np.diff(ec) / grid.dq

    # Accumulate per-cell margins rather than subtracting the cost curve
    # from the payment curve.  When the cell price coincides with this
    # type's own cell cost the margin is exactly zero, so runs of
    # indifferent cells stay exact ties and the largest-quantity
    # tie-break resolves them deterministically.
    util = np.empty(last + 1)
    util[0] = schedule.t0 - ec[0]
    if last > 0:
        util[1:] = util[0] + np.cumsum(
            (schedule.p[:last] - cbar[:last]) * grid.dq
        )
    k = int(last - np.argmax(util[::-1]))

    open_p = schedule.p[:last]
    ok = open_p >= cbar[:last] - 1e-12 * max(1.0, float(np.max(np.abs(cbar))))
    thr = int(np.nonzero(ok)[0][-1] + 1) if ok.any() else 0
    return TypeOutcome(
        type_id=x.id,
        q=float(pts[k]),
        payment=float(t[k]),
        expected_cost=float(ec[k]),
        utility=float(t[k] - ec[k]),
        threshold_q=float(pts[thr]),
        quasi_concave=abs(k - thr) <= 1,
    )


def _buyer_utility_survival(
    schedule: PriceSchedule,
    space: TypeSpace,
    model: CostModel,
    weather: WeatherModel,
    vprime: BuyerUtility,
) -> float:
    """Survival-integral form: -t0 + sum over open cells of
    P[p(l) >= c(l, x)] (V'(l) - p(l)) dq at the cells' left endpoints.

    Participation is tested against the cell-averaged costs that priced
    the schedule, so a type indifferent in a cell (price equal to its own
    cost) counts as producing there. Marginal utility stays pointwise at
    the left endpoint; its discretization error vanishes with the cell
    width.
    """
    grid = schedule.grid
    n = schedule.n_open
    if n == 0:
        return -schedule.t0
    cbar = cell_marginal_costs(space, model, weather, grid)[:, :n]
    priors = np.array([x.prior_weight for x in space])
    surv = priors @ (schedule.p[None, :n] >= cbar)
    vmarg = np.array([float(vprime.marginal(float(l))) for l in grid.points[:n]])
    total = float(np.sum(surv * (vmarg - schedule.p[:n]) * grid.dq))
    return total - schedule.t0


def solve(
    space: TypeSpace,
    model: CostModel,
    weather: WeatherModel,
    vprime: BuyerUtility,
    grid: QuantityGrid,
    admissible: Optional[Sequence[str]] = None,
) -> ContractOutcome:
    """Full pipeline: schedule, anchor, best responses, utilities."""
    adm = space if admissible is None else space.subset(admissible)
    schedule = build_price_schedule(adm, model, weather, vprime, grid)
    anchor_payment(schedule, adm, model, weather)
    records = tuple(best_response(x, schedule, model, weather) for x in adm)
    direct = math.fsum(
        x.prior_weight * (float(vprime.value(rec.q)) - rec.payment)
        for x, rec in zip(adm, records)
    )
    surv = _buyer_utility_survival(schedule, adm, model, weather, vprime)
    return ContractOutcome(
        schedule=schedule,
        per_type=records,
        buyer_utility=direct,
        buyer_utility_survival=surv,
        admissible_ids=tuple(x.id for x in adm),
    )


MAX_EXCLUSION_TYPES = 12


def _upward_closed_subsets(
    space: TypeSpace, model: CostModel, weather: WeatherModel, grid: QuantityGrid
) -> list[tuple[str, ...]]:
    """Non-empty subsets closed upward under dominance: keeping a type
    means keeping every better type. With no comparable pairs this is the
    full power set."""
    ids = [t.id for t in space]
    rel = {}
    for a, b in itertools.combinations(space.types, 2):
        rel[(a.id, b.id)] = dominates(a, b, model, weather, grid.points)
    better_than = {i: set() for i in ids}  # better_than[y] = types better than y
    for (a, b), r in rel.items():
        if r == "better":
            better_than[b].add(a)
        elif r == "worse":
            better_than[a].add(b)
    out = []
    full = tuple(ids)
    out.append(full)
    for r in range(1, len(ids)):
        for combo in itertools.combinations(ids, r):
            kept = set(combo)
            if all(better_than[y] <= kept for y in combo):
                out.append(combo)
    return out


def exclusion_search(
    space: TypeSpace,
    model: CostModel,
    weather: WeatherModel,
    vprime: BuyerUtility,
    grid: QuantityGrid,
    max_subsets: Optional[int] = None,
) -> tuple[tuple[str, ...], ContractOutcome, bool]:
    """Search admissible subsets for the best buyer utility.

    Returns (subset ids, outcome, exhaustive). The full set is always a
    candidate and wins ties. exhaustive is False when max_subsets truncated
    the enumeration (the result is then a heuristic).
    """
    if len(space) > MAX_EXCLUSION_TYPES and max_subsets is None:
        raise ConfigurationError(
            f"{len(space)} types exceed the enumeration limit "
            f"({MAX_EXCLUSION_TYPES}); pass max_subsets for a budgeted search"
        )
    candidates = _upward_closed_subsets(space, model, weather, grid)
    exhaustive = True
    if max_subsets is not None and len(candidates) > max_subsets:
        candidates = candidates[:max_subsets]
        exhaustive = False
    best_ids: Optional[tuple[str, ...]] = None
    best_outcome: Optional[ContractOutcome] = None
    for ids in candidates:
        outcome = solve(space, model, weather, vprime, grid, admissible=ids)
        if best_outcome is None or outcome.buyer_utility > best_outcome.buyer_utility:
            best_ids, best_outcome = ids, outcome
    assert best_ids is not None and best_outcome is not None
    return best_ids, best_outcome, exhaustive
