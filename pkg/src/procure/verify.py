"""Independent certification: constraint checks and a brute-force oracle.

Every check returns a CheckResult with the worst violation found, the
tolerance applied, and a witness string. Tolerances are grid-derived:
tol_grid = dq * (largest expected marginal cost anywhere on the grid).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .costmodel import CostModel, SellerType, TypeSpace, dominates, find_worst_type
from .errors import ConfigurationError
from .mechanism import (
    BuyerUtility,
    ContractOutcome,
    PriceSchedule,
    QuantityGrid,
    cell_marginal_costs,
    cell_marginal_utility,
    survival_probability,
)
from .weather import WeatherModel

ORACLE_MAX_TYPES = 4
ORACLE_MAX_CELLS = 8
ORACLE_TOL = 1e-9


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst: float
    tol: float
    witness: str

    def line(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (
            f"check={self.name} status={status} worst={self.worst:.12g} "
            f"tol={self.tol:.12g} witness={self.witness}"
        )


def grid_tolerance(
    space: TypeSpace, model: CostModel, weather: WeatherModel, grid: QuantityGrid
) -> float:
    cbar = cell_marginal_costs(space, model, weather, grid)
    return grid.dq * float(np.max(cbar))


def check_ic(
    outcome: ContractOutcome,
    schedule: PriceSchedule,
    space: TypeSpace,
    model: CostModel,
    weather: WeatherModel,
) -> CheckResult:
    """No type gains more than tol_grid by taking another type's bundle."""
    tol = grid_tolerance(space, model, weather, schedule.grid)
    t = schedule.payments()
    pts = schedule.grid.points
    worst_gain = -math.inf
    witness = "none"
    for x in space:
        rec = outcome.by_id(x.id)
        for y in space:
            if y.id == x.id:
                continue
            other = outcome.by_id(y.id)
            k = int(round(other.q / schedule.grid.dq))
            deviation = float(t[k]) - model.expected_cost(x, float(pts[k]), weather)
            gain = deviation - rec.utility
            if gain > worst_gain:
                worst_gain = gain
                witness = f"{x.id}->{y.id}"
    if worst_gain == -math.inf:
        worst_gain = 0.0
        witness = "single type"
    return CheckResult("ic", worst_gain <= tol, worst_gain, tol, witness)


def check_vp(
    outcome: ContractOutcome,
    space: TypeSpace,
    model: CostModel,
    weather: WeatherModel,
    grid: QuantityGrid,
) -> CheckResult:
    """All utilities >= -tol and the minimum utility is 0 within tol."""
    tol = grid_tolerance(space, model, weather, grid)
    utils = {rec.type_id: rec.utility for rec in outcome.per_type}
    min_id = min(utils, key=utils.get)
    min_u = utils[min_id]
    worst = abs(min_u)
    return CheckResult("vp", worst <= tol, worst, tol, f"min U at {min_id}")


def check_monotone(
    outcome: ContractOutcome,
    space: TypeSpace,
    model: CostModel,
    weather: WeatherModel,
    grid: QuantityGrid,
) -> CheckResult:
    """Dominance-ordered pairs: the better type gets more utility and
    produces more."""
    tol = grid_tolerance(space, model, weather, grid)
    worst = -math.inf
    witness = "no ordered pairs"
    for a, b in itertools.permutations(space.types, 2):
        if dominates(a, b, model, weather, grid.points) != "better":
            continue
        ra, rb = outcome.by_id(a.id), outcome.by_id(b.id)
        for kindname, viol in (
            ("U", rb.utility - ra.utility),
            ("q", rb.q - ra.q),
        ):
            if viol > worst:
                worst = viol
                witness = f"{kindname}({a.id} better than {b.id})"
    if worst == -math.inf:
        worst = 0.0
    return CheckResult("monotone", worst <= tol, worst, tol, witness)


def check_identity(
    outcome: ContractOutcome,
    schedule: PriceSchedule,
    vprime: BuyerUtility,
) -> CheckResult:
    """Direct buyer utility vs the survival-integral form, within C*dq."""
    err = abs(outcome.buyer_utility - outcome.buyer_utility_survival)
    scale = max(1.0, abs(outcome.buyer_utility))
    # The discretization error is first order in the cell width, so the
    # gate scales with dq (max per-cell margin as the constant), with a
    # 0.5% relative floor for fine grids.
    n = schedule.n_open
    if n > 0:
        vmarg = np.array(
            [float(vprime.marginal(float(l))) for l in schedule.grid.points[:n]]
        )
        c_gate = float(np.max(np.abs(vmarg - schedule.p[:n])))
    else:
        c_gate = 0.0
    tol = max(5e-3 * scale, c_gate * schedule.grid.dq)
    c_const = err / schedule.grid.dq
    return CheckResult(
        "identity", err <= tol, err, tol, f"C={c_const:.6g} (err per unit dq)"
    )


def check_pointwise(
    outcome: ContractOutcome,
    space: TypeSpace,
    model: CostModel,
    weather: WeatherModel,
    vprime: BuyerUtility,
) -> CheckResult:
    """Every open cell's price is a candidate and beats all candidates."""
    schedule = outcome.schedule
    grid = schedule.grid
    cbar = cell_marginal_costs(space, model, weather, grid)
    vbar = cell_marginal_utility(vprime, grid)
    priors = np.array([x.prior_weight for x in space])
    worst = 0.0
    witness = "none"
    for j in range(schedule.n_open):
        pj = schedule.p[j]
        costs = cbar[:, j]
        if not np.any(np.isclose(costs, pj, rtol=0.0, atol=1e-12 * max(1.0, abs(pj)))):
            return CheckResult(
                "pointwise", False, math.inf, 0.0, f"cell {j}: p not a candidate"
            )
        surv_p = priors[costs <= pj + 1e-15].sum()
        obj_p = surv_p * (vbar[j] - pj)
        for c in costs:
            surv_c = priors[costs <= c + 1e-15].sum()
            gap = surv_c * (vbar[j] - c) - obj_p
            if gap > worst:
                worst = gap
                witness = f"cell {j}"
    tol = 1e-9 * max(1.0, float(np.max(np.abs(vbar))))
    return CheckResult("pointwise", worst <= tol, worst, tol, witness)


def check_quasi_concavity(outcome: ContractOutcome) -> CheckResult:
    """Global argmax vs threshold-rule quantity, within one grid cell."""
    dq = outcome.schedule.grid.dq
    worst = 0.0
    witness = "none"
    for rec in outcome.per_type:
        gap = abs(rec.q - rec.threshold_q)
        if gap > worst:
            worst = gap
            witness = rec.type_id
    return CheckResult("quasi_concavity", worst <= dq * (1 + 1e-9), worst, dq, witness)


def check_worst_type_pricing(
    outcome: ContractOutcome,
    space: TypeSpace,
    model: CostModel,
    weather: WeatherModel,
) -> Optional[CheckResult]:
    """p equals the worst type's marginal cost up to its chosen quantity
    (within one cell). None when there is no worst type."""
    schedule = outcome.schedule
    grid = schedule.grid
    worst_type = find_worst_type(space, model, weather, grid.points)
    if worst_type is None:
        return None
    cbar = cell_marginal_costs(space, model, weather, grid)
    i = [x.id for x in space].index(worst_type.id)
    k = int(round(outcome.by_id(worst_type.id).q / grid.dq))
    stop = max(0, min(k - 1, schedule.n_open))  # allow one-cell slack
    dev = 0.0
    for j in range(stop):
        dev = max(dev, abs(float(schedule.p[j]) - float(cbar[i, j])))
    tol = 1e-9 * max(1.0, float(np.max(np.abs(cbar))))
    return CheckResult(
        "worst_type_pricing", dev <= tol, dev, tol, f"worst={worst_type.id}, cells<{stop}"
    )


def oracle_solve(
    space: TypeSpace,
    model: CostModel,
    weather: WeatherModel,
    vprime: BuyerUtility,
    grid: QuantityGrid,
) -> float:
    """Brute-force optimum over all per-cell price assignments.

    Enumerates every assignment of each cell's price from that cell's
    candidate set (the per-type average marginal costs) plus "closed",
    computes each induced schedule's best responses, anchors the payment
    the same way the solver does, and returns the best direct buyer
    utility. Deliberately shares no schedule-construction code with the
    solver.
    """
    if len(space) > ORACLE_MAX_TYPES:
        raise ConfigurationError(f"oracle limited to {ORACLE_MAX_TYPES} types")
    if grid.n_cells > ORACLE_MAX_CELLS:
        raise ConfigurationError(f"oracle limited to {ORACLE_MAX_CELLS} grid cells")

    pts = grid.points
    dq = grid.dq
    n_cells = grid.n_cells
    ecs = np.array([model.expected_cost_grid(x, pts, weather) for x in space])
    priors = np.array([x.prior_weight for x in space])
    cbar = np.diff(ecs, axis=1) / dq  # candidates per cell
    values = vprime.value(pts)

    worst = find_worst_type(space, model, weather, pts)
    t0_fixed = model.realized_cost(worst, 0.0, weather.speeds[0]) if worst else None

    n_types = len(space)
    n_choices = n_types + 1  # candidate per type, plus closed
    combos = np.array(
        list(itertools.product(range(n_choices), repeat=n_cells)), dtype=np.int64
    )

    cand = np.concatenate([cbar, np.zeros((1, n_cells))], axis=0)
    cell_ix = np.arange(n_cells)[None, :]

    best = -math.inf
    for start in range(0, combos.shape[0], 50000):
        chunk = combos[start : start + 50000]
        closed = chunk == n_types
        # price per (assignment, cell); closed cells contribute nothing but cap q
        prices = np.where(closed, 0.0, cand[chunk, cell_ix])
        cum = np.concatenate(
            [np.zeros((chunk.shape[0], 1)), np.cumsum(prices * dq, axis=1)], axis=1
        )
        # point k is deliverable iff no closed cell before it
        blocked = np.concatenate(
            [np.zeros((chunk.shape[0], 1), dtype=bool), np.cumsum(closed, axis=1) > 0],
            axis=1,
        )
        q_idx = np.empty((n_types, chunk.shape[0]), dtype=np.int64)
        for i in range(n_types):
            # Per-cell margins keep indifference ties exact (a cell priced
            # at this type's own cost has margin exactly zero), so the
            # largest-quantity tie-break matches the solver's.
            margins = np.cumsum((prices - cbar[i][None, :]) * dq, axis=1)
            util = np.concatenate(
                [np.zeros((chunk.shape[0], 1)), margins], axis=1
            ) - ecs[i, 0]
            util = np.where(blocked, -np.inf, util)
            rev = util[:, ::-1]
            q_idx[i] = n_cells - np.argmax(rev, axis=1)
        cum_at = np.take_along_axis(cum, q_idx.T, axis=1).T
        ec_at = np.take_along_axis(
            np.broadcast_to(ecs[:, None, :], (n_types, chunk.shape[0], n_cells + 1)),
            q_idx[:, :, None],
            axis=2,
        )[:, :, 0]
        if t0_fixed is not None:
            t0 = np.full(chunk.shape[0], t0_fixed)
        else:
            t0 = np.max(ec_at - cum_at, axis=0)
        v_at = values[q_idx]
        buyer = priors @ (v_at - (t0[None, :] + cum_at))
        m = float(np.max(buyer))
        if m > best:
            best = m
    return best


def check_oracle(
    outcome: ContractOutcome,
    space: TypeSpace,
    model: CostModel,
    weather: WeatherModel,
    vprime: BuyerUtility,
) -> CheckResult:
    oracle = oracle_solve(space, model, weather, vprime, outcome.schedule.grid)
    gap = abs(oracle - outcome.buyer_utility)
    scale = max(1.0, abs(oracle))
    return CheckResult(
        "oracle", gap <= ORACLE_TOL * scale, gap, ORACLE_TOL * scale,
        f"oracle={oracle:.12g} solver={outcome.buyer_utility:.12g}",
    )


def run_checks(
    outcome: ContractOutcome,
    space: TypeSpace,
    model: CostModel,
    weather: WeatherModel,
    vprime: BuyerUtility,
) -> list[CheckResult]:
    """Full certification suite in a fixed order; oracle concordance is
    included when the instance is small enough to enumerate."""
    schedule = outcome.schedule
    grid = schedule.grid
    results = [
        check_ic(outcome, schedule, space, model, weather),
        check_vp(outcome, space, model, weather, grid),
        check_monotone(outcome, space, model, weather, grid),
        check_identity(outcome, schedule, vprime),
        check_pointwise(outcome, space, model, weather, vprime),
        check_quasi_concavity(outcome),
    ]
    wt = check_worst_type_pricing(outcome, space, model, weather)
    if wt is not None:
        results.append(wt)
    if len(space) <= ORACLE_MAX_TYPES and grid.n_cells <= ORACLE_MAX_CELLS:
        results.append(check_oracle(outcome, space, model, weather, vprime))
    return results


def report_text(results: list[CheckResult]) -> str:
    lines = [r.line() for r in results]
    width = max(len(r.name) for r in results)
    lines.append("")
    lines.append(f"{'check':<{width}}  result")
    for r in results:
        lines.append(f"{r.name:<{width}}  {'pass' if r.passed else 'FAIL'}")
    return "\n".join(lines)
