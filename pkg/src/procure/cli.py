"""Command-line entry points: solve, verify, plotdata, exclusion-search.

All outputs are deterministic: fixed 12-significant-digit floats, LF line
endings, atomic write-then-rename, no timestamps or locale dependence.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .errors import ProcureError
from .mechanism import PriceSchedule, QuantityGrid, exclusion_search, solve
from .scenario import Scenario, load_scenario
from .settlement import settlement_table
from .verify import grid_tolerance, report_text, run_checks


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, newline="\n")
    os.replace(tmp, path)


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def schedule_csv(schedule: PriceSchedule) -> str:
    t = schedule.payments()
    pts = schedule.grid.points
    rows = []
    for k, q in enumerate(pts):
        if k < schedule.grid.n_cells and not np.isnan(schedule.p[k]):
            pk = float(schedule.p[k])
            p_cell, p_kwh = _fmt(pk), _fmt(pk)  # k$/MWh equals $/kWh numerically
        else:
            p_cell = p_kwh = "closed"
        rows.append([_fmt(float(q)), p_cell, p_kwh, _fmt(float(t[k]))])
    return _csv_text(["q_MWh", "p_k$_per_MWh", "p_$_per_kWh", "t_k$"], rows)


def read_schedule_csv(path: Path, grid: QuantityGrid) -> PriceSchedule:
    """Rebuild a PriceSchedule from schedule.csv (round-trip support)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) != grid.n_cells + 1:
        raise ProcureError(f"{path}: expected {grid.n_cells + 1} rows, got {len(rows)}")
    p = np.full(grid.n_cells, np.nan)
    closed_from = None
    for k, row in enumerate(rows[:-1]):
        cell = row["p_k$_per_MWh"]
        if cell == "closed":
            if closed_from is None:
                closed_from = k
        else:
            p[k] = float(cell)
    t0 = float(rows[0]["t_k$"])
    return PriceSchedule(grid=grid, p=p, t0=t0, closed_from=closed_from)


def outcome_csv(outcome) -> str:
    rows = [
        [rec.type_id, _fmt(rec.q), _fmt(rec.payment), _fmt(rec.expected_cost), _fmt(rec.utility)]
        for rec in outcome.per_type
    ]
    return _csv_text(["type_id", "q", "payment", "expected_cost", "utility"], rows)


def settlement_csv(rows) -> str:
    out = [
        [
            r.type_id,
            _fmt(r.w),
            _fmt(r.generation),
            _fmt(r.realized_cost),
            _fmt(r.payment_base),
            "" if r.payment_expost is None else _fmt(r.payment_expost),
            _fmt(r.payment_risk),
            _fmt(r.profit),
        ]
        for r in rows
    ]
    return _csv_text(
        [
            "type_id",
            "w",
            "g_w",
            "realized_cost",
            "payment_base",
            "payment_expost",
            "payment_risk_alpha",
            "profit",
        ],
        out,
    )


def _corrupt_schedule(schedule: PriceSchedule, kind: str) -> None:
    if kind == "halve_prices":
        n = schedule.n_open
        schedule.p[n // 2 : n] *= 0.5


def _load(
    scenario_path: Path,
    grid_cells: Optional[int] = None,
    admissible: Optional[str] = None,
) -> Scenario:
    sc = load_scenario(scenario_path)
    if grid_cells is not None:
        sc.grid = QuantityGrid(q_max=sc.grid.q_max, n_cells=grid_cells)
    if admissible:
        sc.admissible = tuple(admissible.split(","))
        sc.space.subset(sc.admissible)  # validate ids early
    return sc


def _solve_scenario(sc: Scenario):
    if sc.exclusion_search:
        ids, outcome, _exhaustive = exclusion_search(
            sc.space, sc.model, sc.weather, sc.vprime, sc.grid
        )
        return outcome
    return solve(
        sc.space, sc.model, sc.weather, sc.vprime, sc.grid, admissible=sc.admissible
    )


def _manifest(sc: Scenario, scenario_path: Path, outcome) -> str:
    digest = hashlib.sha256(scenario_path.read_bytes()).hexdigest()
    adm_space = sc.space if outcome is None else sc.space.subset(outcome.admissible_ids)
    data = {
        "scenario_sha256": digest,
        "package_version": __version__,
        "grid": {"q_max": sc.grid.q_max, "n_cells": sc.grid.n_cells, "dq": sc.grid.dq},
        "tol_grid": grid_tolerance(adm_space, sc.model, sc.weather, sc.grid),
        "admissible": list(outcome.admissible_ids) if outcome else None,
        "buyer_utility": outcome.buyer_utility if outcome else None,
        "buyer_utility_survival": outcome.buyer_utility_survival if outcome else None,
        "t0": outcome.schedule.t0 if outcome else None,
    }
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def cmd_solve(
    scenario_path: Path,
    out_dir: Path,
    alpha: Optional[float] = None,
    grid_cells: Optional[int] = None,
    admissible: Optional[str] = None,
) -> int:
    sc = _load(scenario_path, grid_cells, admissible)
    if alpha is not None:
        sc.alpha = alpha
    outcome = _solve_scenario(sc)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_atomic(out_dir / "schedule.csv", schedule_csv(outcome.schedule))
    _write_atomic(out_dir / "outcome.csv", outcome_csv(outcome))
    if sc.alpha is not None:
        adm = sc.space.subset(outcome.admissible_ids)
        rows = settlement_table(
            outcome, outcome.schedule, adm, sc.model, sc.weather, sc.alpha
        )
        _write_atomic(out_dir / "settlement.csv", settlement_csv(rows))
    _write_atomic(out_dir / "run_manifest.json", _manifest(sc, scenario_path, outcome))
    return 0


def cmd_verify(scenario_path: Path, grid_cells: Optional[int] = None) -> int:
    sc = _load(scenario_path, grid_cells)
    outcome = _solve_scenario(sc)
    if sc.corruption is not None:
        _corrupt_schedule(outcome.schedule, sc.corruption)
    adm = sc.space.subset(outcome.admissible_ids)
    results = run_checks(outcome, adm, sc.model, sc.weather, sc.vprime)
    print(report_text(results))
    return 0 if all(r.passed for r in results) else 1


def cmd_plotdata(
    scenario_path: Path, out_dir: Path, grid_cells: Optional[int] = None
) -> int:
    sc = _load(scenario_path, grid_cells)
    outcome = _solve_scenario(sc)
    out_dir.mkdir(parents=True, exist_ok=True)
    schedule = outcome.schedule
    pts = schedule.grid.points
    t = schedule.payments()
    n = schedule.n_open
    if n == 0:
        series = "# schedule closed at q=0; no open quantity range\n" + _csv_text(
            ["q_MWh", "p_k$_per_MWh", "t_k$"], []
        )
    else:
        rows = [
            [_fmt(float(pts[k])), _fmt(float(schedule.p[k])), _fmt(float(t[k]))]
            for k in range(n)
        ]
        series = _csv_text(["q_MWh", "p_k$_per_MWh", "t_k$"], rows)
    _write_atomic(out_dir / "price_series.csv", series)
    markers = _csv_text(
        ["type_id", "q_MWh", "t_k$"],
        [[rec.type_id, _fmt(rec.q), _fmt(rec.payment)] for rec in outcome.per_type],
    )
    _write_atomic(out_dir / "type_markers.csv", markers)
    return 0


def cmd_exclusion_search(
    scenario_path: Path, out_dir: Path, grid_cells: Optional[int] = None
) -> int:
    sc = _load(scenario_path, grid_cells)
    ids, outcome, exhaustive = exclusion_search(
        sc.space, sc.model, sc.weather, sc.vprime, sc.grid
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_atomic(out_dir / "schedule.csv", schedule_csv(outcome.schedule))
    _write_atomic(out_dir / "outcome.csv", outcome_csv(outcome))
    _write_atomic(out_dir / "run_manifest.json", _manifest(sc, scenario_path, outcome))
    mode = "exhaustive" if exhaustive else "heuristic (budget hit)"
    print(f"best admissible set ({mode}): {','.join(ids)}")
    print(f"buyer utility: {_fmt(outcome.buyer_utility)}")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="procure",
        description="Optimal nonlinear-pricing contracts for energy procurement",
    )
    parser.add_argument("--seed", type=int, default=None, help="reserved; pipeline is deterministic")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.add_argument("scenario", type=Path)
        p.add_argument("--grid-cells", type=int, default=None)
        return p

    p_solve = add("solve", help="solve a scenario and write CSV outputs")
    p_solve.add_argument("--out", type=Path, default=Path("out"))
    p_solve.add_argument("--alpha", type=float, default=None)
    p_solve.add_argument("--admissible", type=str, default=None, help="comma-separated type ids")

    add("verify", help="run the certification suite; exit 0 iff all checks pass")

    p_plot = add("plotdata", help="emit price/payment series for plotting")
    p_plot.add_argument("--out", type=Path, default=Path("out"))

    p_excl = add("exclusion-search", help="search admissible subsets")
    p_excl.add_argument("--out", type=Path, default=Path("out"))

    args = parser.parse_args(argv)
    try:
        if args.command == "solve":
            return cmd_solve(
                args.scenario, args.out, args.alpha, args.grid_cells, args.admissible
            )
        if args.command == "verify":
            return cmd_verify(args.scenario, args.grid_cells)
        if args.command == "plotdata":
            return cmd_plotdata(args.scenario, args.out, args.grid_cells)
        if args.command == "exclusion-search":
            return cmd_exclusion_search(args.scenario, args.out, args.grid_cells)
        raise AssertionError(args.command)
    except (ProcureError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
