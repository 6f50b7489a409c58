"""Batch front end: solve and/or simulate N sweeps, emit plot-ready CSV rows.

Columns are schema-stable (documented in the README); rows are ordered by
(n, source) regardless of worker completion order, and identical inputs
reproduce byte-identical files.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import os
import sys
from dataclasses import dataclass

import numpy as np

from .config import ConfigError, ScenarioConfig, load_scenario
from .metrics import build_report
from .params import AcIndex
from .sim import SimConfig, simulate_at
from .solver import NonConvergence, SolverSettings, solve_fixed_point

__all__ = ["main", "run", "CSV_COLUMNS", "result_row"]

_ACS = ("vo", "vi", "be", "bk")

CSV_COLUMNS = (
    ["n", "source", "p_col_tot", "channel_utilization", "s_tot_bps"]
    + [f"throughput_{a}_bps" for a in _ACS]
    + [f"delay_{a}_ms" for a in _ACS]
    + [f"service_{a}_ms" for a in _ACS]
    + ["theta_hat_s", "theta_hat_o"]
    + [f"p_qe_{a}" for a in _ACS]
    + [f"drop_{a}" for a in _ACS]
    + ["iterations_used", "residual"]
)


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def result_row(n: int, source: str, values: dict) -> str:
    return ",".join([str(n), source] + [_fmt(values[c]) for c in CSV_COLUMNS[2:]])


def _analytic_task(scenario: ScenarioConfig, n: int, use_oracle: bool) -> dict:
    settings = scenario.solver
    if use_oracle:
        settings = SolverSettings(
            tolerance=settings.tolerance, max_iterations=settings.max_iterations,
            damping=settings.damping, use_closed_form=False,
        )
    sol = solve_fixed_point(scenario, settings=settings, n=n)
    rep = build_report(sol, scenario.edca.cch_rate)
    out = {
        "p_col_tot": rep.p_col_tot,
        "channel_utilization": rep.channel_utilization,
        "s_tot_bps": rep.s_tot,
        "theta_hat_s": sol.coupling.theta_hat_s,
        "theta_hat_o": sol.coupling.theta_hat_o,
        "iterations_used": sol.iterations_used,
        "residual": sol.residual,
    }
    for a in AcIndex.priority_order():
        key = _ACS[a]
        out[f"throughput_{key}_bps"] = rep.throughput[a]
        out[f"delay_{key}_ms"] = rep.delay[a] * 1e3
        out[f"service_{key}_ms"] = rep.service_time[a] * 1e3
        out[f"p_qe_{key}"] = sol.coupling.p_qe[a]
        # Per-slot drop rate: arrivals that find the queue full.
        out[f"drop_{key}"] = sol.coupling.p_arr[a] * sol.queues[AcIndex(a)].full_prob
    return out


def _sim_task(scenario: ScenarioConfig, n: int, seed: int, trace: str | None) -> dict:
    cfg = SimConfig(
        scenario=scenario,
        horizon_slots=scenario.sim.horizon_slots,
        warmup_slots=scenario.sim.warmup_slots,
        seed=seed,
    )
    rep = simulate_at(cfg, n, trace_path=trace)
    out = {
        "p_col_tot": rep.p_col_tot,
        "channel_utilization": rep.channel_utilization,
        "s_tot_bps": rep.s_tot,
        "theta_hat_s": rep.theta_hat_s,
        "theta_hat_o": rep.theta_hat_o,
        "iterations_used": 0,
        "residual": 0.0,
    }
    for a in AcIndex.priority_order():
        key = _ACS[a]
        out[f"throughput_{key}_bps"] = rep.throughput[a]
        out[f"delay_{key}_ms"] = rep.delay[a] * 1e3
        out[f"service_{key}_ms"] = rep.service_time[a] * 1e3
        out[f"p_qe_{key}"] = rep.p_qe[a]
        out[f"drop_{key}"] = rep.drop_rate[a]
    return out


@dataclass
class _Task:
    n: int
    source: str


def _derive_seed(base: int, n: int) -> int:
    # Stable per-N stream so sweep points are independent yet reproducible.
    return (base * 0x9E3779B97F4A7C15 + n * 0xD1B54A32D192ED03) % (1 << 63)


def _execute_task(scenario: ScenarioConfig, n: int, source: str, use_oracle: bool,
                  seed: int, trace_path: str | None) -> dict:
    if source == "analytic":
        return _analytic_task(scenario, n, use_oracle)
    return _sim_task(scenario, n, seed, trace_path)


def _dump_matrices(scenario: ScenarioConfig, n: int, directory: str) -> None:
    from .chain import build_transition_matrix, dump_matrix
    from .params import derive_timing

    os.makedirs(directory, exist_ok=True)
    sol = solve_fixed_point(scenario, n=n)
    timing = derive_timing(scenario.edca)
    for ac in AcIndex.priority_order():
        matrix = build_transition_matrix(ac, sol.coupling, timing, scenario.edca.cw[ac])
        dump_matrix(matrix, os.path.join(directory, f"ac_{_ACS[ac]}_n{n}.txt"))


def run(
    config_path: str,
    mode: str = "analytic",
    out_path: str = "-",
    use_oracle: bool = False,
    seed: int | None = None,
    trace: str | None = None,
    quiet: bool = False,
    workers: int | None = None,
    dump_matrices: str | None = None,
) -> int:
    """Execute the sweep and write the CSV; returns a process exit status."""
    try:
        scenario = load_scenario(config_path)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if mode not in ("analytic", "sim", "both"):
        print(f"error: unknown mode {mode!r}", file=sys.stderr)
        return 2
    sweep = scenario.sweep()
    if not sweep:
        print("error: no scenarios (empty n_vehicles sweep)", file=sys.stderr)
        return 2

    base_seed = scenario.sim.seed if seed is None else seed
    tasks: list[_Task] = []
    for n in sorted(set(sweep)):
        if mode in ("analytic", "both"):
            tasks.append(_Task(n=n, source="analytic"))
        if mode in ("sim", "both"):
            tasks.append(_Task(n=n, source="sim"))

    if workers is None:
        env = os.environ.get("EDCA11P_WORKERS")
        workers = int(env) if env else (os.cpu_count() or 1)
    workers = max(1, min(workers, len(tasks)))

    def task_args(task: _Task):
        trace_path = trace if (trace and task.source == "sim" and task.n == min(sweep)) else None
        return (scenario, task.n, task.source, use_oracle,
                _derive_seed(base_seed, task.n), trace_path)

    results: dict[tuple[int, str], dict] = {}
    failure: tuple[int, str] | None = None
    if workers == 1:
        for task in tasks:
            try:
                results[(task.n, task.source)] = _execute_task(*task_args(task))
            except NonConvergence as exc:
                failure = (task.n, str(exc))
                break
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_execute_task, *task_args(t)): t for t in tasks}
            for fut in concurrent.futures.as_completed(futures):
                task = futures[fut]
                try:
                    results[(task.n, task.source)] = fut.result()
                except NonConvergence as exc:
                    if failure is None or task.n < failure[0]:
                        failure = (task.n, str(exc))

    lines = [",".join(CSV_COLUMNS)]
    for task in tasks:
        key = (task.n, task.source)
        if key in results:
            lines.append(result_row(task.n, task.source, results[key]))
    text = "\n".join(lines) + "\n"
    if out_path == "-":
        sys.stdout.write(text)
    else:
        with open(out_path, "w") as fh:
            fh.write(text)

    if failure is not None:
        print(f"error: fixed point did not converge at n={failure[0]}: {failure[1]}",
              file=sys.stderr)
        return 3
    if dump_matrices is not None:
        _dump_matrices(scenario, min(sweep), dump_matrices)
    if not quiet:
        print(f"wrote {len(lines) - 1} rows to {out_path}", file=sys.stderr)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="edca11p",
        description="IEEE 802.11p EDCA MAC performance: fixed-point analysis and simulation",
    )
    parser.add_argument("--config", required=True,
                        help="scenario YAML path or bundled name (highway.default, highload)")
    parser.add_argument("--mode", choices=["analytic", "sim", "both"], default="analytic")
    parser.add_argument("--out", default="-", help="output CSV path ('-' for stdout)")
    parser.add_argument("--oracle", action="store_true",
                        help="route the analytical solve through the matrix stationary solver")
    parser.add_argument("--seed", type=int, default=None, help="simulation seed override")
    parser.add_argument("--trace", default=None,
                        help="write a per-slot state-change trace of the smallest-N simulation")
    parser.add_argument("--quiet", action="store_true")
    parser.add_argument("--workers", type=int, default=None,
                        help="worker processes for sweep points (default: available parallelism, "
                             "or EDCA11P_WORKERS)")
    parser.add_argument("--dump-matrices", default=None, metavar="DIR",
                        help="write the converged transition matrices of the smallest-N "
                             "solve as sparse 'row col prob' triplet files")
    args = parser.parse_args(argv)
    return run(
        config_path=args.config, mode=args.mode, out_path=args.out,
        use_oracle=args.oracle, seed=args.seed, trace=args.trace,
        quiet=args.quiet, workers=args.workers, dump_matrices=args.dump_matrices,
    )


if __name__ == "__main__":
    raise SystemExit(main())
