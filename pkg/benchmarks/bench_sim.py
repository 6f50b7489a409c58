"""Benchmark the simulator's numba-jitted kernel against the pure-Python path.

The two paths share one source and one RNG stream, so they produce identical
results; this script measures the throughput gap. The pure path runs in a
subprocess with EDCA11P_DISABLE_JIT=1 (the flag is read at import time).

Usage: python benchmarks/bench_sim.py [--slots N] [--vehicles N] [--pure-slots N]
"""

import argparse
import json
import os
import subprocess
import sys
import time

SNIPPET = """
import json, time
from edca11p.config import load_scenario
from edca11p.sim import SimConfig, simulate_at
from edca11p import simkernel

slots = {slots}
n = {vehicles}
scn = load_scenario("highway.default")
cfg = SimConfig(scenario=scn, horizon_slots=slots, warmup_slots=0, seed=12)
simulate_at(SimConfig(scenario=scn, horizon_slots=2000, warmup_slots=0, seed=12), n)  # warm the JIT cache
t0 = time.perf_counter()
rep = simulate_at(cfg, n)
dt = time.perf_counter() - t0
print(json.dumps(dict(jit=simkernel.JIT_ENABLED, slots=slots, n=n, seconds=dt,
                      cu=rep.channel_utilization, pcol=rep.p_col_tot)))
"""


def run_path(slots: int, vehicles: int, disable_jit: bool) -> dict:
    env = dict(os.environ)
    if disable_jit:
        env["EDCA11P_DISABLE_JIT"] = "1"
    else:
        env.pop("EDCA11P_DISABLE_JIT", None)
    code = SNIPPET.format(slots=slots, vehicles=vehicles)
    proc = subprocess.run([sys.executable, "-c", code], capture_output=True,
                          text=True, env=env, check=True)
    return json.loads(proc.stdout)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--slots", type=int, default=2_000_000,
                        help="horizon for the jitted run")
    parser.add_argument("--pure-slots", type=int, default=50_000,
                        help="horizon for the pure-Python run (it is slow)")
    parser.add_argument("--vehicles", type=int, default=50)
    args = parser.parse_args()

    jit = run_path(args.slots, args.vehicles, disable_jit=False)
    pure = run_path(args.pure_slots, args.vehicles, disable_jit=True)

    jit_rate = jit["slots"] / jit["seconds"]
    pure_rate = pure["slots"] / pure["seconds"]
    print(f"vehicles: {args.vehicles}")
    print(f"numba @njit : {jit['slots']:>10d} slots in {jit['seconds']:8.2f} s "
          f"-> {jit_rate:12.0f} slots/s")
    print(f"pure python : {pure['slots']:>10d} slots in {pure['seconds']:8.2f} s "
          f"-> {pure_rate:12.0f} slots/s")
    print(f"speedup     : {jit_rate / pure_rate:8.1f}x")

    # Same-seed equality check on a horizon both paths can afford.
    a = run_path(args.pure_slots, args.vehicles, disable_jit=False)
    b = run_path(args.pure_slots, args.vehicles, disable_jit=True)
    same = a["cu"] == b["cu"] and a["pcol"] == b["pcol"]
    print(f"bit-identical results on {args.pure_slots} slots: {same}")
    if not same:
        raise SystemExit("paths diverged; the single-source kernel contract is broken")


if __name__ == "__main__":
    main()
