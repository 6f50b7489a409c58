"""Slot-synchronous Monte-Carlo simulator of N vehicles with real traffic.

The simulator is the independent end-to-end oracle for the analytical model:
every vehicle runs the four EDCA state machines against real generators and
finite queues over a shared ideal broadcast channel (all vehicles mutually in
range, perfect slot-granular carrier sensing, no capture). Reports are fully
reproducible from the seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import simkernel as sk
from .chain import CouplingState, enumerate_states, interruption_probs, state_count
from .config import ScenarioConfig
from .params import AcIndex, TimingDerived, derive_timing
from .traffic import poisson_slot_prob, repetition_slots

__all__ = ["SimConfig", "SimReport", "run_simulation", "empirical_state_occupancy",
           "simulate_frozen_chain"]

_PHASE_NAMES = ("Idle", "Aifs", "BusyWait", "Transmit", "BackoffAifs", "BackoffBusy", "Sense")


@dataclass(frozen=True)
class SimConfig:
    scenario: ScenarioConfig
    horizon_slots: int
    warmup_slots: int = 0
    seed: int = 1

    def __post_init__(self) -> None:
        if self.horizon_slots <= self.warmup_slots:
            raise ValueError("horizon_slots must exceed warmup_slots")
        if self.warmup_slots < 0:
            raise ValueError("warmup_slots must be non-negative")


@dataclass(frozen=True)
class SimReport:
    """Empirical analogues of the analytical metrics plus bookkeeping detail."""

    n_vehicles: int
    slots_counted: int
    slot_time: float
    seed: int
    # Channel-level frequencies.
    p_col_tot: float
    channel_utilization: float
    theta_hat_o: float
    theta_hat_s: float
    s_tot: float                # bit/s, exactly-one-vehicle slots
    throughput: np.ndarray      # bit/s per AC
    busy_ratio_ac: np.ndarray   # slots with >= 1 vehicle transmitting on the AC
    # Per-(vehicle, slot) frequencies.
    tx_occupancy: np.ndarray
    tx_entry: np.ndarray
    p_qe: np.ndarray
    queue_full: np.ndarray
    queue_mean: np.ndarray
    drop_rate: np.ndarray
    # Packet accounting (post warmup).
    generated: np.ndarray
    dropped: np.ndarray
    completed: np.ndarray
    queued_at_warmup: np.ndarray
    queued_final: np.ndarray
    delay: np.ndarray           # seconds, mean per completed packet
    service_time: np.ndarray    # seconds, mean head-of-line time
    # Time-average state occupancy counts per AC (canonical state order).
    state_hist: np.ndarray


def _seed_to_state(seed: int) -> np.ndarray:
    return np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF)], dtype=np.uint64)


def run_simulation(cfg: SimConfig, trace_path: str | None = None,
                   trace_cap: int = 1_000_000) -> SimReport:
    """Run one seeded simulation and aggregate post-warmup statistics."""
    sweep = cfg.scenario.sweep()
    if len(sweep) != 1:
        raise ValueError("simulation needs a scenario with a single vehicle count")
    return simulate_at(cfg, sweep[0], trace_path=trace_path, trace_cap=trace_cap)


def simulate_at(cfg: SimConfig, n: int, trace_path: str | None = None,
                trace_cap: int = 1_000_000) -> SimReport:
    """Run the simulation at an explicit vehicle count."""
    if n < 1:
        raise ValueError("n must be at least 1")
    scn = cfg.scenario
    timing = derive_timing(scn.edca)
    slot = timing.slot_time
    theta = timing.theta_tx
    m = scn.queue_depth
    traffic = scn.traffic

    omega = np.array(timing.omega, dtype=np.int64)
    cw = np.array(scn.edca.cw, dtype=np.int64)

    phase = np.zeros((n, 4), dtype=np.int64)
    cnt = np.zeros((n, 4), dtype=np.int64)
    stage = np.zeros((n, 4), dtype=np.int64)
    qlen = np.zeros((n, 4), dtype=np.int64)
    qarr = np.zeros((n, 4, m), dtype=np.int64)
    qhead = np.zeros((n, 4), dtype=np.int64)
    svc_start = np.zeros((n, 4), dtype=np.int64)
    cam_next = np.zeros(n, dtype=np.int64)
    burst_pos = np.full((n, 2), -1, dtype=np.int64)
    tx_any = np.zeros(n, dtype=np.int64)

    counters = np.zeros(sk.N_COUNTERS, dtype=np.int64)
    ac_counters = np.zeros((4, sk.N_AC_COUNTERS), dtype=np.int64)
    hist_len = max(state_count(int(omega[a]), theta, int(cw[a])) for a in range(4))
    hist = np.zeros((4, hist_len), dtype=np.int64)

    cap = trace_cap if trace_path is not None else 0
    trace = np.zeros((cap, 6), dtype=np.int64)
    trace_len = np.zeros(1, dtype=np.int64)

    # An infinite CAM period disables CAM (sentinel 0 for the kernel).
    cam_slots = (0 if np.isinf(traffic.cam_period)
                 else repetition_slots(traffic.cam_period, slot))
    rng = _seed_to_state(cfg.seed)
    args = (
        n, cfg.horizon_slots, cfg.warmup_slots,
        omega, cw, theta, m,
        cam_slots,
        poisson_slot_prob(traffic.event_rate_lambda, slot),
        repetition_slots(traffic.hpd_rep_interval, slot),
        poisson_slot_prob(traffic.event_rate_lambda, slot),
        repetition_slots(traffic.denm_rep_interval, slot),
        traffic.repetition_k,
        poisson_slot_prob(traffic.mhd_rate, slot),
        rng,
        phase, cnt, stage, qlen, qarr, qhead, svc_start, cam_next, burst_pos, tx_any,
        counters, ac_counters, hist,
        trace, trace_len,
    )
    if sk.JIT_ENABLED:
        sk.run_sim_kernel(*args)
    else:
        with np.errstate(over="ignore"):
            sk.run_sim_kernel(*args)

    if trace_path is not None:
        _write_trace(trace_path, trace, int(trace_len[0]))

    slots = int(counters[sk.C_SLOTS])
    vs = float(n * slots)
    acc = ac_counters.astype(float)
    done = acc[:, sk.A_DONE]
    svcn = acc[:, sk.A_SVCN]
    bandwidth = scn.edca.cch_rate
    with np.errstate(invalid="ignore", divide="ignore"):
        delay = np.where(done > 0, acc[:, sk.A_DELAY] / np.maximum(done, 1.0) * slot, 0.0)
        service = np.where(svcn > 0, acc[:, sk.A_SVC] / np.maximum(svcn, 1.0) * slot, 0.0)

    return SimReport(
        n_vehicles=n,
        slots_counted=slots,
        slot_time=slot,
        seed=cfg.seed,
        p_col_tot=counters[sk.C_COLL] / slots,
        channel_utilization=counters[sk.C_BUSY] / slots,
        theta_hat_o=counters[sk.C_BUSY_EXCL] / vs,
        theta_hat_s=counters[sk.C_INIT_EXCL] / vs,
        s_tot=bandwidth * counters[sk.C_SOLO] / slots,
        throughput=bandwidth * acc[:, sk.A_EXCL] / slots,
        busy_ratio_ac=acc[:, sk.A_TXON] / slots,
        tx_occupancy=acc[:, sk.A_TXOCC] / vs,
        tx_entry=acc[:, sk.A_TX1] / vs,
        p_qe=acc[:, sk.A_QEMPTY] / vs,
        queue_full=acc[:, sk.A_QFULL] / vs,
        queue_mean=acc[:, sk.A_QSUM] / vs,
        drop_rate=acc[:, sk.A_DROP] / vs,
        generated=ac_counters[:, sk.A_GEN].copy(),
        dropped=ac_counters[:, sk.A_DROP].copy(),
        completed=ac_counters[:, sk.A_DONE].copy(),
        queued_at_warmup=ac_counters[:, sk.A_QWARM].copy(),
        queued_final=qlen.sum(axis=0),
        delay=delay,
        service_time=service,
        state_hist=hist,
    )


def _write_trace(path: str, trace: np.ndarray, rows: int) -> None:
    with open(path, "w") as fh:
        fh.write("slot vehicle ac state\n")
        for i in range(rows):
            slot_no, v, a, ph, c, b = trace[i]
            name = _PHASE_NAMES[ph]
            fh.write(f"{slot_no} {v} {AcIndex(a).name.lower()} {name}:{c}:{b}\n")


def empirical_state_occupancy(report: SimReport, ac: AcIndex,
                              timing: TimingDerived, cw: int) -> np.ndarray:
    """Time-average occupancy over the AC's enumerated states; sums to 1."""
    n_states = state_count(timing.omega[ac], timing.theta_tx, cw)
    counts = report.state_hist[ac, :n_states].astype(float)
    total = counts.sum()
    if total <= 0:
        raise ValueError("report carries no counted slots")
    return counts / total


def simulate_frozen_chain(
    ac: AcIndex,
    coupling: CouplingState,
    timing: TimingDerived,
    cw: int,
    slots: int,
    seed: int,
    warmup: int = 0,
) -> np.ndarray:
    """Monte-Carlo occupancy of one chain under Bernoulli busy injections.

    Useful as a sampling cross-check of the transition matrix: the returned
    occupancy estimates the same stationary distribution that
    stationary_oracle computes exactly.
    """
    coupling.validate()
    n_states = state_count(timing.omega[ac], timing.theta_tx, cw)
    occ = np.zeros(n_states, dtype=np.int64)
    rng = _seed_to_state(seed)
    p_int = interruption_probs(ac, timing, coupling.theta)
    args = (
        slots, warmup,
        timing.omega[ac], cw, timing.theta_tx,
        float(coupling.phi[ac]), coupling.theta_hat_o, coupling.theta_hat_s,
        p_int,
        rng, occ,
    )
    if sk.JIT_ENABLED:
        sk.run_frozen_kernel(*args)
    else:
        with np.errstate(over="ignore"):
            sk.run_frozen_kernel(*args)
    total = occ.sum()
    return occ / total
