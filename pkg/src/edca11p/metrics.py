"""MAC-layer performance measures computed from a converged solution.

All formulas treat the per-vehicle chains as independent across the N
vehicles. Collision counts simultaneous transmission starts; throughput is
the exclusive-airtime notion (exactly one vehicle transmitting); delay
weights the head-of-line service time by the queue occupancy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import AcIndex
from .queueing import QueueDistribution
from .solver import ConvergedSolution

__all__ = [
    "MetricsReport",
    "MetricsError",
    "collision_probability",
    "idle_empty_probs",
    "average_delay",
    "throughput",
    "channel_utilization",
    "build_report",
]


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class MetricsReport:
    """Flat record of the headline metrics for one (scenario, N) point."""

    p_col_tot: float
    delay: np.ndarray          # seconds, per AC
    service_time: np.ndarray   # seconds, per AC
    throughput: np.ndarray     # bit/s, per AC
    s_tot: float               # bit/s
    channel_utilization: float


def _entry_probs(sol: ConvergedSolution) -> np.ndarray:
    return np.array([sol.dists[ac].transmit_entry_prob for ac in AcIndex.priority_order()])


def collision_probability(sol: ConvergedSolution, n: int) -> float:
    """Per-slot probability that two or more vehicles start transmitting together."""
    if n < 1:
        raise MetricsError("n must be at least 1")
    pt1 = _entry_probs(sol)
    prod = float(np.prod(1.0 - pt1))
    exactly_one = n * float(np.sum(pt1 * sol.coupling.theta)) * prod ** (n - 1)
    return 1.0 - prod**n - exactly_one


def idle_empty_probs(sol: ConvergedSolution) -> np.ndarray:
    """Probability of sitting in Idle because the own queue is empty, per AC.

    For lower-priority ACs the idle mass is split between an empty own queue
    and busy higher-priority queues, in proportion to the gating probability.
    """
    p_qe = sol.coupling.p_qe
    out = np.zeros(4)
    gate = 1.0
    for ac in AcIndex.priority_order():
        denom = 1.0 - (1.0 - p_qe[ac]) * gate
        pi_idle = sol.dists[ac].idle_prob
        out[ac] = 0.0 if denom <= 0.0 else pi_idle * p_qe[ac] / denom
        gate *= p_qe[ac]
    return out


def average_delay(
    sol: ConvergedSolution,
    queues: dict[AcIndex, QueueDistribution],
) -> tuple[np.ndarray, np.ndarray]:
    """Occupancy-weighted average delay and head-of-line service time, per AC.

    The service time is the idle-corrected transmission cycle plus the tail
    of the transmission itself; the delay weights it by the expected number
    of queue positions a fresh packet waits behind.
    """
    slot = sol.timing.slot_time
    theta_tx = sol.timing.theta_tx
    p_i = idle_empty_probs(sol)
    delay = np.zeros(4)
    service = np.zeros(4)
    for ac in AcIndex.priority_order():
        pt1 = sol.dists[ac].transmit_entry_prob
        q = queues[ac]
        if pt1 <= 0.0:
            if q.empty_prob < 1.0 or sol.coupling.p_arr[ac] > 0.0:
                raise MetricsError(f"{ac.name}: no transmissions but a non-empty queue")
            continue  # AC carries no traffic at all; zero delay by convention
        psi = (1.0 - p_i[ac]) * slot / pt1
        service[ac] = psi + (theta_tx - 1) * slot
        weights = np.arange(1, q.m + 2, dtype=float)  # j + 1 for j = 0..m
        delay[ac] = service[ac] * float(np.dot(weights, q.pi))
    return delay, service


def throughput(sol: ConvergedSolution, n: int, bandwidth: float) -> tuple[np.ndarray, float]:
    """Per-AC and total throughput from exclusive transmit occupancy."""
    if bandwidth <= 0:
        raise MetricsError("bandwidth must be positive")
    p_s = np.array([sol.dists[ac].transmit_occupancy for ac in AcIndex.priority_order()])
    prod = float(np.prod(1.0 - p_s))
    per_ac = bandwidth * n * p_s * prod ** (n - 1)
    s_tot = bandwidth * n * float(np.sum(p_s * sol.coupling.theta)) * prod ** (n - 1)
    return per_ac, s_tot


def channel_utilization(sol: ConvergedSolution, n: int) -> float:
    """Probability that at least one vehicle is transmitting in a slot."""
    if n < 1:
        raise MetricsError("n must be at least 1")
    p_s = np.array([sol.dists[ac].transmit_occupancy for ac in AcIndex.priority_order()])
    return 1.0 - float(np.prod(1.0 - p_s)) ** n


def build_report(sol: ConvergedSolution, bandwidth: float) -> MetricsReport:
    delay, service = average_delay(sol, sol.queues)
    per_ac, s_tot = throughput(sol, sol.n_vehicles, bandwidth)
    return MetricsReport(
        p_col_tot=collision_probability(sol, sol.n_vehicles),
        delay=delay,
        service_time=service,
        throughput=per_ac,
        s_tot=s_tot,
        channel_utilization=channel_utilization(sol, sol.n_vehicles),
    )
