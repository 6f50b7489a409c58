"""Per-slot packet arrival models for the four traffic classes.

CAM is periodic, HPD and DENM are Poisson-triggered bursts of k repetitions,
and MHD is a plain Poisson stream. The analytical side reduces each process
to a per-slot Bernoulli arrival probability; the simulator runs the real
processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .params import AcIndex, TimingDerived

__all__ = [
    "TrafficConfig",
    "ArrivalModel",
    "poisson_slot_prob",
    "repetition_slots",
    "burst_arrival_prob",
    "build_arrival_model",
]


@dataclass(frozen=True)
class TrafficConfig:
    """Traffic generator parameters (rates in events per second, durations in seconds).

    cam_period may be infinite to disable CAM traffic entirely.
    """

    cam_period: float = 100e-3
    event_rate_lambda: float = 1.0  # shared by HPD and DENM triggers
    repetition_k: int = 5
    denm_rep_interval: float = 10e-3
    mhd_rate: float = 10.0

    def __post_init__(self) -> None:
        if self.repetition_k < 1:
            raise ValueError("repetition_k must be at least 1")
        if self.event_rate_lambda < 0 or self.mhd_rate < 0:
            raise ValueError("rates must be non-negative")
        if self.denm_rep_interval <= 0 or math.isinf(self.denm_rep_interval):
            raise ValueError("denm_rep_interval must be positive and finite")
        if self.cam_period <= 0:
            raise ValueError("cam_period must be positive")

    @property
    def hpd_rep_interval(self) -> float:
        """HPD repeats at half the DENM repetition interval."""
        return self.denm_rep_interval / 2.0


@dataclass(frozen=True)
class ArrivalModel:
    """Per-slot arrival probabilities, plus optional generator-chain diagnostics."""

    per_slot_arrival_prob: np.ndarray  # shape (4,), indexed by AcIndex
    generator_state_dist: dict[AcIndex, np.ndarray] | None = None

    def __post_init__(self) -> None:
        p = self.per_slot_arrival_prob
        if p.shape != (4,) or np.any(p < 0) or np.any(p > 1):
            raise ValueError("arrival probabilities must be four values in [0, 1]")
        if self.generator_state_dist is not None:
            for ac, dist in self.generator_state_dist.items():
                if abs(float(dist.sum()) - 1.0) > 1e-12:
                    raise ValueError(f"generator distribution for {ac} does not sum to 1")


def poisson_slot_prob(rate: float, slot: float) -> float:
    """Probability of at least one Poisson event in one slot."""
    if rate < 0:
        raise ValueError("rate must be non-negative")
    if slot <= 0:
        raise ValueError("slot must be positive")
    return -math.expm1(-rate * slot)


def repetition_slots(interval: float, slot: float) -> int:
    """Repetition interval in whole slots (at least one)."""
    return max(1, int(round(interval / slot)))


def burst_arrival_prob(p_trigger: float, k: int, rep_slots: int) -> float:
    """Stationary per-slot packet deposit probability of a k-repetition burst source.

    The generator idles until a trigger fires, then deposits k packets spaced
    rep_slots apart; new triggers are ignored while a burst is in progress.
    """
    if k < 1 or rep_slots < 1:
        raise ValueError("k and rep_slots must be at least 1")
    burst_len = (k - 1) * rep_slots + 1
    return k * p_trigger / (1.0 + p_trigger * burst_len)


def _burst_state_dist(p_trigger: float, k: int, rep_slots: int) -> np.ndarray:
    """Stationary distribution over [idle, burst slot 1..(k-1)*rep_slots+1]."""
    burst_len = (k - 1) * rep_slots + 1
    u = 1.0 / (1.0 + p_trigger * burst_len)
    dist = np.full(1 + burst_len, u * p_trigger)
    dist[0] = u
    return dist


def build_arrival_model(
    traffic: TrafficConfig,
    timing: TimingDerived,
    p_s: np.ndarray | None = None,
) -> ArrivalModel:
    """Arrival probabilities for all four ACs at the current fixed-point iterate.

    p_s is accepted for interface stability with the coupling loop; the burst
    generators used here are autonomous, so it does not enter the result.
    """
    slot = timing.slot_time
    if traffic.cam_period < slot:
        raise ValueError("cam_period must be at least one slot")

    p_trig = poisson_slot_prob(traffic.event_rate_lambda, slot)
    r_hpd = repetition_slots(traffic.hpd_rep_interval, slot)
    r_denm = repetition_slots(traffic.denm_rep_interval, slot)
    k = traffic.repetition_k

    probs = np.zeros(4)
    probs[AcIndex.VO] = burst_arrival_prob(p_trig, k, r_hpd)
    probs[AcIndex.VI] = burst_arrival_prob(p_trig, k, r_denm)
    probs[AcIndex.BE] = slot / traffic.cam_period
    probs[AcIndex.BK] = poisson_slot_prob(traffic.mhd_rate, slot)

    gen_dists = {
        AcIndex.VO: _burst_state_dist(p_trig, k, r_hpd),
        AcIndex.VI: _burst_state_dist(p_trig, k, r_denm),
    }
    return ArrivalModel(per_slot_arrival_prob=probs, generator_state_dist=gen_dists)
