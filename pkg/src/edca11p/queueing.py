"""Finite-buffer device queue per AC, modeled as a birth-death chain over 0..m.

Per slot the occupancy moves up with probability p_arr*(1-p_s) and down with
p_s*(1-p_arr); a same-slot arrival plus departure cancels. The stationary
distribution is geometric in the up/down ratio.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["QueueDistribution", "queue_steady_state", "queue_empty_prob"]


@dataclass(frozen=True)
class QueueDistribution:
    """Stationary occupancy distribution of one AC's packet queue."""

    pi: np.ndarray
    m: int

    def __post_init__(self) -> None:
        if self.m < 1 or self.pi.shape != (self.m + 1,):
            raise ValueError("pi must hold m + 1 occupancy probabilities")
        if np.any(self.pi < 0) or abs(float(self.pi.sum()) - 1.0) > 1e-12:
            raise ValueError("pi must be a probability distribution")

    @property
    def empty_prob(self) -> float:
        return float(self.pi[0])

    @property
    def full_prob(self) -> float:
        return float(self.pi[-1])

    def mean_occupancy(self) -> float:
        return float(np.dot(np.arange(self.m + 1), self.pi))


def queue_steady_state(p_arr: float, p_s: float, m: int) -> QueueDistribution:
    """Closed-form stationary distribution of the occupancy chain.

    Successive occupancies satisfy pi[j+1]/pi[j] = p_arr*(1-p_s) / (p_s*(1-p_arr)).
    State 0 cannot move down and state m cannot move up. By convention all mass
    sits at 0 when there is neither arrival nor service pressure, and at m when
    arrivals occur but service never does.
    """
    if not (0.0 <= p_arr <= 1.0 and 0.0 <= p_s <= 1.0):
        raise ValueError("p_arr and p_s must be probabilities")
    if m < 1:
        raise ValueError("m must be at least 1")

    up = p_arr * (1.0 - p_s)
    down = p_s * (1.0 - p_arr)
    pi = np.zeros(m + 1)
    if up == 0.0:
        pi[0] = 1.0
    elif down == 0.0:
        pi[m] = 1.0
    else:
        ratio = up / down
        # Build the geometric weights anchored at whichever end dominates,
        # so large ratios cannot overflow.
        if ratio <= 1.0:
            weights = ratio ** np.arange(m + 1)
        else:
            weights = (1.0 / ratio) ** np.arange(m, -1, -1)
        pi = weights / weights.sum()
    return QueueDistribution(pi=pi, m=m)


def queue_empty_prob(dist: QueueDistribution) -> float:
    """Probability of the queue being empty."""
    return dist.empty_prob
