"""Fixed-point iteration coupling generators, queues and the four AC chains.

One sweep: arrival probabilities -> queue steady states -> idle-exit gates ->
per-AC chain steady states -> new busy ratios and transmit occupancies. The
sweep is damped and iterated until the queue-empty, busy-share and transmit
probabilities stop moving.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

import numpy as np

from .chain import (
    AcDistribution,
    CouplingState,
    build_transition_matrix,
    busy_ratios,
    closed_form_steady_state,
    coupling_probs,
    stationary_oracle,
)
from .params import AcIndex, TimingDerived, derive_timing
from .queueing import QueueDistribution, queue_steady_state
from .traffic import ArrivalModel, build_arrival_model

if TYPE_CHECKING:  # pragma: no cover
    from .config import ScenarioConfig

__all__ = [
    "SolverSettings",
    "ConvergedSolution",
    "NonConvergence",
    "InvalidScenario",
    "solve_fixed_point",
]

_MAX_DAMPING = 1.0 - 2.0**-5


@dataclass(frozen=True)
class SolverSettings:
    tolerance: float = 1e-9
    max_iterations: int = 10000
    damping: float = 0.5
    use_closed_form: bool = True

    def __post_init__(self) -> None:
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not (0.0 <= self.damping < 1.0):
            raise ValueError("damping must lie in [0, 1)")


@dataclass(frozen=True)
class ConvergedSolution:
    """Self-consistent steady state of a scenario at one vehicle count."""

    coupling: CouplingState
    dists: dict[AcIndex, AcDistribution]
    queues: dict[AcIndex, QueueDistribution]
    iterations_used: int
    residual: float
    n_vehicles: int
    timing: TimingDerived
    arrival: ArrivalModel


class NonConvergence(RuntimeError):
    """Raised when the sweep does not settle within max_iterations."""

    def __init__(self, message: str, residual: float, coupling: CouplingState):
        super().__init__(message)
        self.residual = residual
        self.coupling = coupling


class InvalidScenario(ValueError):
    pass


def _chain_dists(
    coupling: CouplingState,
    timing: TimingDerived,
    cw: tuple[int, int, int, int],
    use_closed_form: bool,
) -> dict[AcIndex, AcDistribution]:
    dists = {}
    for ac in AcIndex.priority_order():
        if use_closed_form:
            dists[ac] = closed_form_steady_state(ac, coupling, timing, cw[ac])
        else:
            matrix = build_transition_matrix(ac, coupling, timing, cw[ac])
            from .chain import enumerate_states

            probs = stationary_oracle(matrix)
            dists[ac] = AcDistribution(
                ac=ac, states=tuple(enumerate_states(ac, timing, cw[ac])), probs=probs
            )
    return dists


def solve_fixed_point(
    scenario: "ScenarioConfig",
    settings: SolverSettings | None = None,
    n: int | None = None,
) -> ConvergedSolution:
    """Iterate the coupled models at vehicle count n until self-consistency.

    n defaults to the scenario's single vehicle count; pass it explicitly when
    sweeping. Raises InvalidScenario for n < 1 and NonConvergence when the
    damped iteration exhausts max_iterations.
    """
    settings = settings or scenario.solver
    if n is None:
        sweep = scenario.sweep()
        if len(sweep) != 1:
            raise InvalidScenario("scenario holds a sweep; pass n explicitly")
        n = sweep[0]
    if n < 1:
        raise InvalidScenario(f"vehicle count must be at least 1, got {n}")

    timing = derive_timing(scenario.edca)
    cw = scenario.edca.cw
    m = scenario.queue_depth

    p_qe = np.ones(4)
    theta = np.zeros(4)
    th_s = 0.0
    th_o = 0.0
    p_s = np.array([1.0 / (timing.omega[ac] + timing.theta_tx) for ac in AcIndex.priority_order()])

    damping = settings.damping
    prev_residual = np.inf
    prev_new: np.ndarray | None = None
    osc_count = 0

    for iteration in range(1, settings.max_iterations + 1):
        arrival = build_arrival_model(scenario.traffic, timing, p_s)
        p_arr = arrival.per_slot_arrival_prob

        # The queue chain's service parameter is the transmit occupancy per
        # channel-idle slot: a head-of-line packet can only progress while no
        # other vehicle occupies the channel, so the raw occupancy P_s is
        # rescaled by the idle-channel fraction.
        p_service = np.minimum(1.0, p_s / max(1e-12, 1.0 - th_o))
        queues = {
            ac: queue_steady_state(float(p_arr[ac]), float(p_service[ac]), m)
            for ac in AcIndex.priority_order()
        }
        p_qe_new = np.array([queues[ac].empty_prob for ac in AcIndex.priority_order()])
        phi = coupling_probs(p_arr, p_qe_new)

        coupling = CouplingState(
            theta=theta, theta_hat_s=th_s, theta_hat_o=th_o,
            phi=phi, p_arr=p_arr, p_qe=p_qe_new, p_s=p_s,
        )
        dists = _chain_dists(coupling, timing, cw, settings.use_closed_form)
        th_s_new, th_o_new, theta_new = busy_ratios(dists, n, timing)
        p_s_new = np.array([dists[ac].transmit_occupancy for ac in AcIndex.priority_order()])

        new_vec = np.concatenate((p_qe_new, theta_new, p_s_new))
        cur_vec = np.concatenate((p_qe, theta, p_s))
        residual = float(np.max(np.abs(new_vec - cur_vec)))
        settled = prev_new is not None and np.array_equal(new_vec, prev_new)
        if residual <= settings.tolerance or settled:
            final = CouplingState(
                theta=theta_new, theta_hat_s=th_s_new, theta_hat_o=th_o_new,
                phi=phi, p_arr=p_arr, p_qe=p_qe_new, p_s=p_s_new,
            )
            return ConvergedSolution(
                coupling=final, dists=dists, queues=queues,
                iterations_used=iteration,
                residual=0.0 if settled and residual > settings.tolerance else residual,
                n_vehicles=n, timing=timing, arrival=arrival,
            )

        # Damped update; on sustained residual growth the step is halved to
        # break oscillations around the fixed point.
        if residual > prev_residual * (1.0 + 1e-12):
            osc_count += 1
            if osc_count >= 2:
                damping = min(_MAX_DAMPING, 0.5 * (1.0 + damping))
                osc_count = 0
        else:
            osc_count = 0
        prev_residual = residual
        prev_new = new_vec

        keep = damping
        step = 1.0 - damping
        p_qe = keep * p_qe + step * p_qe_new
        theta = keep * theta + step * theta_new
        p_s = keep * p_s + step * p_s_new
        th_s = keep * th_s + step * th_s_new
        th_o = keep * th_o + step * th_o_new

    p_arr = build_arrival_model(scenario.traffic, timing, p_s).per_slot_arrival_prob
    raise NonConvergence(
        f"no fixed point after {settings.max_iterations} iterations "
        f"(residual {prev_residual:.3e}, n={n})",
        residual=prev_residual,
        coupling=CouplingState(
            theta=theta, theta_hat_s=th_s, theta_hat_o=th_o,
            phi=coupling_probs(p_arr, p_qe),
            p_arr=p_arr, p_qe=p_qe, p_s=p_s,
        ),
    )
