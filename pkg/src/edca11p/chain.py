"""Per-AC channel access chain: state space, transition matrix, steady states.

Each access category runs a slot-resolution DTMC: idle, an AIFS listen, a
busy-wait of one packet airtime, transmission, and a backoff process whose
stages each consist of an AIFS re-listen plus one sense slot per counter
decrement. Higher-priority ACs can interrupt the tail slots of a lower AC's
backoff AIFS; which tail slots depends on the AIFS length offsets.

Two independent routes to the stationary distribution are provided: an exact
linear solve on the explicit transition matrix (the oracle), and closed-form
expressions derived from the chain's balance equations (the fast path used by
the fixed-point solver). The closed forms here are re-derived from the
transition structure; the oracle adjudicates.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .params import AcIndex, TimingDerived

__all__ = [
    "AcStateKind",
    "AcState",
    "AcDistribution",
    "CouplingState",
    "enumerate_states",
    "state_count",
    "interruption_probs",
    "build_transition_matrix",
    "stationary_oracle",
    "coupling_probs",
    "busy_ratios",
    "closed_form_steady_state",
    "dump_matrix",
]


class AcStateKind(enum.IntEnum):
    IDLE = 0
    AIFS = 1          # initial AIFS listen, slot j in 1..omega
    BUSY_WAIT = 2     # waiting out an ongoing transmission, slot j in 1..theta
    TRANSMIT = 3      # own transmission, slot j in 1..theta
    BACKOFF_AIFS = 4  # AIFS re-listen at counter b, slot j in 1..omega-1
    BACKOFF_BUSY = 5  # busy wait during backoff at counter b, slot j in 1..theta
    SENSE = 6         # sense slot at counter b


class AcState(NamedTuple):
    """One state of an AC chain; j и b are 0 where the kind does not use them."""

    kind: AcStateKind
    j: int = 0
    b: int = 0

    def __repr__(self) -> str:  # compact, e.g. Aifs(3) or BackoffAifs(b=2,j=1)
        k = self.kind
        if k == AcStateKind.IDLE:
            return "Idle"
        if k == AcStateKind.AIFS:
            return f"Aifs({self.j})"
        if k == AcStateKind.BUSY_WAIT:
            return f"BusyWait({self.j})"
        if k == AcStateKind.TRANSMIT:
            return f"Transmit({self.j})"
        if k == AcStateKind.BACKOFF_AIFS:
            return f"BackoffAifs(b={self.b},j={self.j})"
        if k == AcStateKind.BACKOFF_BUSY:
            return f"BackoffBusy(b={self.b},j={self.j})"
        return f"Sense(b={self.b})"


def state_count(omega: int, theta: int, cw: int) -> int:
    """Number of chain states for AIFS length omega, airtime theta, window cw."""
    return 1 + omega + 2 * theta + cw * (omega - 1) + cw * theta + cw


def enumerate_states(ac: AcIndex, timing: TimingDerived, cw: int) -> list[AcState]:
    """Deterministic, duplicate-free enumeration of one AC's state space.

    Layout (mirrored by the simulator's histogram indexing): Idle, Aifs(1..omega),
    BusyWait(1..theta), Transmit(1..theta), then all BackoffAifs rows by counter,
    all BackoffBusy rows by counter, then Sense(0..cw-1).
    """
    omega = timing.omega[ac]
    theta = timing.theta_tx
    states: list[AcState] = [AcState(AcStateKind.IDLE)]
    states += [AcState(AcStateKind.AIFS, j=j) for j in range(1, omega + 1)]
    states += [AcState(AcStateKind.BUSY_WAIT, j=j) for j in range(1, theta + 1)]
    states += [AcState(AcStateKind.TRANSMIT, j=j) for j in range(1, theta + 1)]
    for b in range(cw):
        states += [AcState(AcStateKind.BACKOFF_AIFS, j=j, b=b) for j in range(1, omega)]
    for b in range(cw):
        states += [AcState(AcStateKind.BACKOFF_BUSY, j=j, b=b) for j in range(1, theta + 1)]
    states += [AcState(AcStateKind.SENSE, b=b) for b in range(cw)]
    assert len(states) == state_count(omega, theta, cw)
    return states


@dataclass(frozen=True)
class CouplingState:
    """Fixed-point variables exchanged between the queue, generator and AC chains."""

    theta: np.ndarray       # per-AC share of the slot busy ratio, sums to theta_hat_s
    theta_hat_s: float      # busy seen after an idle slot (a transmission just started)
    theta_hat_o: float      # busy seen on arrival (any ongoing transmission)
    phi: np.ndarray         # per-AC probability of leaving Idle in a slot
    p_arr: np.ndarray
    p_qe: np.ndarray
    p_s: np.ndarray

    def validate(self) -> None:
        for name in ("theta", "phi", "p_arr", "p_qe", "p_s"):
            v = getattr(self, name)
            if v.shape != (4,) or np.any(v < -1e-15) or np.any(v > 1 + 1e-15):
                raise ValueError(f"{name} must be four probabilities")
        if not (0.0 <= self.theta_hat_s <= 1.0 and 0.0 <= self.theta_hat_o <= 1.0):
            raise ValueError("theta_hat values must be probabilities")
        if self.theta_hat_o < self.theta_hat_s - 1e-12:
            raise ValueError("theta_hat_o must be at least theta_hat_s")
        if float(self.theta.sum()) > self.theta_hat_s + 1e-9:
            raise ValueError("sum of theta_i must not exceed theta_hat_s")

    @staticmethod
    def zeros() -> "CouplingState":
        z = np.zeros(4)
        return CouplingState(
            theta=z.copy(), theta_hat_s=0.0, theta_hat_o=0.0,
            phi=z.copy(), p_arr=z.copy(), p_qe=np.ones(4), p_s=z.copy(),
        )


@dataclass(frozen=True)
class AcDistribution:
    """Probability assignment over one AC's enumerated states."""

    ac: AcIndex
    states: tuple[AcState, ...]
    probs: np.ndarray

    def __post_init__(self) -> None:
        if self.probs.shape != (len(self.states),):
            raise ValueError("probs length must match state count")
        if np.any(self.probs < -1e-12) or abs(float(self.probs.sum()) - 1.0) > 1e-9:
            raise ValueError("probs must be a distribution summing to 1")

    def prob(self, state: AcState) -> float:
        return float(self.probs[self.states.index(state)])

    def _mask(self, kind: AcStateKind) -> np.ndarray:
        return np.array([s.kind == kind for s in self.states])

    @property
    def idle_prob(self) -> float:
        return float(self.probs[0])

    @property
    def transmit_entry_prob(self) -> float:
        """Probability of state Transmit(1), the per-slot transmission initiation mass."""
        return self.prob(AcState(AcStateKind.TRANSMIT, j=1))

    @property
    def transmit_occupancy(self) -> float:
        """Total probability of being in any Transmit slot (P_s of this AC)."""
        return float(self.probs[self._mask(AcStateKind.TRANSMIT)].sum())

    def initiation_mass(self, timing: TimingDerived) -> float:
        """Mass of the two states from which a transmission starts next slot."""
        last_aifs = AcState(AcStateKind.AIFS, j=timing.omega[self.ac])
        return self.prob(last_aifs) + self.prob(AcState(AcStateKind.SENSE, b=0))


def interruption_probs(ac: AcIndex, timing: TimingDerived, theta: np.ndarray) -> np.ndarray:
    """Busy probability at each backoff-AIFS slot position 1..omega-1 of this AC.

    Counting slots from the start of a post-busy idle period, an AC with AIFS
    length omega_h can start transmitting from offset omega_h onward, so
    position j only sees the ACs whose AIFS already elapsed. Positions before
    the shortest AIFS see no interruptions at all.
    """
    omega = timing.omega[ac]
    probs = np.zeros(omega - 1)
    for j in range(1, omega):
        acc = 0.0
        for h in AcIndex.priority_order():
            if timing.omega[h] <= j:
                acc += float(theta[h])
        probs[j - 1] = acc
    return probs


def build_transition_matrix(
    ac: AcIndex,
    coupling: CouplingState,
    timing: TimingDerived,
    cw: int,
) -> np.ndarray:
    """Dense row-stochastic transition matrix of one AC chain.

    Encodes: Idle exits with phi; the first AIFS slot goes busy with
    theta_hat_o landing uniformly over the remaining busy-wait positions;
    later AIFS slots go busy with theta_hat_s into a full busy wait; the
    busy wait ends in a uniform backoff counter draw over 0..cw with counters
    0 and 1 both mapping to stage 0; each backoff counter runs omega-1
    re-listen slots (interruptible by higher-priority starts) and one sense
    slot; idle senses decrement the counter directly, and sense at counter 0
    starts the transmission.
    """
    coupling.validate()
    omega = timing.omega[ac]
    theta = timing.theta_tx
    L = omega - 1
    phi = float(coupling.phi[ac])
    q = coupling.theta_hat_s
    q_o = coupling.theta_hat_o
    p_int = interruption_probs(ac, timing, coupling.theta)

    n = state_count(omega, theta, cw)
    # Index helpers mirror enumerate_states() layout.
    idle = 0
    aifs = lambda j: j
    busy = lambda j: omega + j
    tx = lambda j: omega + theta + j
    ba = lambda b, j: 1 + omega + 2 * theta + b * L + (j - 1)
    bb = lambda b, j: 1 + omega + 2 * theta + cw * L + b * theta + (j - 1)
    sense = lambda b: 1 + omega + 2 * theta + cw * L + cw * theta + b

    # Stage selection: counter uniform over the cw+1 integers 0..cw, counters
    # 0 and 1 both land on stage 0, counter c >= 2 lands on stage c-1.
    s_b = np.full(cw, 1.0 / (cw + 1))
    s_b[0] = 2.0 / (cw + 1)

    P = np.zeros((n, n))

    P[idle, idle] = 1.0 - phi
    P[idle, aifs(1)] += phi

    for j in range(1, omega + 1):
        row = aifs(j)
        onward = tx(1) if j == omega else aifs(j + 1)
        if j == 1:
            for k in range(1, theta + 1):
                P[row, busy(k)] += q_o / theta
            P[row, onward] += 1.0 - q_o
        else:
            P[row, busy(1)] += q
            P[row, onward] += 1.0 - q

    for j in range(1, theta + 1):
        row = busy(j)
        if j < theta:
            P[row, busy(j + 1)] = 1.0
        else:
            for b in range(cw):
                target = ba(b, 1) if L >= 1 else sense(b)
                P[row, target] += s_b[b]

    for j in range(1, theta + 1):
        row = tx(j)
        if j < theta:
            P[row, tx(j + 1)] = 1.0
        else:
            P[row, idle] = 1.0

    for b in range(cw):
        for j in range(1, L + 1):
            row = ba(b, j)
            p = p_int[j - 1]
            P[row, bb(b, 1)] += p
            onward = sense(b) if j == L else ba(b, j + 1)
            P[row, onward] += 1.0 - p
        for j in range(1, theta + 1):
            row = bb(b, j)
            if j < theta:
                P[row, bb(b, j + 1)] = 1.0
            else:
                P[row, ba(b, 1) if L >= 1 else sense(b)] = 1.0
        row = sense(b)
        P[row, bb(b, 1)] += q
        P[row, sense(b - 1) if b > 0 else tx(1)] += 1.0 - q

    rowsums = P.sum(axis=1)
    if np.any(np.abs(rowsums - 1.0) > 1e-12):
        bad = int(np.argmax(np.abs(rowsums - 1.0)))
        raise ValueError(f"row {bad} sums to {rowsums[bad]!r}, not 1")
    return P


def stationary_oracle(matrix: np.ndarray) -> np.ndarray:
    """Stationary distribution of a row-stochastic chain by direct linear solve.

    Solves pi @ P = pi with sum(pi) = 1. Falls back to damped power iteration
    if the solve is ill-conditioned. An absorbing Idle state (phi = 0) yields
    the point mass at Idle.

    Parameters
    ----------
    matrix : (n, n) ndarray
        Row-stochastic transition matrix.

    Returns
    -------
    pi : (n,) ndarray with residual ||pi @ P - pi||_inf <= 1e-12.
    """
    n = matrix.shape[0]
    if matrix.shape != (n, n):
        raise ValueError("matrix must be square")
    if np.any(np.abs(matrix.sum(axis=1) - 1.0) > 1e-12):
        raise ValueError("matrix rows must sum to 1")

    if matrix[0, 0] == 1.0:
        pi = np.zeros(n)
        pi[0] = 1.0
        return pi

    A = matrix.T - np.eye(n)
    A[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        pi = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        pi = None
    if pi is not None:
        pi = np.where(np.abs(pi) < 1e-15, 0.0, pi)
        if np.all(pi >= 0.0):
            pi = pi / pi.sum()
            if float(np.max(np.abs(pi @ matrix - pi))) <= 1e-12:
                return pi

    # Damped power iteration; the damping removes periodicity without
    # changing the stationary vector.
    pi = np.full(n, 1.0 / n)
    half = 0.5 * matrix
    for _ in range(2_000_000):
        nxt = 0.5 * pi + pi @ half
        if float(np.max(np.abs(nxt - pi))) < 1e-16:
            pi = nxt
            break
        pi = nxt
    pi = np.maximum(pi, 0.0)
    pi = pi / pi.sum()
    if float(np.max(np.abs(pi @ matrix - pi))) > 1e-12:
        raise RuntimeError("stationary solve did not reach the target residual")
    return pi


def coupling_probs(p_arr: np.ndarray, p_qe: np.ndarray) -> np.ndarray:
    """Idle-exit probabilities: own queue active and all higher-priority queues empty."""
    if np.any(p_arr < 0) or np.any(p_arr > 1) or np.any(p_qe < 0) or np.any(p_qe > 1):
        raise ValueError("inputs must be probabilities")
    phi = np.zeros(4)
    gate = 1.0
    for ac in AcIndex.priority_order():
        own = 1.0 - (1.0 - p_arr[ac]) * p_qe[ac]
        phi[ac] = own * gate
        gate *= p_qe[ac]
    return phi


def busy_ratios(
    dists: dict[AcIndex, AcDistribution],
    n_vehicles: int,
    timing: TimingDerived,
) -> tuple[float, float, np.ndarray]:
    """Aggregate busy ratios seen by one vehicle from the other n-1.

    theta_hat_s uses only the transmission entry mass (a busy sensed after an
    idle slot means a transmission just started); theta_hat_o uses the full
    transmit occupancy. theta splits theta_hat_s across ACs in proportion to
    each AC's transmit-initiation mass.
    """
    if n_vehicles < 1:
        raise ValueError("n_vehicles must be at least 1")
    prod_entry = 1.0
    prod_occ = 1.0
    init_mass = np.zeros(4)
    for ac in AcIndex.priority_order():
        d = dists[ac]
        prod_entry *= 1.0 - d.transmit_entry_prob
        prod_occ *= 1.0 - d.transmit_occupancy
        init_mass[ac] = d.initiation_mass(timing)
    theta_hat_s = 1.0 - prod_entry ** (n_vehicles - 1)
    theta_hat_o = 1.0 - prod_occ ** (n_vehicles - 1)
    total = float(init_mass.sum())
    theta = np.zeros(4) if total <= 0.0 else theta_hat_s * init_mass / total
    return theta_hat_s, theta_hat_o, theta


def closed_form_steady_state(
    ac: AcIndex,
    coupling: CouplingState,
    timing: TimingDerived,
    cw: int,
) -> AcDistribution:
    """Closed-form stationary distribution of one AC chain.

    Derived by solving the chain's balance equations with pi(Idle) as the free
    constant and normalizing at the end. Matches stationary_oracle on the
    explicit matrix; see tests for the equivalence property.
    """
    coupling.validate()
    omega = timing.omega[ac]
    theta = timing.theta_tx
    L = omega - 1
    phi = float(coupling.phi[ac])
    q = coupling.theta_hat_s
    q_o = coupling.theta_hat_o
    if q >= 1.0:
        raise ValueError("theta_hat_s = 1 leaves the chain without a transmit path")

    p_int = interruption_probs(ac, timing, coupling.theta)
    # Survival prefix F(j) = prod_{r<j} (1 - p(r)); G spans the whole AIFS run.
    surv = 1.0 - p_int
    F = np.concatenate(([1.0], np.cumprod(surv)))  # F[j-1] for j = 1..L+1
    G = float(F[L])
    if L >= 1 and G <= 0.0:
        raise ValueError("higher-priority busy ratios saturate the backoff AIFS")

    states = enumerate_states(ac, timing, cw)
    vals = np.zeros(len(states))
    idx = 0
    vals[idx] = 1.0  # Idle, the normalization anchor
    idx += 1

    # Initial AIFS run.
    aifs_vals = np.empty(omega)
    aifs_vals[0] = phi
    for j in range(2, omega + 1):
        aifs_vals[j - 1] = phi * (1.0 - q_o) * (1.0 - q) ** (j - 2)
    vals[idx:idx + omega] = aifs_vals
    idx += omega

    # Busy wait accumulates the uniform landings from Aifs(1) plus the
    # single-entry flows from the later AIFS slots.
    tail = (1.0 - q_o) * (1.0 - (1.0 - q) ** (omega - 1))
    busy_vals = np.array([phi * (j * q_o / theta + tail) for j in range(1, theta + 1)])
    vals[idx:idx + theta] = busy_vals
    idx += theta

    # Every exit from Idle eventually transmits exactly once, so each
    # Transmit slot carries the full idle-exit flow.
    vals[idx:idx + theta] = phi
    idx += theta

    beta = float(busy_vals[-1]) if theta >= 1 else 0.0
    s_stage = np.full(cw, 1.0 / (cw + 1))
    s_stage[0] = 2.0 / (cw + 1)
    s_cum = np.array([1.0] + [(cw - b) / (cw + 1) for b in range(1, cw)])

    one_mq = 1.0 - q
    y = beta * (s_stage * one_mq + q * s_cum) / (G * one_mq)      # BackoffAifs entry level
    delta = beta * (s_stage * one_mq * (1.0 - G) + q * s_cum) / (G * one_mq)
    sense_vals = beta * s_cum / one_mq

    for b in range(cw):
        vals[idx:idx + L] = y[b] * F[:L]
        idx += L
    for b in range(cw):
        vals[idx:idx + theta] = delta[b]
        idx += theta
    vals[idx:idx + cw] = sense_vals
    idx += cw
    assert idx == len(states)

    total = float(vals.sum())
    return AcDistribution(ac=ac, states=tuple(states), probs=vals / total)


def dump_matrix(matrix: np.ndarray, path: str) -> None:
    """Write the nonzero transitions as 'row col prob' text triplets."""
    with open(path, "w") as fh:
        rows, cols = np.nonzero(matrix)
        for r, c in zip(rows, cols):
            fh.write(f"{r} {c} {float(matrix[r, c])!r}\n")
