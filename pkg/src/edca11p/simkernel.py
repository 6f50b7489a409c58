"""Hot simulation kernels: slot loop over N vehicles times four AC chains.

The kernels are written once and either compiled with numba's @njit (default)
or executed as plain Python over numpy arrays when EDCA11P_DISABLE_JIT=1 is
set. Randomness comes from an inline splitmix64 stream so the two paths are
bit-identical; callers of the pure path run under np.errstate(over='ignore')
because numpy warns on the (intentional) uint64 wraparound.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = ["JIT_ENABLED", "run_sim_kernel", "run_frozen_kernel", "COUNTERS", "AC_COUNTERS"]

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency, kept defensive
    _HAVE_NUMBA = False

JIT_ENABLED = _HAVE_NUMBA and os.environ.get("EDCA11P_DISABLE_JIT", "") != "1"


def _maybe_jit(func):
    if JIT_ENABLED:
        return numba.njit(cache=True)(func)
    return func


# Chain phases.
PH_IDLE = 0
PH_AIFS = 1
PH_BUSY = 2
PH_TX = 3
PH_BOAIFS = 4
PH_BOBUSY = 5
PH_SENSE = 6

# Global counter slots (counters array).
C_SLOTS = 0        # slots counted after warmup
C_BUSY = 1         # slots with at least one vehicle transmitting
C_SOLO = 2         # slots with exactly one vehicle transmitting
C_COLL = 3         # slots with two or more vehicles entering their first tx slot
C_BUSY_EXCL = 4    # sum over vehicles of "some other vehicle transmits"
C_INIT_EXCL = 5    # sum over vehicles of "some other vehicle starts transmitting"
N_COUNTERS = 6
COUNTERS = {
    "slots": C_SLOTS, "busy": C_BUSY, "solo": C_SOLO, "collision": C_COLL,
    "busy_excl_self": C_BUSY_EXCL, "init_excl_self": C_INIT_EXCL,
}

# Per-AC counter slots (ac_counters array).
A_GEN = 0
A_DROP = 1
A_DONE = 2
A_QSUM = 3
A_QEMPTY = 4
A_QFULL = 5
A_TXON = 6         # slots with >= 1 vehicle transmitting on this AC
A_EXCL = 7         # solo-transmitter slots where the solo vehicle runs this AC
A_TX1 = 8          # (vehicle, slot) events in the first transmit slot
A_TXOCC = 9        # (vehicle, slot) events in any transmit slot
A_DELAY = 10       # summed packet delays, slots
A_SVC = 11         # summed head-of-line service times, slots
A_SVCN = 12        # completions counted in A_SVC
A_QWARM = 13       # total queued packets at the warmup boundary
N_AC_COUNTERS = 14
AC_COUNTERS = {
    "generated": A_GEN, "dropped": A_DROP, "completed": A_DONE,
    "queue_sum": A_QSUM, "queue_empty": A_QEMPTY, "queue_full": A_QFULL,
    "tx_on": A_TXON, "tx_exclusive": A_EXCL, "tx_entry": A_TX1,
    "tx_occupancy": A_TXOCC, "delay_slots": A_DELAY,
    "service_slots": A_SVC, "service_count": A_SVCN, "queued_at_warmup": A_QWARM,
}

_SM_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SM_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_SM_MIX2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = 1.0 / float(1 << 53)


@_maybe_jit
def _sm_next(rng):
    s = rng[0] + _SM_GAMMA
    rng[0] = s
    z = (s ^ (s >> np.uint64(30))) * _SM_MIX1
    z = (z ^ (z >> np.uint64(27))) * _SM_MIX2
    return z ^ (z >> np.uint64(31))


@_maybe_jit
def _sm_u01(rng):
    return float(_sm_next(rng) >> np.uint64(11)) * _INV_2_53


@_maybe_jit
def _sm_below(rng, bound):
    # Uniform integer in [0, bound); modulo bias is irrelevant at bound <= ~100.
    return np.int64(_sm_next(rng) % np.uint64(bound))


@_maybe_jit
def _state_index(a_omega, a_cw, theta, ph, c, b):
    """Index of a chain state in the canonical enumeration order.

    Layout: Idle, Aifs(1..omega), BusyWait(1..theta), Transmit(1..theta),
    BackoffAifs rows by counter, BackoffBusy rows by counter, Sense(0..cw-1).
    Busy counters beyond theta (extended waits in the live channel) clamp to
    the last busy slot.
    """
    if ph == PH_IDLE:
        return 0
    if ph == PH_AIFS:
        return c
    cc = c if c < theta else theta
    if ph == PH_BUSY:
        return a_omega + cc
    if ph == PH_TX:
        return a_omega + theta + c
    base = 1 + a_omega + 2 * theta
    if ph == PH_BOAIFS:
        return base + b * (a_omega - 1) + (c - 1)
    if ph == PH_BOBUSY:
        return base + a_cw * (a_omega - 1) + b * theta + (cc - 1)
    return base + a_cw * (a_omega - 1) + a_cw * theta + b  # PH_SENSE


@_maybe_jit
def _deposit(t, v, a, counting, m, qlen, qarr, qhead, svc_start, ac_counters):
    if counting:
        ac_counters[a, A_GEN] += 1
    if qlen[v, a] >= m:
        if counting:
            ac_counters[a, A_DROP] += 1
    else:
        if qlen[v, a] == 0:
            svc_start[v, a] = t
        qarr[v, a, (qhead[v, a] + qlen[v, a]) % m] = t
        qlen[v, a] += 1


@_maybe_jit
def run_sim_kernel(
    n, horizon, warmup,
    omega, cw, theta, m,
    cam_period_slots, p_trig_hpd, rep_hpd, p_trig_denm, rep_denm, k_rep, p_mhd,
    rng,
    phase, cnt, stage, qlen, qarr, qhead, svc_start, cam_next, burst_pos, tx_any,
    counters, ac_counters, hist,
    trace, trace_len,
):
    """Advance N vehicles slot by slot over a shared ideal broadcast channel.

    All state arrays are caller-allocated; statistics accumulate into the
    counters / ac_counters / hist arrays after the warmup boundary. The trace
    array (may be empty) records state changes as (slot, vehicle, ac, phase,
    count, counter) rows until it fills up.
    """
    trace_cap = trace.shape[0]

    # Random CAM phase per vehicle avoids artificial synchronization; a
    # period of 0 disables CAM (infinite period upstream).
    for v in range(n):
        cam_next[v] = _sm_below(rng, cam_period_slots) if cam_period_slots > 0 else -1

    for t in range(horizon):
        counting = t >= warmup
        if t == warmup:
            for a in range(4):
                total = 0
                for v in range(n):
                    total += qlen[v, a]
                ac_counters[a, A_QWARM] = total

        # Channel scan: who transmits, who initiates, per-AC occupancies.
        k_tx = 0
        ic = 0
        solo_vehicle = -1
        tx_on0 = False
        tx_on1 = False
        tx_on2 = False
        tx_on3 = False
        for v in range(n):
            veh_tx = False
            veh_init = False
            for a in range(4):
                ph = phase[v, a]
                if ph == PH_TX:
                    veh_tx = True
                    if counting:
                        ac_counters[a, A_TXOCC] += 1
                        if a == 0:
                            tx_on0 = True
                        elif a == 1:
                            tx_on1 = True
                        elif a == 2:
                            tx_on2 = True
                        else:
                            tx_on3 = True
                    if cnt[v, a] == 1:
                        veh_init = True
                        if counting:
                            ac_counters[a, A_TX1] += 1
                if counting:
                    hist[a, _state_index(omega[a], cw[a], theta, ph, cnt[v, a], stage[v, a])] += 1
            if veh_tx:
                k_tx += 1
                solo_vehicle = v
            if veh_init:
                ic += 1
            tx_any[v] = 1 if veh_tx else 0
        if counting:
            counters[C_SLOTS] += 1
            if k_tx >= 1:
                counters[C_BUSY] += 1
                counters[C_BUSY_EXCL] += n if k_tx >= 2 else n - 1
            if k_tx == 1:
                counters[C_SOLO] += 1
                for a in range(4):
                    if phase[solo_vehicle, a] == PH_TX:
                        ac_counters[a, A_EXCL] += 1
            if ic >= 1:
                counters[C_INIT_EXCL] += n if ic >= 2 else n - 1
            if ic >= 2:
                counters[C_COLL] += 1
            if tx_on0:
                ac_counters[0, A_TXON] += 1
            if tx_on1:
                ac_counters[1, A_TXON] += 1
            if tx_on2:
                ac_counters[2, A_TXON] += 1
            if tx_on3:
                ac_counters[3, A_TXON] += 1

        # Arrivals: CAM is periodic, HPD/DENM are triggered k-repetition
        # bursts, MHD is per-slot Bernoulli.
        for v in range(n):
            if cam_period_slots > 0 and t == cam_next[v]:
                cam_next[v] += cam_period_slots
                _deposit(t, v, 2, counting, m, qlen, qarr, qhead, svc_start, ac_counters)
            for g in range(2):
                pos = burst_pos[v, g]
                if pos < 0:
                    p_trig = p_trig_hpd if g == 0 else p_trig_denm
                    if _sm_u01(rng) < p_trig:
                        burst_pos[v, g] = 0
                else:
                    rep = rep_hpd if g == 0 else rep_denm
                    if pos % rep == 0:
                        _deposit(t, v, g, counting, m, qlen, qarr, qhead, svc_start, ac_counters)
                    if pos == (k_rep - 1) * rep:
                        burst_pos[v, g] = -1
                    else:
                        burst_pos[v, g] = pos + 1
            if _sm_u01(rng) < p_mhd:
                _deposit(t, v, 3, counting, m, qlen, qarr, qhead, svc_start, ac_counters)

        if counting:
            for v in range(n):
                for a in range(4):
                    q = qlen[v, a]
                    ac_counters[a, A_QSUM] += q
                    if q == 0:
                        ac_counters[a, A_QEMPTY] += 1
                    elif q == m:
                        ac_counters[a, A_QFULL] += 1

        # State transitions for slot t+1. Sensing is simultaneous: the channel
        # is busy for v when any other vehicle transmits during this slot.
        for v in range(n):
            busy = (k_tx - tx_any[v]) > 0
            for a in range(4):
                ph = phase[v, a]
                c = cnt[v, a]
                b = stage[v, a]
                if ph == PH_IDLE:
                    if qlen[v, a] > 0:
                        gated = False
                        for h in range(a):
                            if qlen[v, h] > 0:
                                gated = True
                                break
                        if not gated:
                            ph = PH_AIFS
                            c = 1
                elif ph == PH_AIFS:
                    if busy:
                        ph = PH_BUSY
                        c = 1
                    elif c == omega[a]:
                        ph = PH_TX
                        c = 1
                    else:
                        c += 1
                elif ph == PH_BUSY:
                    if busy:
                        c += 1
                    else:
                        d = _sm_below(rng, cw[a] + 1)
                        b = 0 if d <= 1 else d - 1
                        if omega[a] > 1:
                            ph = PH_BOAIFS
                            c = 1
                        else:
                            ph = PH_SENSE
                            c = 0
                elif ph == PH_TX:
                    if c == theta:
                        head = qarr[v, a, qhead[v, a]]
                        qhead[v, a] = (qhead[v, a] + 1) % m
                        qlen[v, a] -= 1
                        if counting:
                            ac_counters[a, A_DONE] += 1
                            ac_counters[a, A_DELAY] += t - head + 1
                            ac_counters[a, A_SVC] += t - svc_start[v, a] + 1
                            ac_counters[a, A_SVCN] += 1
                        if qlen[v, a] > 0:
                            svc_start[v, a] = t + 1
                        ph = PH_IDLE
                        c = 0
                        b = 0
                    else:
                        c += 1
                elif ph == PH_BOAIFS:
                    if busy:
                        ph = PH_BOBUSY
                        c = 1
                    elif c == omega[a] - 1:
                        ph = PH_SENSE
                        c = 0
                    else:
                        c += 1
                elif ph == PH_BOBUSY:
                    if busy:
                        c += 1
                    else:
                        if omega[a] > 1:
                            ph = PH_BOAIFS
                            c = 1
                        else:
                            ph = PH_SENSE
                            c = 0
                else:  # PH_SENSE
                    if busy:
                        ph = PH_BOBUSY
                        c = 1
                    elif b > 0:
                        b -= 1
                    else:
                        ph = PH_TX
                        c = 1
                if trace_cap > 0 and (ph != phase[v, a] or c != cnt[v, a] or b != stage[v, a]):
                    row = trace_len[0]
                    if row < trace_cap:
                        trace[row, 0] = t + 1
                        trace[row, 1] = v
                        trace[row, 2] = a
                        trace[row, 3] = ph
                        trace[row, 4] = c
                        trace[row, 5] = b
                        trace_len[0] = row + 1
                phase[v, a] = ph
                cnt[v, a] = c
                stage[v, a] = b


@_maybe_jit
def run_frozen_kernel(
    slots, warmup,
    a_omega, a_cw, theta,
    phi, th_o, th_s, p_int,
    rng, occ,
):
    """Drive one AC chain with externally injected busy indications.

    The busy process follows the analytical transition probabilities (th_o
    with a uniform landing on the first AIFS slot, th_s later and at sense
    slots, the per-position interruption probabilities during backoff AIFS),
    so the long-run state occupancy estimates the chain's stationary
    distribution.
    """
    ph = PH_IDLE
    c = 0
    b = 0
    for t in range(slots):
        if t >= warmup:
            occ[_state_index(a_omega, a_cw, theta, ph, c, b)] += 1
        if ph == PH_IDLE:
            if _sm_u01(rng) < phi:
                ph = PH_AIFS
                c = 1
        elif ph == PH_AIFS:
            if c == 1:
                if _sm_u01(rng) < th_o:
                    ph = PH_BUSY
                    c = 1 + _sm_below(rng, theta)
                elif a_omega == 1:
                    ph = PH_TX
                    c = 1
                else:
                    c = 2
            elif _sm_u01(rng) < th_s:
                ph = PH_BUSY
                c = 1
            elif c == a_omega:
                ph = PH_TX
                c = 1
            else:
                c += 1
        elif ph == PH_BUSY:
            if c == theta:
                d = _sm_below(rng, a_cw + 1)
                b = 0 if d <= 1 else d - 1
                if a_omega > 1:
                    ph = PH_BOAIFS
                    c = 1
                else:
                    ph = PH_SENSE
                    c = 0
            else:
                c += 1
        elif ph == PH_TX:
            if c == theta:
                ph = PH_IDLE
                c = 0
                b = 0
            else:
                c += 1
        elif ph == PH_BOAIFS:
            if _sm_u01(rng) < p_int[c - 1]:
                ph = PH_BOBUSY
                c = 1
            elif c == a_omega - 1:
                ph = PH_SENSE
                c = 0
            else:
                c += 1
        elif ph == PH_BOBUSY:
            if c == theta:
                if a_omega > 1:
                    ph = PH_BOAIFS
                    c = 1
                else:
                    ph = PH_SENSE
                    c = 0
            else:
                c += 1
        else:  # PH_SENSE
            if _sm_u01(rng) < th_s:
                ph = PH_BOBUSY
                c = 1
            elif b > 0:
                b -= 1
            else:
                ph = PH_TX
                c = 1
