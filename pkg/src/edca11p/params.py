"""EDCA timing and contention parameters for the 802.11p control channel.

Everything downstream works in whole aSlotTime units, so this module turns
standard-level durations (SIFS, AIFSN, payload/rate) into integer slot counts.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

__all__ = [
    "AcIndex",
    "EdcaConfig",
    "TimingDerived",
    "derive_timing",
]


class AcIndex(enum.IntEnum):
    """The four EDCA access categories, ordered from highest to lowest priority."""

    VO = 0  # voice queue, carries HPD traffic
    VI = 1  # video queue, carries DENM traffic
    BE = 2  # best effort queue, carries CAM traffic
    BK = 3  # background queue, carries MHD traffic

    @staticmethod
    def priority_order() -> tuple["AcIndex", ...]:
        """All ACs from highest priority (VO) to lowest (BK)."""
        return (AcIndex.VO, AcIndex.VI, AcIndex.BE, AcIndex.BK)

    def higher_priority(self) -> tuple["AcIndex", ...]:
        """ACs that take strict precedence over this one."""
        return tuple(a for a in AcIndex.priority_order() if a < self)


def _ceil_slots(duration: float, slot: float) -> int:
    # Guard against float dust when the duration is an exact slot multiple
    # (39us / 13us must give 3, not 4).
    return int(math.ceil(duration / slot - 1e-9))


@dataclass(frozen=True)
class EdcaConfig:
    """Standard-level channel access configuration (CCH, broadcast mode)."""

    slot_time: float = 13e-6
    sifs: float = 32e-6
    aifsn: tuple[int, int, int, int] = (2, 3, 6, 9)
    cw: tuple[int, int, int, int] = (4, 8, 16, 16)
    payload_bits: int = 134 * 8
    cch_rate: float = 6e6
    phy_overhead: float = 0.0

    def __post_init__(self) -> None:
        if self.slot_time <= 0:
            raise ValueError("slot_time must be positive")
        if self.sifs < 0:
            raise ValueError("sifs must be non-negative")
        if self.cch_rate <= 0:
            raise ValueError("cch_rate must be positive")
        if self.payload_bits <= 0:
            raise ValueError("payload_bits must be positive")
        if self.phy_overhead < 0:
            raise ValueError("phy_overhead must be non-negative")
        if len(self.aifsn) != 4 or len(self.cw) != 4:
            raise ValueError("aifsn and cw must have one entry per AC")
        if any(v <= 0 for v in self.aifsn) or any(v <= 0 for v in self.cw):
            raise ValueError("aifsn and cw entries must be positive integers")
        if not (self.aifsn[0] < self.aifsn[1] < self.aifsn[2] < self.aifsn[3]):
            raise ValueError("aifsn must strictly increase from vo to bk")
        if not (self.cw[0] <= self.cw[1] <= self.cw[2] <= self.cw[3]):
            raise ValueError("cw must be non-decreasing from vo to bk")


@dataclass(frozen=True)
class TimingDerived:
    """Slot-count constants driving the per-AC chains."""

    omega: tuple[int, int, int, int]  # AIFS duration per AC, in slots
    theta_tx: int  # transmission duration of one packet, in slots
    slot_time: float = 13e-6

    def __post_init__(self) -> None:
        if not (self.omega[0] < self.omega[1] < self.omega[2] < self.omega[3]):
            raise ValueError("omega must strictly increase from vo to bk")
        if self.theta_tx < 1:
            raise ValueError("theta_tx must be at least one slot")


def derive_timing(cfg: EdcaConfig) -> TimingDerived:
    """Derive AIFS slot counts and the transmission duration from an EdcaConfig.

    AIFS is SIFS plus AIFSN slots; SIFS is rounded up to whole slots so that
    every AC's AIFS is an integer slot count and pairwise AIFS differences
    equal pure AIFSN differences.
    """
    sifs_slots = _ceil_slots(cfg.sifs, cfg.slot_time)
    omega = tuple(a + sifs_slots for a in cfg.aifsn)
    airtime = cfg.payload_bits / cfg.cch_rate + cfg.phy_overhead
    theta_tx = max(1, _ceil_slots(airtime, cfg.slot_time))
    return TimingDerived(omega=omega, theta_tx=theta_tx, slot_time=cfg.slot_time)
