import math
from fractions import Fraction

import pytest

from edca11p.params import AcIndex, EdcaConfig, TimingDerived, derive_timing


def test_priority_order_fixed():
    order = AcIndex.priority_order()
    assert order == (AcIndex.VO, AcIndex.VI, AcIndex.BE, AcIndex.BK)
    assert AcIndex.BK.higher_priority() == (AcIndex.VO, AcIndex.VI, AcIndex.BE)
    assert AcIndex.VO.higher_priority() == ()


def test_default_omega_matches_closed_form_index_ranges():
    timing = derive_timing(EdcaConfig())
    assert timing.omega == (5, 6, 9, 12)
    # The per-AC backoff AIFS lengths must line up with the fixed offsets the
    # closed forms hard-code against the longest AIFS.
    om = dict(zip(AcIndex.priority_order(), timing.omega))
    assert om[AcIndex.BK] - 8 == om[AcIndex.VO] - 1
    assert om[AcIndex.BK] - 7 == om[AcIndex.VI] - 1
    assert om[AcIndex.BK] - 4 == om[AcIndex.BE] - 1
    assert om[AcIndex.BK] - 1 == om[AcIndex.BK] - 1


def test_transmission_duration_from_payload():
    timing = derive_timing(EdcaConfig())
    # Independent exact-arithmetic oracle: ceil((134*8 bits / 6 Mb/s) / 13 us).
    airtime = Fraction(134 * 8, 6_000_000)
    expected = math.ceil(airtime / Fraction(13, 1_000_000))
    assert expected == 14
    assert timing.theta_tx == expected


def test_exact_sifs_division():
    cfg = EdcaConfig(sifs=39e-6)
    timing = derive_timing(cfg)
    assert timing.omega[AcIndex.VO] == 2 + 3


def test_omega_bounds_aifs():
    cfg = EdcaConfig()
    timing = derive_timing(cfg)
    for ac in AcIndex.priority_order():
        aifs = cfg.sifs + cfg.aifsn[ac] * cfg.slot_time
        assert timing.omega[ac] * cfg.slot_time >= aifs - 1e-12


def test_derive_timing_is_pure():
    cfg = EdcaConfig()
    assert derive_timing(cfg) == derive_timing(cfg)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(slot_time=0.0),
        dict(cch_rate=0.0),
        dict(payload_bits=0),
        dict(aifsn=(2, 2, 6, 9)),
        dict(cw=(8, 4, 16, 16)),
        dict(phy_overhead=-1e-6),
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        EdcaConfig(**kwargs)


def test_timing_validation():
    with pytest.raises(ValueError):
        TimingDerived(omega=(5, 5, 9, 12), theta_tx=14)
    with pytest.raises(ValueError):
        TimingDerived(omega=(5, 6, 9, 12), theta_tx=0)
