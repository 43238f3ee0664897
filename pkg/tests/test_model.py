import math

import pytest
from hypothesis import given, strategies as st

from rrqss.model import (
    Geometry,
    SystemParams,
    arm_transmittance,
    channel_transmittance,
    plob_bound,
)

# oracle values: mpmath at 50 digits
ARM_200_UNIT = 0.021379620895022321
ARM_600 = 5.4725284373525398e-06
PLOB_0 = 1.1844245711374274
PLOB_300 = 7.8952112410960596e-06


def test_arm_transmittance_at_zero_is_detector_efficiency(table1):
    assert arm_transmittance(table1, Geometry(0)) == 0.56


@pytest.mark.parametrize("eta_d,D,expected", [(1.0, 200, ARM_200_UNIT), (0.56, 600, ARM_600)])
def test_arm_transmittance_golden(eta_d, D, expected):
    sp = SystemParams(eta_d=eta_d)
    assert arm_transmittance(sp, Geometry(D)) == pytest.approx(expected, rel=1e-12)


def test_plob_golden(table1):
    assert plob_bound(table1, Geometry(0)) == pytest.approx(PLOB_0, rel=1e-13)
    assert plob_bound(table1, Geometry(300)) == pytest.approx(PLOB_300, rel=1e-12)


def test_plob_small_eta_limit():
    sp = SystemParams()
    g = Geometry(2000)
    eta = channel_transmittance(sp, g)
    assert plob_bound(sp, g) / eta == pytest.approx(1 / math.log(2), rel=1e-12)


def test_plob_diverges_at_unit_transmittance():
    with pytest.raises(ValueError):
        plob_bound(SystemParams(eta_d=1.0), Geometry(0))


@pytest.mark.parametrize("kwargs", [
    {"eta_d": 0}, {"eta_d": 1.2}, {"p_d": 1.0}, {"p_d": -1e-9}, {"e_d": 0.6},
    {"alpha": 0}, {"f": 0.9},
])
def test_system_params_invariants(kwargs):
    with pytest.raises(ValueError):
        SystemParams(**kwargs)


def test_geometry_rejects_negative_and_asymmetric():
    with pytest.raises(ValueError):
        Geometry(-1)
    with pytest.raises(ValueError):
        Geometry(10, symmetric=False)


distances = st.floats(0, 1000, allow_nan=False)
params = st.builds(SystemParams, eta_d=st.floats(0.01, 1.0), alpha=st.floats(0.01, 0.5))


@given(params, distances, distances)
def test_arm_transmittance_strictly_decreasing(sp, d1, d2):
    lo, hi = sorted((d1, d2))
    if hi - lo < 1e-6:
        return
    a, b = arm_transmittance(sp, Geometry(lo)), arm_transmittance(sp, Geometry(hi))
    if b > 0:
        assert a > b


@given(params, distances)
def test_arm_squared_equals_eta_d_times_channel(sp, D):
    g = Geometry(D)
    assert arm_transmittance(sp, g) ** 2 == pytest.approx(
        sp.eta_d * channel_transmittance(sp, g), rel=1e-12)


@given(st.floats(1e-12, 0.999999))
def test_plob_dominates_transmittance(eta):
    # choose D so that channel transmittance is eta with eta_d = 1
    sp = SystemParams(eta_d=1.0, alpha=0.2)
    D = -10 * math.log10(eta) / sp.alpha
    assert plob_bound(sp, Geometry(D)) >= channel_transmittance(sp, Geometry(D))
