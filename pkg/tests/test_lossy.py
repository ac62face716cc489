import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from irslink.channel import LinkBudget
from irslink.errors import ParameterError
from irslink.lossy import (
    SourceModel,
    binary_entropy,
    budget_gamma0,
    capacity,
    gain_threshold,
    rate_distortion,
    snr_threshold_from_distortion,
)

FAIR = SourceModel(0.5)


def test_binary_entropy_values():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.1) == pytest.approx(0.46900, abs=1e-5)


@pytest.mark.parametrize("x", [-0.01, 1.01, math.nan])
def test_binary_entropy_domain(x):
    with pytest.raises(ParameterError):
        binary_entropy(x)


def test_rate_distortion_values():
    assert rate_distortion(FAIR, 0.0) == 1.0
    assert rate_distortion(FAIR, 0.5) == 0.0
    assert rate_distortion(FAIR, 0.1) == pytest.approx(0.53100, abs=1e-5)
    assert rate_distortion(SourceModel(0.2), 0.3) == 0.0
    with pytest.raises(ParameterError):
        rate_distortion(FAIR, 1.5)


def test_zero_distortion_rate_is_source_entropy():
    for p in (0.0, 0.1, 0.3, 0.5):
        assert rate_distortion(SourceModel(p), 0.0) == binary_entropy(p)


def test_source_bias_range():
    with pytest.raises(ParameterError):
        SourceModel(0.6)


def test_snr_threshold_values():
    assert snr_threshold_from_distortion(FAIR, 0.0, 1.0) == pytest.approx(3.0, abs=1e-10)
    assert snr_threshold_from_distortion(FAIR, 0.5, 2.0) == 0.0
    assert snr_threshold_from_distortion(FAIR, 0.7, 0.5) == 0.0
    assert snr_threshold_from_distortion(FAIR, 0.1, 1.0) == pytest.approx(1.0880, abs=1e-3)
    # 2^(2 (1 - H_b(0.4))) - 1
    assert snr_threshold_from_distortion(FAIR, 0.4, 1.0) == pytest.approx(0.041093, abs=1e-6)
    with pytest.raises(ParameterError):
        snr_threshold_from_distortion(FAIR, 0.0, 0.0)


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_rate_distortion_non_increasing(d1, d2):
    lo, hi = sorted((d1, d2))
    assert rate_distortion(FAIR, lo) >= rate_distortion(FAIR, hi)


def test_rate_distortion_continuous_at_bias():
    src = SourceModel(0.3)
    assert rate_distortion(src, 0.3 - 1e-9) == pytest.approx(0.0, abs=1e-7)


@given(st.floats(0.0, 0.5), st.floats(0.0, 1.0), st.floats(0.05, 4.0))
def test_capacity_round_trip(p, d, r_c):
    src = SourceModel(p)
    gamma0 = snr_threshold_from_distortion(src, d, r_c)
    assert capacity(gamma0) == pytest.approx(r_c * rate_distortion(src, d), abs=1e-10)


@given(st.floats(0.0, 0.5), st.floats(0.0, 0.5), st.floats(0.1, 3.0), st.floats(0.1, 3.0))
def test_snr_threshold_monotone(d1, d2, r1, r2):
    (dl, dh), (rl, rh) = sorted((d1, d2)), sorted((r1, r2))
    assert snr_threshold_from_distortion(FAIR, dl, 1.0) >= snr_threshold_from_distortion(FAIR, dh, 1.0)
    assert snr_threshold_from_distortion(FAIR, 0.1, rl) <= snr_threshold_from_distortion(FAIR, 0.1, rh)


def test_gain_threshold_table_values():
    budget = LinkBudget(p_s=1e-3, n0=1e-7, pl=1e4, gamma0=10.0)
    assert gain_threshold(budget) == pytest.approx(math.sqrt(10.0), abs=1e-10)
    assert gain_threshold(LinkBudget(p_s=1e-3, n0=1e-7, pl=1e4, gamma0=0.0)) == 0.0
    quad = LinkBudget(p_s=4e-3, n0=1e-7, pl=1e4, gamma0=10.0)
    assert gain_threshold(quad) == pytest.approx(0.5 * gain_threshold(budget), rel=1e-15)


def test_gamma0_explicit_overrides_distortion():
    derived = LinkBudget(p_s=1.0, n0=1.0, pl=1.0, distortion=0.0)
    explicit = LinkBudget(p_s=1.0, n0=1.0, pl=1.0, distortion=0.0, gamma0=10.0)
    assert budget_gamma0(derived) == pytest.approx(3.0)
    assert budget_gamma0(explicit) == 10.0


def test_gain_threshold_monotone_in_every_input():
    base = dict(p_s=1e-3, n0=1e-7, pl=1e4, gamma0=10.0)
    h = gain_threshold(LinkBudget(**base))
    for name, factor, direction in (("p_s", 2.0, -1), ("gamma0", 2.0, 1), ("n0", 2.0, 1), ("pl", 2.0, 1)):
        changed = dict(base, **{name: base[name] * factor})
        assert np.sign(gain_threshold(LinkBudget(**changed)) - h) == direction
