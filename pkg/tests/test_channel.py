import numpy as np
import pytest

from lmapdec.channel import (
    ChannelError,
    ChannelParams,
    frame_rng,
    make_sse_frame,
    sse_from_channel,
    transmit,
)


def test_sigma_convention():
    # sigma^2 = 1/(2 * R * 10^(snr/10)); at rate 1/2 this is 10^(-snr/10)
    p = ChannelParams(ebn0_db=3.0)
    assert p.sigma2 == pytest.approx(10 ** (-0.3))
    p = ChannelParams(ebn0_db=0.0, rate=1.0)
    assert p.sigma2 == pytest.approx(0.5)


def test_transmit_deterministic():
    p = ChannelParams(ebn0_db=2.0, seed=42)
    x = np.ones(64)
    y1 = transmit(x, p, frame_index=5)
    y2 = transmit(x, p, frame_index=5)
    assert np.array_equal(y1, y2)
    y3 = transmit(x, p, frame_index=6)
    assert not np.array_equal(y1, y3)


def test_transmit_mean_bound():
    # law of large numbers: sample mean of the noise within 5 sigma/sqrt(n)
    p = ChannelParams(ebn0_db=0.0, seed=1)
    x = np.zeros(1_000_000)
    noise = transmit(x, p)
    assert abs(noise.mean()) < 5 * p.sigma / 1000


def test_sse_values():
    assert sse_from_channel(0.0, 1.0) == 0.0
    s = 0.8
    assert sse_from_channel(s * s, s) == pytest.approx(np.tanh(1.0))
    assert sse_from_channel(1e9, 0.5) == pytest.approx(1.0 - 1e-12, abs=1e-15)
    with pytest.raises(ChannelError):
        sse_from_channel(1.0, 0.0)


def test_sse_symmetry_and_monotonicity():
    y = np.linspace(-8, 8, 401)
    x = sse_from_channel(y, 0.9)
    assert np.allclose(x, -sse_from_channel(-y, 0.9))
    assert np.all(np.diff(x) >= 0)


def test_sse_llr_round_trip():
    # log((1+x)/(1-x)) recovers the channel LLR 2y/sigma^2
    rng = np.random.default_rng(0)
    sigma = 0.7
    y = rng.normal(0, 1.5, 1000)
    x = sse_from_channel(y, sigma)
    keep = np.abs(x) <= 1 - 1e-6
    llr = np.log((1 + x[keep]) / (1 - x[keep]))
    assert np.max(np.abs(llr - 2 * y[keep] / sigma**2)) < 1e-9


def test_frame_rng_streams_independent_of_order():
    a1 = frame_rng(9, 1).standard_normal(8)
    b1 = frame_rng(9, 2).standard_normal(8)
    b2 = frame_rng(9, 2).standard_normal(8)
    a2 = frame_rng(9, 1).standard_normal(8)
    assert np.array_equal(a1, a2)
    assert np.array_equal(b1, b2)
    assert not np.array_equal(a1, b1)


def test_make_sse_frame_shape_and_clamp():
    p = ChannelParams(ebn0_db=4.0, seed=3)
    frame = make_sse_frame(np.zeros(40, dtype=np.uint8), p)
    assert frame.shape == (20, 2)
    assert np.all(np.abs(frame) <= 1 - 1e-12)
    with pytest.raises(ChannelError):
        make_sse_frame(np.zeros(5, dtype=np.uint8), p)
