import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from netisac.geometry import (
    AirPoint,
    ArrayConfig,
    GbsSite,
    aod_cosine,
    channel_outer,
    channel_vector,
    steering_vector,
)

coord = st.floats(-500, 500, allow_nan=False)
alt = st.floats(1, 300, allow_nan=False)


def test_aod_examples():
    g = GbsSite(0, (0.0, 0.0))
    assert aod_cosine("horizontal", g, AirPoint((0.0, 0.0), 80.0)) == 0.0
    assert aod_cosine("vertical", g, AirPoint((0.0, 0.0), 80.0)) == 1.0
    assert aod_cosine("horizontal", g, AirPoint((60.0, 0.0), 80.0)) == pytest.approx(0.6, abs=1e-15)


def test_steering_examples():
    cfg = ArrayConfig()
    assert np.allclose(steering_vector(0.0, cfg), np.ones(4))
    assert np.allclose(steering_vector(1.0, cfg), [1, -1, 1, -1])
    phases = np.angle(steering_vector(0.6, cfg) * np.exp(-1j * 1e-9))
    want = np.angle(np.exp(1j * np.pi * np.array([0, 0.6, 1.2, 1.8])))
    assert np.allclose(phases, want, atol=1e-8)


def test_channel_examples():
    cfg = ArrayConfig()
    h = channel_vector(GbsSite(0, (0, 0)), AirPoint((60.0, 0.0), 80.0), cfg, 10**-4.5)
    assert np.allclose(np.abs(h.entries), np.sqrt(10**-4.5 / 1e4), rtol=1e-12)
    assert np.sqrt(10**-4.5 / 1e4) == pytest.approx(5.623e-5, rel=1e-3)
    h0 = channel_vector(GbsSite(0, (0, 0)), AirPoint((60.0, 0.0), 80.0), cfg, 0.0)
    assert not np.any(h0.entries)


def test_channel_outer_examples(rng):
    H = channel_outer(np.array([1, 0, 0, 0]))
    assert H[0, 0] == 1 and np.count_nonzero(H) == 1
    h = rng.normal(size=4) + 1j * rng.normal(size=4)
    ev = np.linalg.eigvalsh(channel_outer(h))
    assert np.allclose(ev, [0, 0, 0, np.vdot(h, h).real], atol=1e-12)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        AirPoint((0, 0), 0.0)
    with pytest.raises(ValueError):
        ArrayConfig(orientation="diagonal")
    with pytest.raises(ValueError):
        GbsSite(0, (np.nan, 0))


@given(coord, coord, coord, coord, alt, st.sampled_from(["horizontal", "vertical"]))
def test_cosine_in_range(ux, uy, qx, qy, h, orient):
    c = aod_cosine(orient, GbsSite(0, (ux, uy)), AirPoint((qx, qy), h))
    assert -1 <= c <= 1


@given(coord, alt)
def test_cosine_orthogonal_offset(qy, h):
    assert aod_cosine("horizontal", GbsSite(0, (5.0, 0.0)), AirPoint((5.0, qy), h)) == 0.0


@given(st.floats(-1, 1), st.integers(1, 16), st.floats(0.1, 2))
def test_steering_norm(c, n, d):
    a = steering_vector(c, ArrayConfig(n, d))
    assert np.allclose(np.abs(a), 1.0, atol=1e-14)
    assert abs(np.vdot(a, a).real - n) <= 1e-12 * n


@given(coord, coord, alt, st.floats(1e-8, 1), st.sampled_from(["horizontal", "vertical"]))
def test_channel_norm_identity(qx, qy, h, kappa, orient):
    cfg = ArrayConfig(orientation=orient)
    p = AirPoint((qx, qy), h)
    v = channel_vector(GbsSite(0, (10.0, -20.0)), p, cfg, kappa).entries
    d2 = (qx - 10.0) ** 2 + (qy + 20.0) ** 2 + h**2
    assert np.vdot(v, v).real * d2 / kappa == pytest.approx(4, rel=1e-10)
    H = channel_outer(v)
    assert np.linalg.norm(H - H.conj().T) <= 1e-12 * np.linalg.norm(H)
    assert np.linalg.eigvalsh(H)[0] >= -1e-10 * np.trace(H).real
