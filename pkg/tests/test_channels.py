import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fibermi.channels import (
    InputDistribution,
    block_outputs,
    dispersive_link,
    mimo2x2_channel,
    qam_constellation,
    realistic_link,
    rotation_matrix,
    awgn_channel,
    zero_dispersion_link,
)
from fibermi.dsp import LinkConfig
from fibermi.estimators import mi_kraskov, mi_3h
from fibermi.numerics import RandomStream, awgn_capacity, dbm_to_watt


@pytest.mark.parametrize("inp", [InputDistribution("cscg", 2.5), InputDistribution("half-gaussian", 2.5),
                                 InputDistribution("qam", 2.5, 64)], ids=lambda i: i.label)
def test_input_power_within_one_percent(inp):
    x, _ = inp.generate(RandomStream(1), 10**6)
    assert np.mean(np.abs(x) ** 2) == pytest.approx(2.5, rel=0.01)


def test_half_gaussian_shape():
    x, _ = InputDistribution("half-gaussian", 1.0).generate(RandomStream(2), 10**5)
    amp, ph = np.abs(x), np.mod(np.angle(x), 2 * np.pi)
    # half-normal with unit scale: mean sqrt(2/pi)
    assert amp.mean() == pytest.approx(math.sqrt(2 / math.pi), rel=0.01)
    hist, _ = np.histogram(ph, bins=8, range=(0, 2 * np.pi))
    assert np.all(np.abs(hist / hist.mean() - 1) < 0.05)


def test_qam_constellation():
    c = qam_constellation(16)
    assert len(c) == 16 and np.mean(np.abs(c) ** 2) == pytest.approx(1)
    assert len(np.unique(np.round(c.real, 12))) == 4
    with pytest.raises(ValueError):
        qam_constellation(8)


def test_input_validation():
    with pytest.raises(ValueError):
        InputDistribution("laplace")
    with pytest.raises(ValueError):
        InputDistribution("cscg", 0.0)
    with pytest.raises(ValueError):
        InputDistribution("qam", 1.0, 12)


def test_awgn_noiseless():
    run = awgn_channel(InputDistribution(), math.inf, 100, RandomStream(3))
    np.testing.assert_array_equal(run.x.data, run.y.data)


def test_awgn_power_additivity_and_snr():
    run = awgn_channel(InputDistribution("cscg", 1.0), 1.0, 10**5, RandomStream(4))
    y = run.y.to_complex()[:, 0]
    x = run.x.to_complex()[:, 0]
    assert np.mean(np.abs(y) ** 2) == pytest.approx(2.0, rel=0.02)
    assert np.mean(np.abs(x) ** 2) / np.mean(np.abs(y - x) ** 2) == pytest.approx(1.0, rel=0.02)


def test_awgn_rejects_bad_snr():
    with pytest.raises(ValueError):
        awgn_channel(InputDistribution(), 0.0, 10, RandomStream(0))


def test_awgn_kraskov_6db():
    snr = 10 ** 0.6
    run = awgn_channel(InputDistribution(), snr, 11000, RandomStream(5))
    assert mi_kraskov(run.x, run.y, 4).value == pytest.approx(2.3167, abs=0.15)


def test_rotation_orthogonal():
    for a in RandomStream(6).uniform(100) * math.pi:
        h = rotation_matrix(a)
        assert np.max(np.abs(h.T @ h - np.eye(2))) <= 1e-14


def test_mimo_limits():
    inp = InputDistribution()
    run = mimo2x2_channel(inp, math.inf, math.pi / 2, 50, RandomStream(7))
    x, y = run.x.to_complex(), run.y.to_complex()
    np.testing.assert_allclose(y[:, 0], x[:, 1], atol=1e-15)
    np.testing.assert_allclose(y[:, 1], -x[:, 0], atol=1e-15)
    run = mimo2x2_channel(inp, math.inf, 0.0, 50, RandomStream(7))
    np.testing.assert_array_equal(run.x.data, run.y.data)
    with pytest.raises(ValueError):
        mimo2x2_channel(inp, 1.0, 4.0, 10, RandomStream(0))


def test_zero_dispersion_phase_per_span():
    link = LinkConfig(100, 1, 0.2, 0, 1.27, 5.0, 50e9)
    # oracle: (1 - 10**-2) / (0.2 ln10 / 10) = 21.4976 km, phase 0.27302 rad (frozen)
    oracle = (1 - 10**-2) / (0.2 * math.log(10) / 10)
    assert link.effective_length_km == pytest.approx(oracle, rel=1e-14)
    assert link.effective_length_km == pytest.approx(21.4976, abs=1e-4)
    assert 1.27 * link.effective_length_km * 0.01 == pytest.approx(0.27302, abs=1e-5)
    run = zero_dispersion_link(InputDistribution("cscg", 0.01), link.replace(noise_figure_db=1e-12),
                               1, RandomStream(0))
    x, y = run.x.to_complex()[0, 0], run.y.to_complex()[0, 0]
    assert np.angle(y / x) == pytest.approx(1.27 * oracle * abs(x) ** 2, abs=1e-3)


def test_zero_dispersion_noiseless_rotation():
    # a near-ideal amplifier still adds ASE (F -> 1), so compare at a power where
    # that noise is ~1e-4 of the signal amplitude
    link = LinkConfig(100, 3, 0.2, 0, 1.27, 1e-9, 50e9)
    inp = InputDistribution("cscg", 0.01)
    run = zero_dispersion_link(inp, link, 200, RandomStream(8))
    x, y = run.x.to_complex()[:, 0], run.y.to_complex()[:, 0]
    expect = x * np.exp(1j * 3 * 1.27 * link.effective_length_km * np.abs(x) ** 2)
    noise = math.sqrt(3 * link.ase_variance)
    assert np.max(np.abs(y - expect)) < 6 * noise


def test_zero_dispersion_gamma0_matches_awgn():
    link = LinkConfig(100, 12, 0.2, 0, 0.0, 6.0, 50e9)
    p = dbm_to_watt(-10)
    inp = InputDistribution("cscg", p)
    a = zero_dispersion_link(inp, link, 2**13, RandomStream(9))
    b = awgn_channel(inp, a.snr_reference, 2**13, RandomStream(10))
    ra, rb = mi_kraskov(a.x, a.y, 4), mi_kraskov(b.x, b.y, 4)
    assert abs(ra.value - rb.value) <= 2 * math.hypot(ra.stderr, rb.stderr)


def test_zero_dispersion_snr_reference():
    link = LinkConfig(100, 12, 0.2, 0, 1.27, 6.0, 50e9)
    snrs = [zero_dispersion_link(InputDistribution("cscg", dbm_to_watt(p)), link, 10,
                                 RandomStream(0)).snr_reference for p in range(-20, 20, 5)]
    assert np.all(np.diff(snrs) > 0)


@settings(max_examples=30, deadline=None)
@given(p1=st.floats(-40, 20), p2=st.floats(-40, 20), spans=st.integers(1, 30))
def test_snr_reference_monotone_in_power(p1, p2, spans):
    link = LinkConfig(100, spans, 0.2, 0, 1.27, 6.0, 50e9)
    lo, hi = sorted((p1, p2))
    assert link.snr_reference(dbm_to_watt(lo)) <= link.snr_reference(dbm_to_watt(hi))


def test_block_outputs():
    x = np.arange(10)
    y = np.arange(10) * 10
    xb, yb = block_outputs(x, y, 3)
    np.testing.assert_array_equal(xb, np.arange(1, 9))
    np.testing.assert_array_equal(yb[0], [0, 10, 20])
    with pytest.raises(ValueError):
        block_outputs(x, y, 4)


def test_dispersive_zero_spans_identity():
    inp = InputDistribution("cscg", 1e-3)
    link = LinkConfig(80, 0, 0.2, 16, 0, 5.3, 10e9)
    runs = dispersive_link(inp, link, 2000, [1, 5], RandomStream(11))
    for r in runs:
        h = r.y.d // 2 // 2
        xc = r.x.to_complex()[:, 0]
        yc = r.y.to_complex()[:, h]
        assert np.max(np.abs(xc - yc)) < 1e-10 * np.max(np.abs(xc))


def test_dispersive_without_dispersion_tracks_capacity():
    inp = InputDistribution("cscg", dbm_to_watt(-30))
    link = LinkConfig(80, 1, 0.2, 0, 0, 5.3, 10e9)
    (run,) = dispersive_link(inp, link, 2**13, [1], RandomStream(12))
    r = mi_3h(run.x, run.y, 4)
    assert r.value == pytest.approx(awgn_capacity(run.snr_reference), abs=0.15)


def test_dispersive_power_adds_noise():
    p = dbm_to_watt(-30)
    inp = InputDistribution("cscg", p)
    link = LinkConfig(80, 3, 0.2, 16, 0, 5.3, 10e9)
    (run,) = dispersive_link(inp, link, 2**14, [1], RandomStream(13))
    y = run.y.to_complex()[:, 0]
    x = run.x.to_complex()[:, 0]
    expect = np.mean(np.abs(x) ** 2) + 3 * link.ase_variance
    assert np.mean(np.abs(y) ** 2) == pytest.approx(expect, rel=0.03)


def test_dispersive_block_dims():
    inp = InputDistribution("cscg", 1e-3)
    link = LinkConfig(80, 1, 0.2, 16, 0, 5.3, 10e9)
    runs = dispersive_link(inp, link, 500, [1, 3, 21], RandomStream(14))
    assert [r.y.d for r in runs] == [2, 6, 42]
    assert [r.x.n for r in runs] == [500, 498, 480]


def realistic(n_spans=3, gamma=1.3):
    return LinkConfig(120, n_spans, 0.2, 16, gamma, 5.5, 14e9, dispersion_compensation=True)


def test_realistic_noiseless_inverts():
    inp = InputDistribution("qam", dbm_to_watt(2), 64)
    run = realistic_link(inp, realistic(), 1024, RandomStream(15), noise=False)
    x, y = run.x.to_complex()[:, 0], run.y.to_complex()[:, 0]
    assert np.linalg.norm(y - x) / np.linalg.norm(x) < 1e-9


def test_realistic_linear_fbg_is_exact():
    inp = InputDistribution("qam", dbm_to_watt(0), 64)
    run = realistic_link(inp, realistic(gamma=0.0), 1024, RandomStream(16), noise=False)
    np.testing.assert_allclose(run.y.data, run.x.data, atol=1e-12 * np.abs(run.x.data).max())


def test_realistic_requires_fbg():
    link = LinkConfig(120, 2, 0.2, 16, 1.3, 5.5, 14e9)
    with pytest.raises(ValueError):
        realistic_link(InputDistribution("qam", 1e-3, 64), link, 64, RandomStream(0))


def test_channel_runs_are_deterministic():
    inp = InputDistribution("cscg", 1e-3)
    a = zero_dispersion_link(inp, realistic(2).replace(dispersion_compensation=False), 100, RandomStream(5, 3))
    b = zero_dispersion_link(inp, realistic(2).replace(dispersion_compensation=False), 100, RandomStream(5, 3))
    np.testing.assert_array_equal(a.y.data, b.y.data)
