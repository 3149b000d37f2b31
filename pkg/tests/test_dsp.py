import math

import numpy as np
import pytest

from fibermi import _fallback, dsp
from fibermi.dsp import (
    LinkConfig,
    Waveform,
    beta2_from_dispersion,
    chromatic_dispersion,
    matched_filter_sample,
    rrc_spectrum,
    shape_pulse,
    ssfm_propagate,
    validate_oversampling,
)
from fibermi.numerics import RandomStream


def symbols(n=4096, seed=0):
    return RandomStream(seed).complex_normal(n)


def test_rrc_is_root_of_nyquist():
    f = np.linspace(-1, 1, 2001) * 1e10
    h2 = rrc_spectrum(f, 1e10, 0.2) ** 2
    # folded raised cosine sums to one across the symbol-rate aliases
    folded = rrc_spectrum(f, 1e10, 0.2) ** 2 + rrc_spectrum(f - 1e10, 1e10, 0.2) ** 2
    inside = np.abs(f) <= 0.5e10
    assert np.allclose(folded[inside & (f >= 0)], 1.0)
    assert h2.max() == 1.0


@pytest.mark.parametrize("os_", [4, 8])
def test_back_to_back(os_):
    x = symbols()
    y = matched_filter_sample(shape_pulse(x, 10e9, 0.2, os_), 10e9, 0.2)
    err_db = 10 * np.log10(np.mean(np.abs(y - x) ** 2) / np.mean(np.abs(x) ** 2))
    assert err_db <= -50


def test_impulse_energy():
    imp = np.zeros(64, complex)
    imp[10] = 1.0
    assert shape_pulse(imp, 10e9, 0.2, 4).energy() == pytest.approx(1.0, abs=1e-10)


def test_out_of_band_spectrum():
    w = shape_pulse(symbols(), 10e9, 0.2, 4)
    spec = np.abs(np.fft.fft(w.samples))
    f = np.fft.fftfreq(len(spec), 1 / w.sample_rate)
    oob = spec[np.abs(f) > 0.6 * 10e9]
    assert 20 * np.log10(oob.max() / spec.max()) <= -60


def test_oversampling_validation():
    for bad in (2, 3, 6):
        with pytest.raises(ValueError):
            validate_oversampling(bad, 0.2)
    with pytest.raises(ValueError):
        shape_pulse(symbols(16), 10e9, 0.2, 2)


def test_waveform_needs_power_of_two():
    with pytest.raises(ValueError):
        Waveform(np.zeros(100), 40e9, 4)


def test_beta2_value():
    # -D lambda^2 / (2 pi c) with the exact speed of light
    oracle = -16e-6 * (1550e-9) ** 2 / (2 * math.pi * 299792458.0)  # s^2/m
    assert beta2_from_dispersion(16) * 1e24 == pytest.approx(oracle * 1e3 * 1e24, rel=1e-12)
    assert beta2_from_dispersion(16) * 1e24 == pytest.approx(-20.39, abs=0.03)


def test_dispersion_round_trip_and_all_pass():
    w = shape_pulse(symbols(), 10e9, 0.2, 4)
    f = chromatic_dispersion(w, 1000, 16)
    b = chromatic_dispersion(f, 1000, 16, direction="inverse")
    assert np.max(np.abs(b.samples - w.samples)) / np.max(np.abs(w.samples)) <= 1e-12
    assert abs(f.energy() - w.energy()) / w.energy() <= 1e-12
    assert np.max(np.abs(f.samples - w.samples)) > 0.1 * np.max(np.abs(w.samples))
    with pytest.raises(ValueError):
        chromatic_dispersion(w, 1, 16, direction="sideways")


def test_ssfm_linear_limit():
    link = LinkConfig(120, 3, 0.2, 16, 0.0, 5.5, 14e9)
    w = shape_pulse(symbols(2048), 14e9, 0.2, 8)
    ref = chromatic_dispersion(w, 360, 16)
    for step in (0.1, 7.5, 120):
        out = ssfm_propagate(w, link, step_km=step)
        assert np.linalg.norm(out.samples - ref.samples) / np.linalg.norm(ref.samples) <= 1e-12


def test_ssfm_zero_dispersion_limit():
    link = LinkConfig(100, 2, 0.2, 0.0, 1.27, 5.0, 50e9)
    w = shape_pulse(symbols(1024) * 0.1, 50e9, 0.2, 4)
    out = ssfm_propagate(w, link, step_km=0.1)
    u = w.samples
    expect = u * np.exp(1j * 2 * 1.27 * link.effective_length_km * np.abs(u) ** 2)
    assert np.max(np.abs(out.samples - expect)) <= 1e-9 * np.max(np.abs(u))


def test_ssfm_backward_inverts_forward():
    link = LinkConfig(120, 3, 0.2, 16, 1.3, 5.5, 14e9, dispersion_compensation=True)
    w = shape_pulse(symbols(2048) * math.sqrt(3e-3), 14e9, 0.2, 8)
    fwd = ssfm_propagate(w, link, step_km=0.1)
    back = ssfm_propagate(fwd, link, "backward", step_km=0.1)
    assert np.linalg.norm(back.samples - w.samples) / np.linalg.norm(w.samples) <= 1e-6


def test_ssfm_nonlinearity_matters():
    link = LinkConfig(120, 3, 0.2, 16, 1.3, 5.5, 14e9, dispersion_compensation=True)
    w = shape_pulse(symbols(2048) * math.sqrt(1e-2), 14e9, 0.2, 8)
    lin = ssfm_propagate(w, link.replace(gamma_w_km=0.0))
    nl = ssfm_propagate(w, link)
    assert np.linalg.norm(nl.samples - lin.samples) > 1e-2 * np.linalg.norm(lin.samples)


def test_ssfm_step_validation():
    link = LinkConfig(100, 1)
    w = shape_pulse(symbols(64), 10e9, 0.2, 4)
    with pytest.raises(ValueError):
        ssfm_propagate(w, link, step_km=150)
    with pytest.raises(ValueError):
        ssfm_propagate(w, link, step_km=0)
    with pytest.raises(ValueError):
        ssfm_propagate(w, link, noise=True)


def test_ssfm_noise_power():
    link = LinkConfig(100, 4, 0.2, 16, 0.0, 5.0, 10e9)
    w = shape_pulse(np.zeros(4096, complex), 10e9, 0.2, 4)
    out = ssfm_propagate(w, link, noise=True, stream=RandomStream(3))
    y = matched_filter_sample(out, 10e9, 0.2)
    assert np.mean(np.abs(y) ** 2) == pytest.approx(4 * link.ase_variance, rel=0.05)


def test_link_config_values():
    link = LinkConfig(100, 12, 0.2, 0, 1.27, 6.0, 50e9)
    assert link.span_gain == pytest.approx(100.0)
    h_nu = 6.62607015e-34 * 299792458.0 / 1550e-9
    assert link.ase_variance == pytest.approx(99 * h_nu * 10**0.6 * 50e9, rel=1e-12)
    with pytest.raises(ValueError):
        LinkConfig(0, 1)
    with pytest.raises(ValueError):
        LinkConfig(100, 1, noise_figure_db=0)


def test_kerr_backends_agree():
    u = symbols(1000)
    a, b = u.copy(), u.copy()
    _fallback.kerr_phase(a, 0.3)
    if dsp._kern is None:
        pytest.skip("compiled kernels not built")
    dsp._kern.kerr_phase(b, 0.3)
    np.testing.assert_allclose(a, b, rtol=1e-14, atol=1e-15)
