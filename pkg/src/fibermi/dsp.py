"""Waveform DSP: root-raised-cosine shaping, chromatic dispersion, split-step
nonlinear propagation with lumped amplification, and digital backpropagation.

Field samples are in sqrt(W); spectra use numpy's FFT convention and angular
baseband frequency. The linear operator is exp(+j beta2/2 w^2 z), the Kerr
operator exp(+j gamma |u|^2 z_eff).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from fibermi.numerics import RandomStream, db_to_lin

try:
    from fibermi.index import _kernels as _kern
except ImportError:  # pragma: no cover
    _kern = None
from fibermi import _fallback

PLANCK = 6.62607015e-34
LIGHT_SPEED = 299792458.0


@dataclass(frozen=True)
class LinkConfig:
    span_length_km: float
    span_count: int
    attenuation_db_km: float = 0.2
    dispersion_ps_nm_km: float = 0.0
    gamma_w_km: float = 0.0
    noise_figure_db: float = 5.0
    symbol_rate: float = 10e9
    wavelength_nm: float = 1550.0
    dispersion_compensation: bool = False

    def __post_init__(self):
        if self.span_length_km <= 0 or self.span_count < 0 or self.symbol_rate <= 0:
            raise ValueError("span length and symbol rate must be > 0, span count >= 0")
        if self.attenuation_db_km < 0:
            raise ValueError("attenuation must be >= 0")
        if self.noise_figure_db <= 0:
            raise ValueError("noise figure must be > 0 dB")
        if self.wavelength_nm <= 0:
            raise ValueError("wavelength must be > 0")

    @property
    def alpha_np(self) -> float:
        """Power attenuation coefficient in 1/km."""
        return self.attenuation_db_km * math.log(10) / 10

    @property
    def span_gain(self) -> float:
        return 10 ** (self.attenuation_db_km * self.span_length_km / 10)

    @property
    def effective_length_km(self) -> float:
        a = self.alpha_np
        if a == 0:
            return self.span_length_km
        return (1 - math.exp(-a * self.span_length_km)) / a

    @property
    def beta2(self) -> float:
        """Group-velocity dispersion in s^2/km."""
        return beta2_from_dispersion(self.dispersion_ps_nm_km, self.wavelength_nm)

    @property
    def photon_energy(self) -> float:
        return PLANCK * LIGHT_SPEED / (self.wavelength_nm * 1e-9)

    @property
    def ase_variance(self) -> float:
        """ASE power per amplifier in the symbol-rate bandwidth, single polarization (W)."""
        return (self.span_gain - 1) * self.photon_energy * db_to_lin(self.noise_figure_db) * self.symbol_rate

    def snr_reference(self, power_w: float) -> float:
        return power_w / (max(self.span_count, 1) * self.ase_variance)

    def with_spans(self, count: int) -> "LinkConfig":
        return LinkConfig(**{**self.__dict__, "span_count": int(count)})

    def replace(self, **kw) -> "LinkConfig":
        return LinkConfig(**{**self.__dict__, **kw})


def beta2_from_dispersion(d_ps_nm_km: float, wavelength_nm: float = 1550.0) -> float:
    lam = wavelength_nm * 1e-9
    return -(d_ps_nm_km * 1e-3) * lam**2 / (2 * math.pi * LIGHT_SPEED)


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate: float
    oversampling: int
    n_symbols: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        n = len(self.samples)
        if n & (n - 1):
            raise ValueError("waveform length must be a power of two")

    @property
    def symbol_rate(self) -> float:
        return self.sample_rate / self.oversampling

    def energy(self) -> float:
        """Energy in units of symbol periods (sum |u|^2 / oversampling)."""
        return float(np.sum(np.abs(self.samples) ** 2)) / self.oversampling

    def copy(self) -> "Waveform":
        return Waveform(self.samples.copy(), self.sample_rate, self.oversampling, self.n_symbols, dict(self.meta))

    def angular_frequencies(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(len(self.samples), d=1.0 / self.sample_rate)


def validate_oversampling(oversampling: int, rolloff: float):
    if oversampling < 4 or oversampling & (oversampling - 1):
        raise ValueError(f"oversampling must be a power of two >= 4, got {oversampling}")
    if not 0 <= rolloff <= 1:
        raise ValueError("rolloff must be in [0, 1]")
    if (1 + rolloff) / 2 >= oversampling / 2:
        raise ValueError("oversampling too small for the signal bandwidth")


def rrc_spectrum(freq: np.ndarray, symbol_rate: float, rolloff: float) -> np.ndarray:
    """Square root of the raised-cosine spectrum, peak 1."""
    f = np.abs(freq) / symbol_rate
    lo, hi = (1 - rolloff) / 2, (1 + rolloff) / 2
    rc = np.zeros_like(f)
    rc[f <= lo] = 1.0
    if rolloff > 0:
        band = (f > lo) & (f < hi)
        rc[band] = 0.5 * (1 + np.cos(np.pi / rolloff * (f[band] - lo)))
    return np.sqrt(rc)


def _fft_length(n_symbols: int, oversampling: int) -> int:
    n = n_symbols * oversampling
    return 1 << (n - 1).bit_length()


def shape_pulse(symbols, symbol_rate: float, rolloff: float, oversampling: int,
                stream: RandomStream | None = None) -> Waveform:
    """Linear modulation with an RRC pulse, filtered in the frequency domain.

    The pulse has energy of one symbol period, so the waveform's mean power
    equals the mean symbol power.
    """
    validate_oversampling(oversampling, rolloff)
    symbols = np.asarray(symbols, dtype=np.complex128).ravel()
    nfft = _fft_length(len(symbols), oversampling)
    up = np.zeros(nfft, dtype=np.complex128)
    up[: len(symbols) * oversampling: oversampling] = symbols
    fs = oversampling * symbol_rate
    h = oversampling * rrc_spectrum(np.fft.fftfreq(nfft, d=1.0 / fs), symbol_rate, rolloff)
    u = np.fft.ifft(np.fft.fft(up) * h)
    return Waveform(u, fs, oversampling, len(symbols), {"rolloff": rolloff})


def matched_filter_sample(w: Waveform, symbol_rate: float, rolloff: float,
                          n_symbols: int | None = None) -> np.ndarray:
    """RRC matched filter followed by sampling at the symbol instants."""
    os_ = w.oversampling
    if not math.isclose(w.sample_rate / os_, symbol_rate, rel_tol=1e-12):
        raise ValueError("symbol rate does not match the waveform")
    n_symbols = n_symbols or w.n_symbols
    nfft = len(w.samples)
    h = rrc_spectrum(np.fft.fftfreq(nfft, d=1.0 / w.sample_rate), symbol_rate, rolloff)
    r = np.fft.ifft(np.fft.fft(w.samples) * h)
    return r[: n_symbols * os_: os_]


def _dispersion_phase(omega, beta2, length_km):
    return 0.5 * beta2 * omega**2 * length_km


def chromatic_dispersion(w: Waveform, length_km: float, dispersion_ps_nm_km: float,
                         wavelength_nm: float = 1550.0, direction: str = "forward") -> Waveform:
    """All-pass dispersion filter; ``direction="inverse"`` is its exact conjugate."""
    if direction not in ("forward", "inverse"):
        raise ValueError(f"direction must be forward or inverse, got {direction!r}")
    beta2 = beta2_from_dispersion(dispersion_ps_nm_km, wavelength_nm)
    phase = _dispersion_phase(w.angular_frequencies(), beta2, length_km)
    if direction == "inverse":
        phase = -phase
    out = w.copy()
    out.samples = np.fft.ifft(np.fft.fft(w.samples) * np.exp(1j * phase))
    return out


def _kerr(u: np.ndarray, coef: float):
    if coef == 0:
        return
    if _kern is not None:
        _kern.kerr_phase(u, coef)
    else:
        _fallback.kerr_phase(u, coef)


def _span_steps(span_km: float, step_km: float) -> int:
    if step_km <= 0:
        raise ValueError("step must be positive")
    if step_km > span_km * (1 + 1e-12):
        raise ValueError(f"step {step_km} km is larger than the span ({span_km} km)")
    return max(1, int(round(span_km / step_km)))


def _ssfm_span(u: np.ndarray, omega: np.ndarray, link: LinkConfig, step_km: float,
               sign: int) -> np.ndarray:
    """Symmetric split step over one span; ``sign=-1`` runs the exact inverse."""
    n = _span_steps(link.span_length_km, step_km)
    h = link.span_length_km / n
    a = link.alpha_np
    z_eff = h if a == 0 else 2 * math.sinh(a * h / 2) / a
    gamma = link.gamma_w_km
    lin_phase = _dispersion_phase(omega, link.beta2, h)
    half = np.exp(sign * (1j * 0.5 * lin_phase - 0.25 * a * h))
    full = half * half
    coef = sign * gamma * z_eff
    if gamma == 0:
        return sfft.ifft(sfft.fft(u) * half**(2 * n))
    u = sfft.ifft(sfft.fft(u) * half)
    for step in range(n):
        _kerr(u, coef)
        spec = sfft.fft(u, overwrite_x=True)
        spec *= full if step < n - 1 else half
        u = sfft.ifft(spec, overwrite_x=True)
    return u


def ssfm_propagate(w: Waveform, link: LinkConfig, direction: str = "forward",
                   noise: bool = False, step_km: float = 0.1,
                   stream: RandomStream | None = None) -> Waveform:
    """Multi-span propagation with lumped amplifiers.

    Forward: per span, split-step fiber, ideal grating (if configured), gain
    and optional ASE noise. Backward (digital backpropagation): the exact
    reverse sequence with negated dispersion, Kerr coefficient and loss,
    and no noise.
    """
    if direction not in ("forward", "backward"):
        raise ValueError(f"direction must be forward or backward, got {direction!r}")
    if noise and stream is None:
        raise ValueError("a random stream is needed to add noise")
    _span_steps(link.span_length_km, step_km)
    omega = w.angular_frequencies()
    u = w.samples.copy()
    amp = math.sqrt(link.span_gain)
    comp = None
    if link.dispersion_compensation:
        comp = np.exp(-1j * _dispersion_phase(omega, link.beta2, link.span_length_km))
    sigma2 = link.ase_variance * w.oversampling
    for _ in range(link.span_count):
        if direction == "forward":
            u = _ssfm_span(u, omega, link, step_km, +1)
            if comp is not None:
                u = np.fft.ifft(np.fft.fft(u) * comp)
            u *= amp
            if noise:
                u += stream.complex_normal(len(u), sigma2)
        else:
            u = u / amp
            if comp is not None:
                u = np.fft.ifft(np.fft.fft(u) * np.conj(comp))
            u = _ssfm_span(u, omega, link, step_km, -1)
    out = w.copy()
    out.samples = u
    return out
