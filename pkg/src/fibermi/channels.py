"""Channel scenarios producing (input, output) sample pairs for the estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from fibermi import dsp
from fibermi.dsp import LinkConfig
from fibermi.numerics import RandomStream, SampleSet

INPUT_KINDS = ("cscg", "half-gaussian", "qam")


def qam_constellation(order: int, power: float = 1.0) -> np.ndarray:
    """Square QAM points, row-major over (imag, real) levels, mean power ``power``."""
    side = int(round(math.sqrt(order)))
    if side * side != order or side < 2:
        raise ValueError(f"square QAM order expected, got {order}")
    levels = np.arange(-(side - 1), side, 2, dtype=float)
    pts = (levels[None, :] + 1j * levels[::-1, None]).ravel()
    return pts * math.sqrt(power / np.mean(np.abs(pts) ** 2))


@dataclass(frozen=True)
class InputDistribution:
    kind: str = "cscg"
    power: float = 1.0  # W (or normalized units)
    order: int | None = None

    def __post_init__(self):
        if self.kind not in INPUT_KINDS:
            raise ValueError(f"unknown input kind {self.kind!r}; expected one of {INPUT_KINDS}")
        if not self.power > 0:
            raise ValueError("input power must be > 0")
        if self.kind == "qam":
            qam_constellation(self.order or 0)

    @property
    def discrete(self) -> bool:
        return self.kind == "qam"

    @property
    def label(self) -> str:
        return f"{self.order}qam" if self.kind == "qam" else self.kind

    def with_power(self, power: float) -> "InputDistribution":
        return InputDistribution(self.kind, power, self.order)

    def constellation(self) -> np.ndarray:
        if not self.discrete:
            raise ValueError("continuous input has no constellation")
        return qam_constellation(self.order, self.power)

    def generate(self, stream: RandomStream, n) -> tuple[np.ndarray, np.ndarray | None]:
        """``n`` symbols (int or shape) and, for QAM, their constellation indices."""
        shape = tuple(np.atleast_1d(n))
        if self.kind == "cscg":
            return stream.complex_normal(shape, self.power), None
        if self.kind == "half-gaussian":
            amp = math.sqrt(self.power) * np.abs(stream.normal(shape))
            phase = 2 * np.pi * stream.uniform(shape)
            return amp * np.exp(1j * phase), None
        const = self.constellation()
        labels = stream.integers(len(const), shape)
        return const[labels], labels


@dataclass
class ChannelRun:
    x: SampleSet
    y: SampleSet
    snr_reference: float
    power_dbm: float = float("nan")
    labels: np.ndarray | None = None
    constellation: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.x.n != self.y.n:
            raise ValueError("x and y must hold the same number of samples")
        if not self.snr_reference > 0:
            raise ValueError("snr_reference must be > 0")


def _power_dbm(power_w: float) -> float:
    return 10 * math.log10(power_w / 1e-3)


def awgn_channel(inp: InputDistribution, snr: float, n: int, stream: RandomStream) -> ChannelRun:
    """y = x + noise with complex noise variance P / snr (snr = inf: noiseless)."""
    if not snr > 0:
        raise ValueError("snr must be > 0")
    x, labels = inp.generate(stream, n)
    y = x.copy()
    if math.isfinite(snr):
        y = y + stream.complex_normal(n, inp.power / snr)
    return ChannelRun(SampleSet.from_complex(x), SampleSet.from_complex(y), snr,
                      labels=labels, constellation=inp.constellation() if inp.discrete else None)


def rotation_matrix(alpha: float) -> np.ndarray:
    c, s = math.cos(alpha), math.sin(alpha)
    return np.array([[c, s], [-s, c]])


def mimo2x2_channel(inp: InputDistribution, snr: float, alpha: float, n: int,
                    stream: RandomStream) -> ChannelRun:
    """y = H(alpha) x + n for two complex input streams; H is a rotation."""
    if not 0 <= alpha <= math.pi + 1e-12:
        raise ValueError("alpha must lie in [0, pi]")
    if not snr > 0:
        raise ValueError("snr must be > 0")
    x, _ = inp.generate(stream, (n, 2))
    y = x @ rotation_matrix(alpha).T
    if math.isfinite(snr):
        y = y + stream.complex_normal((n, 2), inp.power / snr)
    return ChannelRun(SampleSet.from_complex(x), SampleSet.from_complex(y), snr,
                      meta={"alpha": alpha})


def zero_dispersion_link(inp: InputDistribution, link: LinkConfig, n: int,
                         stream: RandomStream) -> ChannelRun:
    """Memoryless per-symbol model of a dispersionless amplified link.

    Each span applies loss and the exact Kerr rotation exp(j gamma L_eff |u|^2);
    each amplifier restores the power and adds circular Gaussian ASE.
    """
    if link.span_count < 1:
        raise ValueError("at least one span is required")
    x, labels = inp.generate(stream, n)
    sigma2 = link.ase_variance
    phase = link.gamma_w_km * link.effective_length_km
    u = x.copy()
    for _ in range(link.span_count):
        # launch-power Kerr rotation; the span loss is undone by the amplifier
        u = u * np.exp(1j * phase * np.abs(u) ** 2)
        u = u + stream.complex_normal(n, sigma2)
    return ChannelRun(SampleSet.from_complex(x), SampleSet.from_complex(u),
                      link.snr_reference(inp.power), _power_dbm(inp.power), labels=labels,
                      constellation=inp.constellation() if inp.discrete else None)


def block_outputs(x: np.ndarray, y: np.ndarray, block: int):
    """Pair x[m] with y[m-h .. m+h], dropping h = block // 2 symbols at each edge."""
    if block < 1 or block % 2 == 0:
        raise ValueError("block sizes must be odd and positive")
    h = block // 2
    n = len(x)
    if n <= 2 * h:
        raise ValueError("too few symbols for the block size")
    idx = np.arange(h, n - h)
    yb = np.stack([y[idx + o] for o in range(-h, h + 1)], axis=1)
    return x[idx], yb


def dispersive_link(inp: InputDistribution, link: LinkConfig, n: int, block_sizes,
                    stream: RandomStream, oversampling: int = 4, rolloff: float = 0.2) -> list:
    """Linear dispersive link at waveform level; one run per output block size.

    The nonlinear coefficient is ignored. Zero spans gives the back-to-back
    (noiseless) system.
    """
    block_sizes = list(block_sizes)
    dsp.validate_oversampling(oversampling, rolloff)
    x, labels = inp.generate(stream, n)
    w = dsp.shape_pulse(x, link.symbol_rate, rolloff, oversampling)
    sigma2 = link.ase_variance * oversampling
    for _ in range(link.span_count):
        w = dsp.chromatic_dispersion(w, link.span_length_km, link.dispersion_ps_nm_km,
                                     link.wavelength_nm)
        w.samples += stream.complex_normal(len(w.samples), sigma2)
    y = dsp.matched_filter_sample(w, link.symbol_rate, rolloff, n)
    snr = link.snr_reference(inp.power) if link.span_count else math.inf
    runs = []
    for b in block_sizes:
        xb, yb = block_outputs(x, y, b)
        lb = None if labels is None else labels[b // 2: n - b // 2]
        runs.append(ChannelRun(SampleSet.from_complex(xb), SampleSet.from_complex(yb),
                               snr if math.isfinite(snr) else 1e300, _power_dbm(inp.power),
                               labels=lb, meta={"block": b, "spans": link.span_count}))
    return runs


def realistic_link(inp: InputDistribution, link: LinkConfig, n: int, stream: RandomStream,
                   oversampling: int = 8, rolloff: float = 0.2, step_km: float = 0.1,
                   dbp_step_km: float | None = None, noise: bool = True) -> ChannelRun:
    """Dispersion-managed nonlinear link with digital backpropagation at the receiver."""
    if not link.dispersion_compensation:
        raise ValueError("the realistic link expects per-span dispersion compensation")
    x, labels = inp.generate(stream, n)
    w = dsp.shape_pulse(x, link.symbol_rate, rolloff, oversampling)
    w = dsp.ssfm_propagate(w, link, "forward", noise=noise, step_km=step_km, stream=stream)
    w = dsp.ssfm_propagate(w, link, "backward", step_km=dbp_step_km or step_km)
    y = dsp.matched_filter_sample(w, link.symbol_rate, rolloff, n)
    return ChannelRun(SampleSet.from_complex(x), SampleSet.from_complex(y),
                      link.snr_reference(inp.power), _power_dbm(inp.power), labels=labels,
                      constellation=inp.constellation() if inp.discrete else None)
