"""Sample containers, metrics, special functions and reference capacity curves.

Entropy arithmetic inside the package is in nats; conversion to bits happens
where results are reported (``NATS_TO_BITS``).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

LN2 = math.log(2.0)
NATS_TO_BITS = 1.0 / LN2


class Metric(enum.Enum):
    MAXNORM = "max-norm"
    EUCLIDEAN = "euclidean"

    @property
    def code(self) -> int:
        return 0 if self is Metric.MAXNORM else 1

    @classmethod
    def parse(cls, value) -> "Metric":
        if isinstance(value, cls):
            return value
        aliases = {"max-norm": cls.MAXNORM, "maxnorm": cls.MAXNORM, "chebyshev": cls.MAXNORM,
                   "max": cls.MAXNORM, "euclidean": cls.EUCLIDEAN, "l2": cls.EUCLIDEAN}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown metric {value!r}") from None

    def dist(self, a, b) -> float:
        diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
        if self is Metric.MAXNORM:
            return float(np.max(np.abs(diff)))
        s = 0.0
        for t in np.atleast_1d(diff):
            s = s + t * t
        return math.sqrt(s)


@dataclass(frozen=True, eq=False)
class SampleSet:
    """N realizations of a d-dimensional real random vector.

    Complex columns are stored as adjacent (re, im) pairs; see
    :meth:`from_complex`.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, order="C", copy=True)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2:
            raise ValueError(f"sample data must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"sample set needs N >= 1 and d >= 1, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("sample set contains NaN or Inf")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    def __len__(self):
        return self.n

    @classmethod
    def from_complex(cls, z) -> "SampleSet":
        z = np.asarray(z, dtype=np.complex128)
        if z.ndim == 1:
            z = z[:, None]
        out = np.empty((z.shape[0], 2 * z.shape[1]))
        out[:, 0::2] = z.real
        out[:, 1::2] = z.imag
        return cls(out)

    def to_complex(self) -> np.ndarray:
        if self.d % 2:
            raise ValueError("odd real dimension cannot be read as complex pairs")
        return self.data[:, 0::2] + 1j * self.data[:, 1::2]

    @classmethod
    def hstack(cls, *sets: "SampleSet") -> "SampleSet":
        ns = {s.n for s in sets}
        if len(ns) != 1:
            raise ValueError(f"cannot join sample sets of different sizes {sorted(ns)}")
        return cls(np.hstack([s.data for s in sets]))

    def take(self, idx) -> "SampleSet":
        return SampleSet(self.data[idx])

    def columns(self, cols) -> "SampleSet":
        return SampleSet(self.data[:, cols])


@dataclass
class RandomStream:
    """Seeded generator; distinct ``stream_id`` values give independent streams.

    Gaussian variates come from numpy's PCG64 bit generator and its ziggurat
    normal sampler, so outputs are stable for a fixed numpy major version.
    """

    seed: int
    stream_id: int = 0
    _gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        seq = np.random.SeedSequence(int(self.seed) & (2**64 - 1), spawn_key=(int(self.stream_id),))
        self._gen = np.random.Generator(np.random.PCG64(seq))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def child(self, sub_id: int) -> "RandomStream":
        # Stream ids of children are a deterministic function of the parent's.
        return RandomStream(self.seed, self.stream_id * 1_000_003 + int(sub_id) + 1)

    def normal(self, size) -> np.ndarray:
        return self._gen.standard_normal(size)

    def uniform(self, size) -> np.ndarray:
        return self._gen.random(size)

    def integers(self, high, size) -> np.ndarray:
        return self._gen.integers(0, high, size)

    def complex_normal(self, size, variance=1.0) -> np.ndarray:
        """Circularly symmetric complex Gaussian with E|z|^2 = variance."""
        s = math.sqrt(variance / 2.0)
        z = self._gen.standard_normal((2,) + tuple(np.atleast_1d(size)))
        return s * (z[0] + 1j * z[1])


def digamma(x):
    """Digamma function in natural-log units; raises for x <= 0."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0):
        raise ValueError("digamma is only defined here for x > 0")
    out = special.digamma(arr)
    return float(out) if out.ndim == 0 else out


def log_unit_ball_volume(d: int, metric=Metric.MAXNORM, convention: str = "radius") -> float:
    """log2 of the volume of the d-dimensional unit ball.

    ``convention="radius"`` is the ball of radius 1, ``"diameter"`` the ball of
    diameter 1 (so the max-norm ball is the unit cube with volume 1).
    """
    if int(d) != d or d < 1:
        raise ValueError(f"dimension must be a positive integer, got {d}")
    metric = Metric.parse(metric)
    if convention not in ("radius", "diameter"):
        raise ValueError(f"unknown convention {convention!r}")
    if metric is Metric.MAXNORM:
        # the cube of side 2 (radius) or side 1 (diameter), exact in log2
        return float(d) if convention == "radius" else 0.0
    log2_v = (0.5 * d * math.log(math.pi) - math.lgamma(0.5 * d + 1.0)) / LN2
    return log2_v - d if convention == "diameter" else log2_v


def awgn_capacity(snr):
    """log2(1 + snr) in bits."""
    arr = np.asarray(snr, dtype=float)
    if np.any(arr < 0):
        raise ValueError("snr must be non-negative")
    out = np.log2(1.0 + arr)
    return float(out) if out.ndim == 0 else out


def half_gaussian_bound(snr):
    """High-power capacity lower bound max(0, log2(snr)/2 - 1/2) in bits."""
    arr = np.asarray(snr, dtype=float)
    if np.any(arr <= 0):
        raise ValueError("snr must be positive")
    out = np.maximum(0.0, 0.5 * np.log2(arr) - 0.5)
    return float(out) if out.ndim == 0 else out


def sample_gaussian(stream: RandomStream, n: int, d: int, mean=0.0, scale=1.0) -> SampleSet:
    """``n`` i.i.d. Gaussian vectors with per-dimension mean and standard deviation."""
    if n < 1 or d < 1:
        raise ValueError("n and d must be >= 1")
    scale = np.broadcast_to(np.asarray(scale, dtype=float), (d,))
    if np.any(scale <= 0):
        raise ValueError("scales must be positive")
    mean = np.broadcast_to(np.asarray(mean, dtype=float), (d,))
    return SampleSet(mean + scale * stream.normal((n, d)))


def db_to_lin(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def lin_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


def dbm_to_watt(p_dbm):
    return 1e-3 * db_to_lin(p_dbm)
