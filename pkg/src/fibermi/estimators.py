"""Mutual-information and entropy estimators.

kNN estimators (Kozachenko-Leonenko entropy and its three-entropy MI, the
Kraskov count estimator, the local-Gaussian entropy) and the Gaussian
auxiliary-channel lower bound. Every estimator is an average of per-sample
terms; the reported standard error is a delete-one-block jackknife over
those terms (10 contiguous blocks) with the neighbor structure held fixed.

Values are computed in nats and returned in bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp
from scipy.stats import qmc

from fibermi.index import NeighborIndex
from fibermi.numerics import LN2, Metric, SampleSet, digamma, log_unit_ball_volume

METHODS = ("kozachenko-3h", "kraskov", "local-gaussian", "glb")
JACKKNIFE_BLOCKS = 10


class DegenerateSampleError(ValueError):
    pass


@dataclass
class EstimateResult:
    value: float  # bits
    method: str
    n_used: int
    stderr: float = float("nan")  # bits
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"{self.method}: non-finite estimate")


def jackknife(terms, combine=None, n_blocks: int = JACKKNIFE_BLOCKS):
    """Value and delete-one-block jackknife error of ``combine(means)``.

    ``terms`` is a list of equal-length per-sample arrays (NaN marks a dropped
    sample). ``combine`` maps the list of means to the estimate; default sum.
    """
    terms = [np.asarray(t, dtype=float) for t in terms]
    combine = combine or (lambda means: float(sum(means)))
    n = len(terms[0])
    value = combine([np.nanmean(t) for t in terms])
    if n < n_blocks:
        return value, float("nan")
    blocks = np.array_split(np.arange(n), n_blocks)
    sums = [np.nansum(t) for t in terms]
    counts = [np.count_nonzero(~np.isnan(t)) for t in terms]
    pseudo = []
    for b in blocks:
        means = []
        for t, s, c in zip(terms, sums, counts):
            tb = t[b]
            cb = c - np.count_nonzero(~np.isnan(tb))
            means.append((s - np.nansum(tb)) / cb if cb else np.nan)
        pseudo.append(combine(means))
    pseudo = np.asarray(pseudo)
    se = math.sqrt((n_blocks - 1) / n_blocks * float(np.sum((pseudo - pseudo.mean()) ** 2)))
    return value, se


def _as_samples(x) -> SampleSet:
    return x if isinstance(x, SampleSet) else SampleSet(x)


def _check_pair(x: SampleSet, y: SampleSet):
    if x.n != y.n:
        raise ValueError(f"x and y must hold the same number of samples ({x.n} != {y.n})")


def _check_k(k, n):
    if not 1 <= k <= n - 1:
        raise ValueError(f"k={k} must satisfy 1 <= k <= N-1 = {n - 1}")


# ------------------------------------------------------------------ Kozachenko

def kl_terms(x: SampleSet, k: int, metric=Metric.MAXNORM, convention: str = "diameter",
             index: NeighborIndex | None = None):
    """Per-sample Kozachenko-Leonenko terms (nats); NaN where the k-th distance is 0."""
    x = _as_samples(x)
    metric = Metric.parse(metric)
    _check_k(k, x.n)
    index = index or NeighborIndex(x, metric)
    dist = index.kth_distances(k)
    if convention == "diameter":
        eps = 2.0 * dist
    elif convention == "radius":
        eps = dist
    else:
        raise ValueError(f"unknown convention {convention!r}")
    const = digamma(x.n) - digamma(k) + LN2 * log_unit_ball_volume(x.d, metric, convention)
    with np.errstate(divide="ignore"):
        log_eps = np.log(eps)
    terms = const + x.d * log_eps
    terms[dist == 0] = np.nan
    return terms


def _count_dropped(terms):
    return int(np.count_nonzero(np.isnan(terms)))


def kl_entropy(x, k: int = 4, metric=Metric.MAXNORM, convention: str = "diameter") -> EstimateResult:
    """Kozachenko-Leonenko differential entropy estimate in bits.

    The k-th neighbor "size" is the box side (twice the max-norm distance)
    with a unit-cube volume constant under the default diameter convention;
    ``convention="radius"`` uses the plain distance and the radius-1 ball.
    Both give the same number.
    """
    x = _as_samples(x)
    terms = kl_terms(x, k, metric, convention)
    dropped = _count_dropped(terms)
    if dropped == x.n:
        raise DegenerateSampleError("degenerate sample set: every k-th neighbor distance is zero")
    value, se = jackknife([terms])
    return EstimateResult(value / LN2, "kozachenko", x.n - dropped, se / LN2,
                          {"zero_distance": dropped})


def mi_3h(x, y, k: int = 4, metric=Metric.MAXNORM) -> EstimateResult:
    """I(X;Y) = H(X) + H(Y) - H(X,Y), all three entropies with the same k."""
    x, y = _as_samples(x), _as_samples(y)
    _check_pair(x, y)
    tx = kl_terms(x, k, metric)
    ty = kl_terms(y, k, metric)
    txy = kl_terms(SampleSet.hstack(x, y), k, metric)
    for t in (tx, ty, txy):
        if _count_dropped(t) == x.n:
            raise DegenerateSampleError("degenerate sample set: every k-th neighbor distance is zero")
    value, se = jackknife([tx, ty, -txy])
    dropped = {"zero_distance_x": _count_dropped(tx), "zero_distance_y": _count_dropped(ty),
               "zero_distance_xy": _count_dropped(txy)}
    n_used = x.n - max(dropped.values())
    return EstimateResult(value / LN2, "kozachenko-3h", n_used, se / LN2, dropped)


def mi_discrete_kl(labels, y, k: int = 4, metric=Metric.MAXNORM) -> EstimateResult:
    """MI for a discrete input: H(Y) - sum_s p(s) H(Y | X=s), kNN entropies.

    ``labels`` gives the input symbol index of each sample; each conditional
    output cloud gets its own neighbor index. Clouds with k or fewer samples
    are skipped (counted in diagnostics).
    """
    y = _as_samples(y)
    labels = np.asarray(labels)
    if labels.shape != (y.n,):
        raise ValueError("labels must give one symbol index per sample")
    ty = kl_terms(y, k, metric)
    tc = np.full(y.n, np.nan)
    skipped = 0
    for s in np.unique(labels):
        sel = np.flatnonzero(labels == s)
        if len(sel) <= k:
            skipped += len(sel)
            continue
        tc[sel] = kl_terms(y.take(sel), k, metric)
    keep = ~np.isnan(tc) & ~np.isnan(ty)
    if not np.any(keep):
        raise DegenerateSampleError("no conditional cloud has enough distinct samples")
    # one mean over samples with both terms, so priors stay the empirical ones
    diff = np.where(keep, ty - tc, np.nan)
    value, se = jackknife([diff])
    diag = {"zero_distance_y": _count_dropped(ty), "dropped_conditional": int(np.count_nonzero(~keep)),
            "small_clouds": skipped, "symbols": int(len(np.unique(labels)))}
    return EstimateResult(value / LN2, "kozachenko-discrete", int(keep.sum()), se / LN2, diag)


# --------------------------------------------------------------------- Kraskov

def mi_kraskov(x, y, k: int = 4, metric=Metric.MAXNORM) -> EstimateResult:
    """Kraskov count estimator.

    For each sample the joint max-norm distance r to its k-th neighbor fixes
    the marginal counts n_x, n_y of points strictly closer than r; the
    estimate is psi(k) + psi(N) - <psi(n_x + 1) + psi(n_y + 1)>.
    """
    metric = Metric.parse(metric)
    if metric is not Metric.MAXNORM:
        raise ValueError("the Kraskov estimator requires the max-norm metric")
    x, y = _as_samples(x), _as_samples(y)
    _check_pair(x, y)
    _check_k(k, x.n)
    joint = NeighborIndex(SampleSet.hstack(x, y), metric)
    r = joint.kth_distances(k)
    nx = NeighborIndex(x, metric).range_counts(r, boundary="strict")
    ny = NeighborIndex(y, metric).range_counts(r, boundary="strict")
    terms = digamma(k) + digamma(x.n) - digamma(nx + 1.0) - digamma(ny + 1.0)
    zero = r == 0
    terms[zero] = np.nan
    if zero.all():
        raise DegenerateSampleError("degenerate sample set: every joint k-th distance is zero")
    value, se = jackknife([terms])
    return EstimateResult(value / LN2, "kraskov", int(x.n - zero.sum()), se / LN2,
                          {"zero_distance": int(zero.sum())})


# -------------------------------------------------------------- local Gaussian

def default_p(n: int) -> int:
    return int(math.floor(0.04 * n))


def sobol_box(d: int, m: int, seed: int = 0) -> np.ndarray:
    """``m`` scrambled Sobol points centred on the unit cube, shape (m, d)."""
    sampler = qmc.Sobol(d, scramble=True, seed=np.random.default_rng(seed))
    if m & (m - 1) == 0:
        u = sampler.random_base2(int(math.log2(m)))
    else:
        u = sampler.random(m)
    return u - 0.5


def local_gaussian_terms(x: SampleSet, k: int, p: int, m: int = 1024,
                         metric=Metric.MAXNORM, ridge_scale: float = 1e-9,
                         seed: int = 0, chunk: int | None = None):
    """Per-sample local-Gaussian entropy terms (nats) and degenerate-covariance count."""
    x = _as_samples(x)
    metric = Metric.parse(metric)
    n, d = x.n, x.d
    _check_k(k, n)
    if not d + 1 <= p <= n - 1:
        raise ValueError(f"p={p} must satisfy d+1 <= p <= N-1 ({d + 1}..{n - 1})")
    index = NeighborIndex(x, metric)
    eps = 2.0 * index.kth_distances(k)
    u = sobol_box(d, m, seed)
    const = digamma(n) - digamma(k)
    terms = np.full(n, np.nan)
    degenerate = 0
    data = x.data
    eye = np.eye(d)
    if chunk is None:
        chunk = max(1, min(256, (1 << 23) // max(1, p * d + m * d)))
    for s in range(0, n, chunk):
        q = np.arange(s, min(n, s + chunk))
        _, nb = index.knn(p, q)
        pts = data[nb]
        mu = pts.mean(axis=1)
        a = pts - mu[:, None, :]
        cov = np.matmul(a.transpose(0, 2, 1), a) / (p - 1)
        tr = np.trace(cov, axis1=1, axis2=2)
        cov += (ridge_scale * tr / d)[:, None, None] * eye
        ev = np.linalg.eigvalsh(cov)
        bad = (ev[:, 0] <= 0) | (ev[:, -1] > 1e12 * np.maximum(ev[:, 0], 1e-300))
        if np.any(bad):
            degenerate += int(bad.sum())
            diag = np.diagonal(cov[bad], axis1=1, axis2=2).copy()
            diag[diag <= 0] = 1.0
            cov[bad] = diag[:, :, None] * eye
        chol = np.linalg.cholesky(cov)
        linv = np.linalg.inv(chol)
        z0 = np.einsum("cij,cj->ci", linv, data[q] - mu)
        q0 = np.einsum("ci,ci->c", z0, z0)
        w = np.matmul(u[None, :, :], linv.transpose(0, 2, 1))
        e = eps[q]
        zm = z0[:, None, :] + e[:, None, None] * w
        qm = np.einsum("cmi,cmi->cm", zm, zm)
        lme = logsumexp(-0.5 * qm, axis=1) - math.log(m)
        with np.errstate(divide="ignore"):
            t = const + 0.5 * q0 + d * np.log(e) + lme
        t[e == 0] = np.nan
        terms[q] = t
    return terms, degenerate


def local_gaussian_entropy(x, k: int = 4, p: int | None = None, m: int = 1024,
                           metric=Metric.MAXNORM, ridge_scale: float = 1e-9,
                           seed: int = 0) -> EstimateResult:
    """Local-Gaussian kNN entropy estimate in bits.

    Around each sample the density is modelled as a Gaussian fitted to its
    ``p`` nearest neighbors; the box integral of that Gaussian over the k-th
    neighbor box is taken by quasi-Monte-Carlo with ``m`` Sobol points.
    """
    x = _as_samples(x)
    p = default_p(x.n) if p is None else int(p)
    terms, degenerate = local_gaussian_terms(x, k, p, m, metric, ridge_scale, seed)
    dropped = _count_dropped(terms)
    if dropped == x.n:
        raise DegenerateSampleError("degenerate sample set: every k-th neighbor distance is zero")
    value, se = jackknife([terms])
    return EstimateResult(value / LN2, "local-gaussian", x.n - dropped, se / LN2,
                          {"zero_distance": dropped, "degenerate_covariance": degenerate})


def mi_local_gaussian(x, y, k: int = 4, p: int | None = None, m: int = 1024,
                      metric=Metric.MAXNORM, ridge_scale: float = 1e-9,
                      seed: int = 0) -> EstimateResult:
    """H(X) + H(Y) - H(X,Y) with local-Gaussian entropies."""
    x, y = _as_samples(x), _as_samples(y)
    _check_pair(x, y)
    p = default_p(x.n) if p is None else int(p)
    parts = [local_gaussian_terms(s, k, p, m, metric, ridge_scale, seed)
             for s in (x, y, SampleSet.hstack(x, y))]
    (tx, dx), (ty, dy), (txy, dxy) = parts
    value, se = jackknife([tx, ty, -txy])
    dropped = max(_count_dropped(t) for t in (tx, ty, txy))
    return EstimateResult(value / LN2, "local-gaussian", x.n - dropped, se / LN2,
                          {"zero_distance": dropped, "degenerate_covariance": dx + dy + dxy})


# -------------------------------------------------- auxiliary-channel bound

@dataclass(frozen=True)
class GaussianAuxChannel:
    """q(y|x) = CN(h x, noise_variance) with a Gaussian or discrete input model."""

    gain: complex
    noise_variance: float
    input_model: str = "gaussian"  # or "discrete"
    input_power: float | None = None
    constellation: np.ndarray | None = None
    priors: np.ndarray | None = None

    def __post_init__(self):
        if self.noise_variance < 0:
            raise ValueError("noise variance must be >= 0")
        if self.input_model == "discrete":
            if self.constellation is None:
                raise ValueError("discrete input model needs a constellation")
            pri = self.priors
            if pri is None:
                pri = np.full(len(self.constellation), 1.0 / len(self.constellation))
                object.__setattr__(self, "priors", pri)
            if not math.isclose(float(np.sum(pri)), 1.0, rel_tol=1e-9):
                raise ValueError("priors must sum to 1")
        elif self.input_model != "gaussian":
            raise ValueError(f"unknown input model {self.input_model!r}")

    @property
    def degenerate(self) -> bool:
        return self.noise_variance == 0


def _complex_scalar(s: SampleSet, name: str) -> np.ndarray:
    if s.d != 2:
        raise ValueError(f"{name} must be a scalar complex channel (2 real dims), got d={s.d}")
    return s.to_complex()[:, 0]


def fit_gaussian_aux(x, y, constellation=None, priors=None) -> GaussianAuxChannel:
    """Least-squares complex gain and residual variance of y against x."""
    x, y = _as_samples(x), _as_samples(y)
    _check_pair(x, y)
    if x.n < 2:
        raise ValueError("need at least 2 samples")
    xc, yc = _complex_scalar(x, "x"), _complex_scalar(y, "y")
    px = float(np.sum(np.abs(xc) ** 2))
    if px == 0:
        raise ValueError("all-zero input")
    h = complex(np.sum(yc * np.conj(xc)) / px)
    sigma2 = float(np.mean(np.abs(yc - h * xc) ** 2))
    if constellation is not None:
        return GaussianAuxChannel(h, sigma2, "discrete", px / x.n,
                                  np.asarray(constellation, dtype=complex), priors)
    return GaussianAuxChannel(h, sigma2, "gaussian", px / x.n)


def glb_terms(xc: np.ndarray, yc: np.ndarray, aux: GaussianAuxChannel) -> np.ndarray:
    """Per-sample log q(y|x)/q(y) in nats."""
    if aux.degenerate:
        raise DegenerateSampleError("auxiliary channel has zero noise variance")
    h, s2 = aux.gain, aux.noise_variance
    lik = -np.abs(yc - h * xc) ** 2 / s2
    if aux.input_model == "gaussian":
        p_in = aux.input_power if aux.input_power is not None else float(np.mean(np.abs(xc) ** 2))
        py = abs(h) ** 2 * p_in + s2
        return np.log(py / s2) + lik + np.abs(yc) ** 2 / py
    const = np.asarray(aux.constellation)
    logp = np.log(np.asarray(aux.priors))
    out = np.empty(len(yc))
    step = max(1, (1 << 20) // len(const))
    for s in range(0, len(yc), step):
        yy = yc[s:s + step, None]
        out[s:s + step] = lik[s:s + step] - logsumexp(logp - np.abs(yy - h * const) ** 2 / s2, axis=1)
    return out


def glb(x, y, aux: GaussianAuxChannel | None = None) -> EstimateResult:
    """Gaussian auxiliary-channel lower bound (1/N) sum log2 q(y|x)/q(y).

    With ``aux=None`` the channel is fitted to the data (Gaussian input model
    with the empirical input power). Multi-stream inputs (equal complex
    width on both sides) are handled per stream and summed.
    """
    x, y = _as_samples(x), _as_samples(y)
    _check_pair(x, y)
    if x.d != y.d or x.d % 2:
        raise ValueError("glb needs equal, even dimensions on both sides")
    xs, ys = x.to_complex(), y.to_complex()
    terms = np.zeros(x.n)
    gains = []
    for j in range(xs.shape[1]):
        a = aux
        if a is None:
            a = fit_gaussian_aux(SampleSet.from_complex(xs[:, j]), SampleSet.from_complex(ys[:, j]))
        gains.append(a.gain)
        terms += glb_terms(xs[:, j], ys[:, j], a)
    value, se = jackknife([terms])
    diag = {"streams": xs.shape[1]}
    if len(gains) == 1:
        diag["gain_abs"] = abs(gains[0])
    return EstimateResult(value / LN2, "glb", x.n, se / LN2, diag)


# ---------------------------------------------------------- configuration

@dataclass
class EstimatorConfig:
    method: str
    k: int = 4
    p: int | None = None
    metric: Metric = Metric.MAXNORM
    integration_samples: int = 1024
    ridge_scale: float = 1e-9
    block: int = 1
    name: str | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown estimator method {self.method!r}; expected one of {METHODS}")
        self.metric = Metric.parse(self.metric)
        if self.method == "kraskov" and self.metric is not Metric.MAXNORM:
            raise ValueError("kraskov requires the max-norm metric")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.block < 1 or self.block % 2 == 0:
            raise ValueError("block must be a positive odd integer")
        if self.integration_samples < 1:
            raise ValueError("integration_samples must be >= 1")

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.method == "glb":
            base = "glb"
        elif self.method == "local-gaussian":
            base = f"local-gaussian(k={self.k},p={self.p if self.p is not None else '0.04N'})"
        else:
            base = f"{self.method}(k={self.k})"
        return base if self.block == 1 else f"{base}[b={self.block}]"

    def resolved_p(self, n: int) -> int:
        return default_p(n) if self.p is None else self.p

    def validate_for(self, n: int, dx: int, dy: int):
        if not self.k <= n - 1:
            raise ValueError(f"k={self.k} too large for N={n}")
        if self.method == "local-gaussian":
            p = self.resolved_p(n)
            if not dx + dy + 1 <= p <= n - 1:
                raise ValueError(f"p={p} must satisfy d+1 <= p <= N-1 for joint d={dx + dy}, N={n}")


def estimate(cfg: EstimatorConfig, x, y, labels=None, constellation=None) -> EstimateResult:
    """Run the configured estimator on (x, y); discrete inputs pass ``labels``."""
    x, y = _as_samples(x), _as_samples(y)
    cfg.validate_for(x.n, x.d, y.d)
    if cfg.method == "glb":
        if constellation is not None:
            aux = fit_gaussian_aux(x, y, constellation=constellation)
            return glb(x, y, aux)
        return glb(x, y)
    if cfg.method == "kozachenko-3h":
        if labels is not None:
            return mi_discrete_kl(labels, y, cfg.k, cfg.metric)
        return mi_3h(x, y, cfg.k, cfg.metric)
    if labels is not None:
        raise ValueError(f"{cfg.method} is not defined for a discrete input")
    if cfg.method == "kraskov":
        return mi_kraskov(x, y, cfg.k)
    return mi_local_gaussian(x, y, cfg.k, cfg.resolved_p(x.n), cfg.integration_samples,
                             cfg.metric, cfg.ridge_scale)
