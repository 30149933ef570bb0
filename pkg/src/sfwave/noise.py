"""Q-Wiener increments and exact stochastic convolutions.

The covariance operators are diagonal in the sine eigenbasis, so every
stochastic integral against the heat semigroup or the wave group is a
Gaussian whose per-mode covariance is known in closed form.  Sampling those
closed forms directly removes all noise-discretisation bias from the time
steppers built on top of this module.

Randomness is addressed, not consumed: an :class:`RngStream` is a value
(seed plus a tuple of coordinates) and two streams with the same coordinates
always produce bit-identical variates, while distinct coordinates give
statistically independent Philox counter streams.  Replica blocks can
therefore be simulated in any order, or in parallel, without coordination.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .spectral import SpectralBasis, WaveState

__all__ = [
    "QWienerSpec",
    "RngStream",
    "sample_increment",
    "heat_convolution_variance",
    "sample_heat_convolution",
    "wave_convolution_covariance",
    "sample_wave_convolution",
    "stationary_ou_variances",
]


@dataclass(frozen=True)
class QWienerSpec:
    """Eigenvalues of a trace-class covariance operator aligned with the
    sine basis (one nonnegative variance rate per mode)."""

    lambdas: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "lambdas", np.asarray(self.lambdas, dtype=float)
        )
        if self.lambdas.ndim != 1 or self.lambdas.size == 0:
            raise ConfigError("covariance spectrum must be a nonempty vector")
        if np.any(self.lambdas < 0) or not np.all(np.isfinite(self.lambdas)):
            raise ConfigError("covariance eigenvalues must be finite and >= 0")

    @property
    def trace(self) -> float:
        return float(np.sum(self.lambdas))

    @classmethod
    def power_law(cls, n: int, c: float = 1.0, p: float = 2.0) -> "QWienerSpec":
        """Spectrum lambda_k = c * k^(-p); requires p > 1 (trace class)."""
        if p <= 1.0:
            raise ConfigError(f"power-law exponent must satisfy p > 1, got {p}")
        if c < 0:
            raise ConfigError(f"power-law scale must be >= 0, got {c}")
        return cls(c * np.arange(1, n + 1, dtype=float) ** (-p))


def _coord_word(coord) -> int:
    """Map a coordinate (small int or tag string) to a stable uint32."""
    if isinstance(coord, (int, np.integer)):
        if coord < 0:
            raise ValueError(f"stream coordinates must be >= 0, got {coord}")
        return int(coord) & 0xFFFFFFFF
    if isinstance(coord, str):
        return zlib.crc32(coord.encode("utf-8"))
    raise TypeError(f"unsupported stream coordinate {coord!r}")


@dataclass(frozen=True)
class RngStream:
    """Keyed, counter-based source of reproducible random number generators.

    ``substream`` extends the coordinate tuple (e.g. purpose tag, replica
    block, trajectory index); ``generator`` instantiates the Philox stream
    for the current coordinates.  Within one generator, draws are consumed
    in a fixed order, so the draw position plays the role of a step index.
    """

    seed: int
    path: tuple = ()

    def substream(self, *coords) -> "RngStream":
        return RngStream(
            self.seed, self.path + tuple(_coord_word(c) for c in coords)
        )

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(ss))


def sample_increment(
    q: QWienerSpec,
    dt: float,
    rng: np.random.Generator,
    size: int | None = None,
) -> np.ndarray:
    """One Wiener increment: mode k ~ Normal(0, lambda_k * dt)."""
    if dt < 0:
        raise ValueError(f"increment needs dt >= 0, got {dt}")
    shape = (q.lambdas.size,) if size is None else (size, q.lambdas.size)
    return rng.standard_normal(shape) * np.sqrt(q.lambdas * dt)


def heat_convolution_variance(
    q: QWienerSpec, sigma: float, h: float, basis: SpectralBasis
) -> np.ndarray:
    """Per-mode variance of sigma * int_0^h E_{h-s} dW_s:

        sigma^2 lambda_k (1 - exp(-2 alpha_k h)) / (2 alpha_k).
    """
    if h <= 0:
        raise ValueError(f"convolution window must be positive, got h={h}")
    a = basis.alphas
    return sigma**2 * q.lambdas * (-np.expm1(-2.0 * a * h)) / (2.0 * a)


def sample_heat_convolution(
    q: QWienerSpec,
    sigma: float,
    h: float,
    basis: SpectralBasis,
    rng: np.random.Generator,
    size: int | None = None,
) -> np.ndarray:
    """Exact sample of the heat stochastic convolution over a window h."""
    std = np.sqrt(heat_convolution_variance(q, sigma, h, basis))
    shape = std.shape if size is None else (size,) + std.shape
    return rng.standard_normal(shape) * std


def wave_convolution_covariance(
    q: QWienerSpec, sigma: float, h: float, basis: SpectralBasis
):
    """Per-mode 2x2 covariance of sigma * int_0^h S_{h-s} B dW_s.

    With w = omega_k, the position component integrates sin(w s)/w and the
    velocity component cos(w s) against the same scalar Brownian motion:

        var_u = sigma^2 lambda_k (h/2 - sin(2wh)/(4w)) / w^2
        var_v = sigma^2 lambda_k (h/2 + sin(2wh)/(4w))
        cov   = sigma^2 lambda_k sin(wh)^2 / (2 w^2)

    Returns the triple (var_u, var_v, cov) as arrays over modes.
    """
    if h <= 0:
        raise ValueError(f"convolution window must be positive, got h={h}")
    w = basis.omegas
    scale = sigma**2 * q.lambdas
    int_ss = h / 2.0 - np.sin(2.0 * w * h) / (4.0 * w)
    int_cc = h / 2.0 + np.sin(2.0 * w * h) / (4.0 * w)
    int_sc = np.sin(w * h) ** 2 / (2.0 * w)
    return scale * int_ss / w**2, scale * int_cc, scale * int_sc / w


def _cholesky_2x2(var_u, var_v, cov):
    """Lower Cholesky factors of [[var_u, cov], [cov, var_v]] per mode.

    The Schur complement can fall a hair below zero in floating point; a
    deficit worse than 1e-14 relative would mean a real covariance bug.
    """
    l11 = np.sqrt(var_u)
    safe = np.where(l11 > 0, l11, 1.0)
    l21 = np.where(l11 > 0, cov / safe, 0.0)
    schur = var_v - l21**2
    floor = -1e-14 * np.maximum(var_v, 1.0)
    if np.any(schur < floor):
        raise RuntimeError("wave convolution covariance is not PSD")
    l22 = np.sqrt(np.clip(schur, 0.0, None))
    return l11, l21, l22


def sample_wave_convolution(
    q: QWienerSpec,
    sigma: float,
    h: float,
    basis: SpectralBasis,
    rng: np.random.Generator,
    size: int | None = None,
) -> WaveState:
    """Exact bivariate-Gaussian sample of the wave stochastic convolution."""
    l11, l21, l22 = _cholesky_2x2(
        *wave_convolution_covariance(q, sigma, h, basis)
    )
    shape = (2,) + l11.shape if size is None else (size, 2) + l11.shape
    z = rng.standard_normal(shape)
    z1, z2 = z[..., 0, :], z[..., 1, :]
    return WaveState(l11 * z1, l21 * z1 + l22 * z2)


def stationary_ou_variances(
    q: QWienerSpec, sigma: float, basis: SpectralBasis
) -> np.ndarray:
    """Per-mode stationary variances sigma^2 lambda_k / (2 alpha_k) of the
    linear (zero-reaction) fast process."""
    return sigma**2 * q.lambdas / (2.0 * basis.alphas)
