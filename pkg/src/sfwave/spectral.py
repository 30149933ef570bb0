"""Dirichlet sine eigenbasis on [0, L] and exact per-mode propagators.

Everything in this module is a pure function of immutable inputs.  A scalar
field is represented by its vector of coefficients against the orthonormal
eigenfunctions

    e_k(xi) = sqrt(2/L) * sin(k*pi*xi/L),      k = 1..N,

of the negative Dirichlet Laplacian, with eigenvalues alpha_k = (k*pi/L)^2.
A wave state is the pair (u, v) of position and velocity coefficient vectors.
Coefficient arrays may carry arbitrary leading batch dimensions; the mode
axis is always the last one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np

from .errors import ConfigError

__all__ = [
    "SpectralBasis",
    "WaveState",
    "make_basis",
    "sobolev_norm",
    "product_norm",
    "apply_heat_semigroup",
    "apply_wave_group",
    "to_grid",
    "from_grid",
]


@dataclass(frozen=True)
class CollocationGrid:
    """Interior collocation nodes xi_j = j*L/(M+1), j = 1..M, plus the
    synthesis/analysis matrices for the sine basis.

    For M >= N the discrete sine orthogonality
        sum_j sin(k pi j/(M+1)) sin(l pi j/(M+1)) = (M+1)/2 * delta_kl
    makes analysis(synthesis(c)) == c exactly (up to rounding), and the
    weighted grid norm equals the coefficient norm (discrete Parseval).
    """

    size: int
    nodes: np.ndarray         # (M,)
    weight: float             # quadrature weight L/(M+1)
    synthesis: np.ndarray     # (N, M): values = coeffs @ synthesis
    analysis: np.ndarray      # (M, N): coeffs = values @ analysis


@dataclass(frozen=True)
class SpectralBasis:
    """Truncated eigenbasis of the Dirichlet Laplacian on [0, L]."""

    L: float
    N: int
    alphas: np.ndarray   # (N,) eigenvalues (k pi / L)^2, strictly increasing
    omegas: np.ndarray   # (N,) frequencies sqrt(alpha_k) = k pi / L
    _grids: dict = field(default_factory=dict, repr=False, compare=False)

    def grid(self, size: int | None = None) -> CollocationGrid:
        """Return (and cache) the collocation grid; default size is 2N."""
        if size is None:
            size = 2 * self.N
        if size < self.N:
            raise ValueError(
                f"grid size {size} < N={self.N} would alias the basis"
            )
        cached = self._grids.get(size)
        if cached is not None:
            return cached
        j = np.arange(1, size + 1)
        nodes = j * self.L / (size + 1)
        k = np.arange(1, self.N + 1)
        synthesis = np.sqrt(2.0 / self.L) * np.sin(
            np.pi * np.outer(k, j) / (size + 1)
        )
        weight = self.L / (size + 1)
        grid = CollocationGrid(
            size=size,
            nodes=nodes,
            weight=weight,
            synthesis=synthesis,
            analysis=(synthesis * weight).T.copy(),
        )
        self._grids[size] = grid
        return grid


@dataclass
class WaveState:
    """Position/velocity coefficient pair (u, v) of the wave system."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.u.shape != self.v.shape:
            raise ValueError(
                f"u/v shape mismatch: {self.u.shape} vs {self.v.shape}"
            )

    def copy(self) -> "WaveState":
        return WaveState(self.u.copy(), self.v.copy())

    @property
    def n_modes(self) -> int:
        return self.u.shape[-1]


def make_basis(L: float, N: int) -> SpectralBasis:
    """Build the truncated sine eigenbasis with alpha_k = (k*pi/L)^2."""
    if not L > 0:
        raise ConfigError(f"interval length must be positive, got L={L}")
    if N < 1:
        raise ConfigError(f"truncation level must be >= 1, got N={N}")
    omegas = np.arange(1, N + 1) * np.pi / L
    return SpectralBasis(L=float(L), N=int(N), alphas=omegas**2, omegas=omegas)


def _check_modes(coeffs: np.ndarray, basis: SpectralBasis) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape[-1] != basis.N:
        raise ValueError(
            f"field has {coeffs.shape[-1]} modes, basis expects {basis.N}"
        )
    return coeffs


def sobolev_norm(coeffs: np.ndarray, s: float, basis: SpectralBasis):
    """H^s norm (sum_k alpha_k^s c_k^2)^(1/2); batched over leading axes."""
    coeffs = _check_modes(coeffs, basis)
    return np.sqrt(np.sum(basis.alphas**s * coeffs**2, axis=-1))


def product_norm(state: WaveState, alpha: float, basis: SpectralBasis):
    """Energy-type norm (||u||_alpha^2 + ||v||_{alpha-1}^2)^(1/2)."""
    u = _check_modes(state.u, basis)
    v = _check_modes(state.v, basis)
    return np.sqrt(
        np.sum(basis.alphas**alpha * u**2, axis=-1)
        + np.sum(basis.alphas ** (alpha - 1.0) * v**2, axis=-1)
    )


def apply_heat_semigroup(
    coeffs: np.ndarray, t: float, basis: SpectralBasis
) -> np.ndarray:
    """Multiply mode k by exp(-alpha_k t); contraction for every t >= 0."""
    if t < 0:
        raise ValueError(f"heat semigroup needs t >= 0, got t={t}")
    coeffs = _check_modes(coeffs, basis)
    return coeffs * np.exp(-basis.alphas * t)


def apply_wave_group(
    state: WaveState, t: float, basis: SpectralBasis
) -> WaveState:
    """Exact free wave evolution; per mode k with w = omega_k:

        (u, v) -> (cos(wt) u + sin(wt) v / w, -w sin(wt) u + cos(wt) v).

    Defined for all real t (a group); preserves the alpha=0 product norm.
    """
    u = _check_modes(state.u, basis)
    v = _check_modes(state.v, basis)
    w = basis.omegas
    c, s = np.cos(w * t), np.sin(w * t)
    return WaveState(c * u + (s / w) * v, -(w * s) * u + c * v)


def to_grid(
    coeffs: np.ndarray, basis: SpectralBasis, grid_size: int | None = None
) -> np.ndarray:
    """Evaluate the field at the collocation nodes (default grid 2N)."""
    coeffs = _check_modes(coeffs, basis)
    return coeffs @ basis.grid(grid_size).synthesis


def from_grid(values: np.ndarray, basis: SpectralBasis) -> np.ndarray:
    """Project nodal values back onto the first N modes.

    Exact inverse of ``to_grid`` whenever the grid has at least N nodes.
    """
    values = np.asarray(values, dtype=float)
    return values @ basis.grid(values.shape[-1]).analysis
