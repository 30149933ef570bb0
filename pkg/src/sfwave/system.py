"""Full problem description for the coupled slow-fast system."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError
from .noise import QWienerSpec, stationary_ou_variances
from .nonlinearity import CouplingSpec, ReactionSpec
from .spectral import SpectralBasis

__all__ = ["SystemSpec"]


@dataclass(frozen=True)
class SystemSpec:
    """Basis, noise intensities/spectra and nonlinearities of one problem."""

    basis: SpectralBasis
    q1: QWienerSpec
    q2: QWienerSpec
    sigma1: float
    sigma2: float
    reaction: ReactionSpec
    coupling: CouplingSpec

    @property
    def mixing_rate(self) -> float:
        """Dissipativity gap alpha_1 - L_g of the fast process."""
        return float(self.basis.alphas[0]) - self.reaction.lipschitz

    @property
    def is_linear_fast(self) -> bool:
        return self.reaction.is_zero

    def ou_variances(self):
        """Stationary per-mode variances of the zero-reaction fast process."""
        return stationary_ou_variances(self.q2, self.sigma2, self.basis)

    def validation_errors(self) -> list[str]:
        errors = []
        n = self.basis.N
        if self.q1.lambdas.size != n or self.q2.lambdas.size != n:
            errors.append(
                f"noise.q1/q2: spectrum length must equal basis.N={n}"
            )
        if self.sigma1 < 0 or self.sigma2 < 0:
            errors.append("noise.sigma1/sigma2: intensities must be >= 0")
        gap = self.mixing_rate
        if gap <= 0:
            errors.append(
                "reaction.lipschitz >= alpha_1: the fast process is not "
                f"dissipative (L_g={self.reaction.lipschitz}, "
                f"alpha_1={self.basis.alphas[0]})"
            )
        return errors

    def ensure_valid(self):
        errors = self.validation_errors()
        if errors:
            raise ConfigError("; ".join(errors))
