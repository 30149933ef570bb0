#!/usr/bin/env python3
# Exact sampling of the stochastic convolutions: empirical second moments
# against the closed-form covariances, and the addressing contract that
# makes replicas reproducible.

import numpy as np

from sfwave import (
    QWienerSpec,
    RngStream,
    make_basis,
    sample_heat_convolution,
    sample_wave_convolution,
)
from sfwave.noise import heat_convolution_variance, wave_convolution_covariance

basis = make_basis(L=1.0, N=6)
q = QWienerSpec.power_law(6)
print(f"covariance spectrum lambda_k = k^-2, trace = {q.trace:.4f}")

sigma, h = 0.5, 0.05
rng = RngStream(2024).substream("demo").generator()

draws = sample_heat_convolution(q, sigma, h, basis, rng, size=50_000)
theory = heat_convolution_variance(q, sigma, h, basis)
print("\nheat convolution over h = 0.05, 50k draws:")
print("  mode   empirical var   closed form")
for k in range(6):
    print(f"  {k + 1:>4}   {draws.var(axis=0)[k]:.6e}   {theory[k]:.6e}")

pairs = sample_wave_convolution(q, sigma, h, basis, rng, size=50_000)
var_u, var_v, cov = wave_convolution_covariance(q, sigma, h, basis)
print("\nwave convolution, mode 1 of the 2x2 covariance:")
print(f"  var(position): {pairs.u.var(axis=0)[0]:.3e}  vs  {var_u[0]:.3e}")
print(f"  var(velocity): {pairs.v.var(axis=0)[0]:.3e}  vs  {var_v[0]:.3e}")
print(f"  covariance:    {np.mean(pairs.u * pairs.v, axis=0)[0]:.3e}"
      f"  vs  {cov[0]:.3e}")

# same stream coordinates always reproduce the same numbers
a = RngStream(7).substream("w1", 3).generator().standard_normal(4)
b = RngStream(7).substream("w1", 3).generator().standard_normal(4)
print("\nreproducibility: identical coordinates give identical samples:")
print(" ", a)
print(" ", b)
