import numpy as np
import pytest
from scipy.integrate import quad

from sfwave.errors import ConfigError
from sfwave.spectral import (
    WaveState,
    apply_heat_semigroup,
    apply_wave_group,
    from_grid,
    make_basis,
    product_norm,
    sobolev_norm,
    to_grid,
)


def eigenfunction(k, L):
    return lambda xi: np.sqrt(2.0 / L) * np.sin(k * np.pi * xi / L)


class TestMakeBasis:
    def test_eigenvalues_pi_interval(self):
        basis = make_basis(np.pi, 3)
        assert np.allclose(basis.alphas, [1.0, 4.0, 9.0], rtol=1e-15)

    def test_eigenvalue_unit_interval(self):
        basis = make_basis(1.0, 1)
        assert basis.alphas[0] == pytest.approx(np.pi**2, rel=1e-12)
        assert basis.alphas[0] == pytest.approx(9.8696044, rel=1e-7)

    def test_strictly_increasing(self):
        basis = make_basis(2.7, 40)
        assert np.all(np.diff(basis.alphas) > 0)

    def test_omega_squared_is_alpha(self):
        basis = make_basis(1.3, 25)
        np.testing.assert_array_equal(basis.omegas**2, basis.alphas)

    @pytest.mark.parametrize("L,N", [(0.0, 4), (-1.0, 4), (1.0, 0)])
    def test_rejects_bad_arguments(self, L, N):
        with pytest.raises(ConfigError):
            make_basis(L, N)

    def test_orthonormality_by_quadrature(self):
        L = 1.7
        basis = make_basis(L, 4)
        for j in range(1, basis.N + 1):
            for k in range(1, basis.N + 1):
                val, _ = quad(
                    lambda xi: eigenfunction(j, L)(xi) * eigenfunction(k, L)(xi),
                    0.0, L, limit=200,
                )
                assert val == pytest.approx(1.0 if j == k else 0.0, abs=1e-10)


class TestNorms:
    def test_euclidean_case(self):
        basis = make_basis(1.0, 2)
        assert sobolev_norm(np.array([3.0, 4.0]), 0.0, basis) == pytest.approx(5.0)

    def test_unit_mode_h1_norm(self):
        basis = make_basis(np.pi, 5)
        for k in range(1, 6):
            f = np.zeros(5)
            f[k - 1] = 1.0
            assert sobolev_norm(f, 1.0, basis) == pytest.approx(k, rel=1e-14)

    def test_zero_field(self):
        basis = make_basis(2.0, 6)
        for s in (-1.0, 0.0, 0.5, 2.0):
            assert sobolev_norm(np.zeros(6), s, basis) == 0.0

    def test_dimension_mismatch(self):
        basis = make_basis(1.0, 4)
        with pytest.raises(ValueError):
            sobolev_norm(np.zeros(5), 0.0, basis)

    def test_monotone_in_s_when_alphas_at_least_one(self):
        # alpha_1 = 1 on [0, pi], so higher s weights can only grow the norm
        basis = make_basis(np.pi, 8)
        rng = np.random.default_rng(0)
        for _ in range(25):
            f = rng.standard_normal(8)
            norms = [sobolev_norm(f, s, basis) for s in (-1.0, 0.0, 1.0, 2.0)]
            assert np.all(np.diff(norms) >= -1e-12)

    def test_product_norm_zero(self):
        basis = make_basis(1.0, 3)
        assert product_norm(WaveState(np.zeros(3), np.zeros(3)), 0.0, basis) == 0.0

    def test_product_norm_single_modes(self):
        basis = make_basis(np.pi, 3)
        e1 = np.array([1.0, 0.0, 0.0])
        zero = np.zeros(3)
        assert product_norm(WaveState(e1, zero), 0.0, basis) == pytest.approx(1.0)
        # alpha_1 = 1, so a unit velocity coefficient also has norm 1
        assert product_norm(WaveState(zero, e1), 0.0, basis) == pytest.approx(1.0)

    def test_product_norm_mismatch(self):
        basis = make_basis(1.0, 3)
        with pytest.raises(ValueError):
            product_norm(WaveState(np.zeros(4), np.zeros(4)), 0.0, basis)

    def test_parseval_against_quadrature(self):
        L = 1.3
        basis = make_basis(L, 6)
        rng = np.random.default_rng(3)
        coeffs = rng.standard_normal(6)

        def reconstructed_sq(xi):
            return sum(
                c * eigenfunction(k + 1, L)(xi) for k, c in enumerate(coeffs)
            ) ** 2

        val, _ = quad(reconstructed_sq, 0.0, L, limit=400)
        assert np.sqrt(val) == pytest.approx(
            sobolev_norm(coeffs, 0.0, basis), abs=1e-8
        )


class TestHeatSemigroup:
    def test_identity_at_zero(self):
        basis = make_basis(1.0, 5)
        f = np.arange(1.0, 6.0)
        np.testing.assert_array_equal(apply_heat_semigroup(f, 0.0, basis), f)

    def test_unit_mode_decay(self):
        basis = make_basis(np.pi, 3)
        f = np.array([1.0, 0.0, 0.0])
        out = apply_heat_semigroup(f, 1.0, basis)
        assert out[0] == pytest.approx(np.exp(-1.0), rel=1e-14)
        assert out[0] == pytest.approx(0.367879, abs=1e-6)

    def test_contraction(self):
        basis = make_basis(2.0, 8)
        rng = np.random.default_rng(1)
        for t in (0.0, 1e-3, 0.1, 3.0):
            f = rng.standard_normal(8)
            assert sobolev_norm(
                apply_heat_semigroup(f, t, basis), 0.0, basis
            ) <= sobolev_norm(f, 0.0, basis) + 1e-15

    def test_negative_time_rejected(self):
        basis = make_basis(1.0, 2)
        with pytest.raises(ValueError):
            apply_heat_semigroup(np.zeros(2), -0.1, basis)


class TestWaveGroup:
    def test_identity_at_zero(self):
        basis = make_basis(1.0, 4)
        x = WaveState(np.arange(1.0, 5.0), np.arange(4.0, 0.0, -1.0))
        out = apply_wave_group(x, 0.0, basis)
        np.testing.assert_array_equal(out.u, x.u)
        np.testing.assert_array_equal(out.v, x.v)

    def test_quarter_period_rotation(self):
        basis = make_basis(np.pi, 2)   # omega_1 = 1
        x = WaveState(np.array([1.0, 0.0]), np.zeros(2))
        out = apply_wave_group(x, np.pi / 2.0, basis)
        assert out.u[0] == pytest.approx(0.0, abs=1e-15)
        assert out.v[0] == pytest.approx(-1.0, rel=1e-15)

    def test_inverse(self):
        basis = make_basis(1.4, 10)
        rng = np.random.default_rng(2)
        x = WaveState(rng.standard_normal(10), rng.standard_normal(10))
        back = apply_wave_group(apply_wave_group(x, 0.73, basis), -0.73, basis)
        np.testing.assert_allclose(back.u, x.u, atol=1e-12)
        np.testing.assert_allclose(back.v, x.v, atol=1e-12)

    def test_group_law(self):
        basis = make_basis(2.2, 6)
        rng = np.random.default_rng(5)
        x = WaveState(rng.standard_normal(6), rng.standard_normal(6))
        a = apply_wave_group(apply_wave_group(x, 0.31, basis), 0.47, basis)
        b = apply_wave_group(x, 0.78, basis)
        np.testing.assert_allclose(a.u, b.u, atol=1e-10)
        np.testing.assert_allclose(a.v, b.v, atol=1e-10)

    def test_energy_conservation(self):
        basis = make_basis(1.0, 12)
        rng = np.random.default_rng(7)
        x = WaveState(rng.standard_normal(12), rng.standard_normal(12))
        e0 = product_norm(x, 0.0, basis)
        for t in (1e-4, 0.2, 5.0, -3.3):
            e = product_norm(apply_wave_group(x, t, basis), 0.0, basis)
            assert abs(e - e0) <= 1e-10 * e0


class TestGridTransforms:
    def test_round_trip(self):
        basis = make_basis(1.9, 13)
        rng = np.random.default_rng(11)
        f = rng.standard_normal(13)
        for grid_size in (13, 26, 64):
            back = from_grid(to_grid(f, basis, grid_size), basis)
            np.testing.assert_allclose(back, f, rtol=1e-10, atol=1e-12)

    def test_first_mode_samples(self):
        L = 2.3
        basis = make_basis(L, 4)
        f = np.array([1.0, 0.0, 0.0, 0.0])
        values = to_grid(f, basis)
        nodes = basis.grid().nodes
        np.testing.assert_allclose(
            values, eigenfunction(1, L)(nodes), rtol=1e-13
        )

    def test_zero_grid(self):
        basis = make_basis(1.0, 5)
        np.testing.assert_array_equal(
            from_grid(np.zeros(10), basis), np.zeros(5)
        )

    def test_aliasing_grid_rejected(self):
        basis = make_basis(1.0, 8)
        with pytest.raises(ValueError):
            to_grid(np.zeros(8), basis, grid_size=7)

    def test_batched(self):
        basis = make_basis(1.0, 6)
        rng = np.random.default_rng(13)
        f = rng.standard_normal((4, 3, 6))
        np.testing.assert_allclose(
            from_grid(to_grid(f, basis), basis), f, rtol=1e-10
        )
