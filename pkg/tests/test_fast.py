import numpy as np
import pytest

from sfwave.errors import ConfigError
from sfwave.fast import (
    FastState,
    contraction_diagnostic,
    sample_invariant,
    simulate_fast,
    step_fast,
)
from sfwave.noise import QWienerSpec, RngStream, stationary_ou_variances
from sfwave.nonlinearity import CouplingSpec, ReactionSpec, ScalarFn
from sfwave.spectral import make_basis
from sfwave.system import SystemSpec


def build_system(L=1.0, N=8, sigma2=0.5, g="zero"):
    basis = make_basis(L, N)
    return SystemSpec(
        basis=basis,
        q1=QWienerSpec.power_law(N),
        q2=QWienerSpec.power_law(N),
        sigma1=0.5,
        sigma2=sigma2,
        reaction=ReactionSpec.parse(g),
        coupling=CouplingSpec(
            "separable", f1=ScalarFn.parse("zero"), f2=ScalarFn.parse("zero")
        ),
    )


class TestStepFast:
    def test_pure_decay_single_mode(self):
        sys = build_system(sigma2=0.0)
        y = np.zeros(8)
        y[2] = 1.0
        out = step_fast(FastState(y), 0.02, sys, RngStream(0).generator())
        assert out.y[2] == pytest.approx(np.exp(-sys.basis.alphas[2] * 0.02),
                                         rel=1e-14)
        assert np.all(out.y[[0, 1, 3, 4, 5, 6, 7]] == 0.0)
        assert out.tau == pytest.approx(0.02)

    def test_small_step_continuity(self):
        sys = build_system(g="scaled_tanh:0.5")
        rng = RngStream(1).generator()
        y = np.ones(8)
        gaps = []
        for h in (1e-2, 1e-4, 1e-6):
            out = step_fast(FastState(y.copy()), h, sys, rng)
            gaps.append(np.linalg.norm(out.y - y))
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 1e-2

    def test_invalid_step_rejected(self):
        sys = build_system()
        with pytest.raises(ValueError):
            step_fast(FastState(np.zeros(8)), 0.0, sys, RngStream(0).generator())

    def test_ou_long_run_variance(self):
        # one mode, many short steps: empirical variance hits the
        # stationary value sigma^2 lambda_1 / (2 alpha_1)
        sys = build_system(N=1)
        rng = RngStream(2).generator()
        state = FastState(np.zeros((10_000, 1)))
        for _ in range(60):
            state = step_fast(state, 0.05, sys, rng)
        target = stationary_ou_variances(sys.q2, sys.sigma2, sys.basis)[0]
        assert state.y.var() == pytest.approx(target, rel=0.05)


class TestSimulateFast:
    def test_zero_horizon(self):
        sys = build_system()
        y0 = np.arange(1.0, 9.0)
        out = simulate_fast(y0, 0.0, 0.1, sys, RngStream(0).generator())
        np.testing.assert_array_equal(out.y, y0)

    def test_noiseless_linear_matches_semigroup(self):
        sys = build_system(sigma2=0.0)
        y0 = np.arange(1.0, 9.0)
        T = 0.4
        out = simulate_fast(y0, T, T / 173, sys, RngStream(0).generator())
        np.testing.assert_allclose(
            out.y, y0 * np.exp(-sys.basis.alphas * T), rtol=1e-12
        )

    def test_snapshots(self):
        sys = build_system()
        _, snaps = simulate_fast(
            np.zeros(8), 0.1, 0.01, sys, RngStream(3).generator(),
            snapshot_every=2,
        )
        times = [t for t, _ in snaps]
        assert times[0] == 0.0
        assert times[-1] == pytest.approx(0.1)
        assert np.all(np.diff(times) > 0)

    def test_energy_decay_envelope(self):
        # E||Y_T||^2 <= C (exp(-eta T) ||y0||^2 + 1) with an empirical C
        sys = build_system(g="scaled_tanh:2.0")
        eta = sys.mixing_rate
        y0 = np.zeros(8)
        y0[0] = 30.0
        rng = RngStream(4).generator()
        m = 256
        state = FastState(np.tile(y0, (m, 1)))
        checkpoints = {}
        t = 0.0
        for _ in range(80):
            state = step_fast(state, 0.01, sys, rng)
            t += 0.01
            checkpoints[round(t, 3)] = np.mean(np.sum(state.y**2, axis=-1))
        y0_sq = np.sum(y0**2)
        envelope = lambda t: np.exp(-eta * t) * y0_sq + 1.0
        c_cal = checkpoints[0.1] / envelope(0.1)
        for t in (0.2, 0.4, 0.8):
            assert checkpoints[t] <= 1.5 * c_cal * envelope(t)


class TestContraction:
    def test_identical_starts(self):
        sys = build_system()
        y = np.arange(1.0, 9.0)
        rep = contraction_diagnostic(
            y, y.copy(), 0.3, 1e-3, sys, RngStream(5).generator()
        )
        assert np.all(rep.sq_distances == 0.0)

    def test_linear_exact_per_mode(self):
        sys = build_system(g="zero")
        rng = RngStream(6).generator()
        y = np.ones(8)
        y2 = -np.ones(8)
        rep = contraction_diagnostic(y, y2, 0.25, 1e-3, sys, rng)
        gap0 = np.abs(y - y2)
        for i, t in enumerate(rep.times):
            expected = gap0 * np.exp(-sys.basis.alphas * t)
            np.testing.assert_allclose(
                rep.mode_gaps[i], expected, atol=1e-10 * gap0.max()
            )

    def test_lipschitz_reaction_rate(self):
        sys = build_system(L=1.0, N=8, g="scaled_tanh:3.0")
        eta = sys.mixing_rate
        assert eta > 0
        rng = RngStream(7).generator()
        y = np.zeros(8)
        y[0] = 1.0
        rep = contraction_diagnostic(y, -y, 0.4, 5e-4, sys, rng)
        assert rep.rate >= 0.9 * eta

    def test_pathwise_contraction_envelope(self):
        sys = build_system(g="scaled_tanh:4.0")
        eta = sys.mixing_rate
        rng = RngStream(8).generator()
        rng2 = np.random.default_rng(21)
        for _ in range(5):
            y = rng2.standard_normal(8)
            y2 = rng2.standard_normal(8)
            rep = contraction_diagnostic(y, y2, 0.3, 1e-3, sys, rng)
            gap0 = np.linalg.norm(y - y2)
            bound = gap0 * np.exp(-eta * rep.times / 2.0) * 1.1
            assert np.all(np.sqrt(rep.sq_distances) <= bound + 1e-12)


class TestInvariantSample:
    def test_rejects_non_dissipative(self):
        sys = build_system(L=4.0, g="affine:0.7,0.0")   # alpha_1 ~ 0.617
        with pytest.raises(ConfigError):
            sample_invariant(sys, n=10, rng=RngStream(0).generator())

    def test_ou_mode_variances(self):
        sys = build_system()
        inv = sample_invariant(sys, n=10_000, rng=RngStream(9).generator())
        target = stationary_ou_variances(sys.q2, sys.sigma2, sys.basis)
        emp = inv.samples.var(axis=0, ddof=1)
        np.testing.assert_allclose(emp, target, rtol=0.05)

    def test_ou_mode_means_near_zero(self):
        sys = build_system()
        inv = sample_invariant(sys, n=10_000, rng=RngStream(10).generator())
        se = inv.samples.std(axis=0, ddof=1) / np.sqrt(inv.samples.shape[0])
        # thinning at 1/eta leaves residual autocorrelation; allow for it
        assert np.all(np.abs(inv.samples.mean(axis=0)) <= 3.0 * 1.5 * se)

    def test_second_moment_two_seed_stability(self):
        sys = build_system(g="scaled_tanh:1.0")
        a = sample_invariant(sys, n=4000, rng=RngStream(11).generator())
        b = sample_invariant(sys, n=4000, rng=RngStream(12).generator())
        ma, mb = a.mean_square_norm(), b.mean_square_norm()
        assert np.isfinite(ma) and ma > 0
        assert abs(ma - mb) <= 0.10 * max(ma, mb)
