import numpy as np
import pytest
from scipy.integrate import quad, solve_ivp

from sfwave.errors import ConfigError
from sfwave.noise import QWienerSpec, RngStream
from sfwave.nonlinearity import (
    CouplingSpec,
    ScalarFn,
    ReactionSpec,
    averaged_drift_oracle,
    eval_F,
)
from sfwave.spectral import (
    WaveState,
    apply_wave_group,
    make_basis,
    product_norm,
)
from sfwave.system import SystemSpec
from sfwave.wave import (
    MultiscaleConfig,
    graph_norm_diagnostic,
    plan_steps,
    simulate_averaged,
    simulate_coupled,
    step_slow,
)


def build_system(L=1.0, N=8, sigma1=0.5, sigma2=0.5, g="zero",
                 f1="zero", f2="zero", kind="separable"):
    basis = make_basis(L, N)
    if kind == "separable":
        cpl = CouplingSpec("separable", f1=ScalarFn.parse(f1),
                           f2=ScalarFn.parse(f2))
    else:
        cpl = CouplingSpec("entangled_sin")
    return SystemSpec(
        basis=basis, q1=QWienerSpec.power_law(N), q2=QWienerSpec.power_law(N),
        sigma1=sigma1, sigma2=sigma2, reaction=ReactionSpec.parse(g),
        coupling=cpl,
    )


def zero_drift(sys):
    return averaged_drift_oracle(sys.coupling, sys.basis, sys.ou_variances())


class TestMultiscaleConfig:
    @pytest.mark.parametrize(
        "kw",
        [
            dict(epsilon=0.0, h_slow=0.01, T=1.0),
            dict(epsilon=1.5, h_slow=0.01, T=1.0),
            dict(epsilon=0.5, h_slow=-0.01, T=1.0),
            dict(epsilon=0.5, h_slow=0.01, T=0.001),
            dict(epsilon=0.5, h_slow=0.01, T=1.0, micro_ratio=0),
        ],
    )
    def test_rejects_bad_values(self, kw):
        with pytest.raises(ConfigError):
            MultiscaleConfig(**kw)

    def test_adaptive_substeps_grow_with_stiffness(self):
        sys = build_system(N=16)
        cfg = MultiscaleConfig(epsilon=2.0**-6, h_slow=2.5e-3, T=0.5)
        _, h, window, n_sub = plan_steps(cfg, sys.basis)
        assert window / n_sub <= 0.1 / sys.basis.alphas[-1] * (1 + 1e-12)

    def test_fixed_substeps_can_violate_bound(self):
        sys = build_system(N=16)
        cfg = MultiscaleConfig(
            epsilon=2.0**-6, h_slow=2.5e-3, T=0.5, adaptive_substeps=False
        )
        with pytest.raises(ConfigError):
            plan_steps(cfg, sys.basis)


class TestStepSlow:
    def test_free_evolution(self):
        basis = make_basis(1.3, 6)
        rng = np.random.default_rng(0)
        x = WaveState(rng.standard_normal(6), rng.standard_normal(6))
        out = step_slow(x, np.zeros(6), 0.17, basis)
        ref = apply_wave_group(x, 0.17, basis)
        np.testing.assert_allclose(out.u, ref.u, rtol=1e-14)
        np.testing.assert_allclose(out.v, ref.v, rtol=1e-14)

    def test_constant_forcing_closed_form(self):
        basis = make_basis(1.0, 4)
        d = np.array([0.7, 0.0, -0.3, 0.0])
        h = 0.05
        out = step_slow(WaveState(np.zeros(4), np.zeros(4)), d, h, basis)
        w = basis.omegas
        np.testing.assert_allclose(
            out.u, d * (1.0 - np.cos(w * h)) / w**2, rtol=1e-12
        )
        np.testing.assert_allclose(out.v, d * np.sin(w * h) / w, rtol=1e-12)

    def test_forcing_weights_match_quadrature(self):
        basis = make_basis(2.1, 5)
        h = 0.23
        for k in range(5):
            w = basis.omegas[k]
            # position picks up int_0^h sin(w(h-s))/w ds of the forcing,
            # velocity int_0^h cos(w(h-s)) ds
            iu, _ = quad(lambda s: np.sin(w * (h - s)) / w, 0.0, h)
            iv, _ = quad(lambda s: np.cos(w * (h - s)), 0.0, h)
            d = np.zeros(5)
            d[k] = 1.0
            out = step_slow(WaveState(np.zeros(5), np.zeros(5)), d, h, basis)
            assert out.u[k] == pytest.approx(iu, rel=1e-10)
            assert out.v[k] == pytest.approx(iv, rel=1e-10)


class TestSimulators:
    def test_noiseless_free_reduction_any_step(self):
        sys = build_system(sigma1=0.0, sigma2=0.0)
        x0 = WaveState(np.arange(1.0, 9.0), np.ones(8))
        for h_slow in (0.25, 0.05, 0.003):
            cfg = MultiscaleConfig(epsilon=0.5, h_slow=h_slow, T=0.5)
            path = simulate_averaged(
                x0, cfg, zero_drift(sys), sys, RngStream(0)
            )
            ref = apply_wave_group(x0, 0.5, sys.basis)
            np.testing.assert_allclose(path.terminal.u, ref.u, atol=1e-10)
            np.testing.assert_allclose(path.terminal.v, ref.v, atol=1e-10)

    def test_null_coupling_paths_bit_identical(self):
        sys = build_system()   # F == 0, Fbar == 0
        x0 = WaveState(np.zeros(8), np.zeros(8))
        y0 = np.ones(8)
        cfg = MultiscaleConfig(epsilon=0.25, h_slow=0.01, T=0.2)
        stream = RngStream(99).substream("run")
        a = simulate_coupled(x0, y0, cfg, sys, stream)
        b = simulate_averaged(x0, cfg, zero_drift(sys), sys, stream)
        np.testing.assert_array_equal(a.terminal.u, b.terminal.u)
        np.testing.assert_array_equal(a.terminal.v, b.terminal.v)

    def test_w1_stream_independent_of_epsilon(self):
        sys = build_system()   # F == 0: the wave path exposes W1 directly
        x0 = WaveState(np.zeros(8), np.zeros(8))
        y0 = np.ones(8)
        stream = RngStream(5).substream("run")
        terminals = []
        for eps in (0.5, 0.125, 2.0**-6):
            cfg = MultiscaleConfig(epsilon=eps, h_slow=0.01, T=0.2)
            terminals.append(simulate_coupled(x0, y0, cfg, sys, stream).terminal)
        for t in terminals[1:]:
            np.testing.assert_array_equal(terminals[0].u, t.u)
            np.testing.assert_array_equal(terminals[0].v, t.v)

    def test_deterministic_coupled_matches_ivp_oracle(self):
        # sigma1 = sigma2 = 0, affine coupling: integrate the coefficient ODE
        # with an independent high-accuracy solver
        sys = build_system(
            sigma1=0.0, sigma2=0.0, f1="affine:0.8,0.3", f2="affine:-0.5,0.1"
        )
        basis = sys.basis
        x0 = WaveState(np.eye(8)[0], np.zeros(8))
        y0 = np.eye(8)[1] * 2.0
        eps = 0.25
        cfg = MultiscaleConfig(epsilon=eps, h_slow=1e-3, T=0.3)

        def rhs(t, z):
            u, v = z[:8], z[8:]
            y_t = y0 * np.exp(-basis.alphas * t / eps)
            drift = eval_F(sys.coupling, u, y_t, basis)
            return np.concatenate([v, -basis.alphas * u + drift])

        sol = solve_ivp(
            rhs, (0.0, 0.3), np.concatenate([x0.u, x0.v]),
            rtol=1e-11, atol=1e-12, dense_output=False, method="DOP853",
        )
        path = simulate_coupled(x0, y0, cfg, sys, RngStream(0))
        np.testing.assert_allclose(path.terminal.u, sol.y[:8, -1], atol=2e-4)
        np.testing.assert_allclose(path.terminal.v, sol.y[8:, -1], atol=2e-3)

    def test_deterministic_averaged_matches_ivp_oracle(self):
        sys = build_system(sigma1=0.0, f1="affine:0.6,0.2", f2="sin_shift:0.7")
        basis = sys.basis
        fbar = averaged_drift_oracle(sys.coupling, basis, sys.ou_variances())
        x0 = WaveState(np.eye(8)[0], np.zeros(8))
        cfg = MultiscaleConfig(epsilon=0.5, h_slow=1e-3, T=0.3)

        def rhs(t, z):
            u, v = z[:8], z[8:]
            return np.concatenate([v, -basis.alphas * u + fbar.value(u)])

        sol = solve_ivp(
            rhs, (0.0, 0.3), np.concatenate([x0.u, x0.v]),
            rtol=1e-11, atol=1e-12, method="DOP853",
        )
        path = simulate_averaged(x0, cfg, fbar, sys, RngStream(0))
        np.testing.assert_allclose(path.terminal.u, sol.y[:8, -1], atol=2e-4)
        np.testing.assert_allclose(path.terminal.v, sol.y[8:, -1], atol=2e-3)

    def test_h1_norm_uniform_in_epsilon(self):
        sys = build_system(f1="scaled_tanh:0.5", f2="sin_shift:0.7")
        x0 = WaveState(np.eye(8)[0], np.zeros(8))
        y0 = np.eye(8)[0].copy()
        stream = RngStream(17).substream("h1")
        second_moments = []
        m = 64
        for k in range(1, 7):
            cfg = MultiscaleConfig(epsilon=2.0**-k, h_slow=5e-3, T=0.25)
            from sfwave.wave import _run_multiscale

            path = _run_multiscale(
                x0, y0, cfg, sys, stream, coupled=True, fbar=None,
                snapshot_every=None, batch=m,
            )
            sq = product_norm(path.terminal, 1.0, sys.basis) ** 2
            second_moments.append(np.mean(sq))
        assert max(second_moments) / min(second_moments) < 2.0

    def test_snapshot_grid_strictly_increasing(self):
        sys = build_system()
        x0 = WaveState(np.zeros(8), np.zeros(8))
        cfg = MultiscaleConfig(epsilon=0.5, h_slow=0.01, T=0.1)
        path = simulate_averaged(
            x0, cfg, zero_drift(sys), sys, RngStream(1), snapshot_every=3
        )
        assert np.all(np.diff(path.times) > 0)
        assert path.times[-1] == pytest.approx(0.1)
        np.testing.assert_array_equal(
            path.terminal.u, path.snapshots[-1].u
        )


class TestAveragedBounds:
    def test_terminal_norm_envelope_stable_across_seeds(self):
        sys = build_system(f1="scaled_tanh:0.5", f2="sin_shift:0.7")
        fbar = averaged_drift_oracle(sys.coupling, sys.basis, sys.ou_variances())
        x0 = WaveState(np.eye(8)[0], np.zeros(8))
        cfg = MultiscaleConfig(epsilon=0.5, h_slow=5e-3, T=0.25)
        from sfwave.wave import _run_multiscale

        means = []
        for seed in (101, 202):
            path = _run_multiscale(
                x0, None, cfg, sys, RngStream(seed), coupled=False,
                fbar=fbar, snapshot_every=None, batch=256,
            )
            means.append(np.mean(product_norm(path.terminal, 0.0, sys.basis)))
        envelope = 1.0 + product_norm(x0, 0.0, sys.basis)
        assert abs(means[0] - means[1]) <= 0.1 * max(means)
        assert max(means) <= 3.0 * envelope

    def test_step_size_robustness(self):
        # halving the slow step moves the observable estimate by less than
        # its Monte Carlo standard error (discretisation bias is subdominant)
        from sfwave.analysis import TestFunctional
        from sfwave.wave import _run_multiscale

        sys = build_system(f1="scaled_tanh:0.5", f2="sin_shift:0.7")
        x0 = WaveState(np.eye(8)[0], np.zeros(8))
        y0 = np.eye(8)[0].copy()
        w = np.zeros(8)
        w[0] = 1.0
        phi = TestFunctional("bounded_projection", w=w, c=0.5)
        stats = []
        m = 1024
        for h_slow in (0.01, 0.005):
            cfg = MultiscaleConfig(epsilon=0.25, h_slow=h_slow, T=0.25)
            path = _run_multiscale(
                x0, y0, cfg, sys, RngStream(55), coupled=True, fbar=None,
                snapshot_every=None, batch=m,
            )
            vals = phi.value(path.terminal.u)
            stats.append((vals.mean(), vals.std(ddof=1) / np.sqrt(m)))
        gap = abs(stats[0][0] - stats[1][0])
        assert gap <= 2.0 * np.hypot(stats[0][1], stats[1][1])


class TestExports:
    def test_path_csv_columns(self, tmp_path):
        import io

        from sfwave.wave import path_to_csv

        sys = build_system()
        x0 = WaveState(np.eye(8)[0], np.zeros(8))
        cfg = MultiscaleConfig(epsilon=0.5, h_slow=0.02, T=0.1)
        path = simulate_averaged(
            x0, cfg, zero_drift(sys), sys, RngStream(3), snapshot_every=1
        )
        buf = io.StringIO()
        path_to_csv(path, buf)
        lines = buf.getvalue().splitlines()
        expected = (
            ["t"] + [f"u_{k}" for k in range(1, 9)]
            + [f"v_{k}" for k in range(1, 9)]
        )
        assert lines[0] == ",".join(expected)
        assert len(lines) == 1 + len(path.times)

    def test_terminal_records_roundtrip(self):
        import json

        from sfwave.wave import terminal_records_json

        state = WaveState(np.ones((3, 8)), np.zeros((3, 8)))
        records = json.loads(terminal_records_json(0.25, 7, state))
        assert [r["replica"] for r in records] == [0, 1, 2]
        assert records[0]["epsilon"] == 0.25
        assert records[0]["seed"] == 7
        assert records[1]["u"] == [1.0] * 8


class TestGraphNorm:
    def test_zero_state(self):
        sys = build_system(sigma1=0.0)
        x0 = WaveState(np.zeros(8), np.zeros(8))
        cfg = MultiscaleConfig(epsilon=0.5, h_slow=0.01, T=0.1)
        path = simulate_averaged(
            x0, cfg, zero_drift(sys), sys, RngStream(0), snapshot_every=1
        )
        _, series = graph_norm_diagnostic(path, sys.basis)
        assert np.all(series == 0.0)

    def test_free_wave_exactly_constant(self):
        sys = build_system(sigma1=0.0)
        rng = np.random.default_rng(3)
        x0 = WaveState(rng.standard_normal(8), rng.standard_normal(8))
        cfg = MultiscaleConfig(epsilon=0.5, h_slow=0.01, T=0.5)
        path = simulate_averaged(
            x0, cfg, zero_drift(sys), sys, RngStream(0), snapshot_every=1
        )
        _, series = graph_norm_diagnostic(path, sys.basis)
        np.testing.assert_allclose(series, series[0], rtol=1e-11)

    def test_full_system_bounded_across_epsilons(self):
        sys = build_system(f1="scaled_tanh:0.5", f2="sin_shift:0.7")
        x0 = WaveState(np.eye(8)[0], np.zeros(8))
        y0 = np.eye(8)[0].copy()
        maxima = []
        for k in range(1, 7):
            cfg = MultiscaleConfig(epsilon=2.0**-k, h_slow=5e-3, T=0.25)
            path = simulate_coupled(
                x0, y0, cfg, sys, RngStream(23).substream("gn"),
                snapshot_every=5,
            )
            _, series = graph_norm_diagnostic(path, sys.basis)
            maxima.append(series.max())
        maxima = np.asarray(maxima)
        assert maxima.max() <= 2.0 * np.median(maxima)
