"""Experiment configuration: TOML schema, validation, presets.

A config file describes one experiment end to end: basis, noise, the
nonlinearity catalog selections, initial data, numerics, the epsilon sweep,
the test functional and how the averaged drift is obtained.  Validation
checks every structural requirement (dissipativity, trace-class spectra,
step bounds) before any simulation work happens and reports violations with
their field paths.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .analysis import TestFunctional
from .errors import ConfigError
from .fast import sample_invariant
from .noise import QWienerSpec, RngStream
from .nonlinearity import (
    AveragedDrift,
    CouplingSpec,
    ReactionSpec,
    ScalarFn,
    averaged_drift_ergodic,
    averaged_drift_oracle,
)
from .spectral import SpectralBasis, WaveState, make_basis
from .system import SystemSpec
from .wave import MultiscaleConfig

__all__ = [
    "ExperimentConfig",
    "load_config",
    "validate_config",
    "config_hash",
    "PRESET_NAMES",
]

PRESET_NAMES = ("smoke", "acceptance", "diagnostics")

_INITIAL_PRESETS = ("single_mode", "smooth_bump")


def load_config(source) -> dict:
    """Load a TOML config from a file path or a packaged preset name."""
    text = None
    src = str(source)
    if src in PRESET_NAMES:
        from importlib.resources import files

        text = files("sfwave").joinpath("presets", src + ".toml").read_text()
    else:
        try:
            with open(src, "rb") as fh:
                return tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {src}")
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config parse error in {src}: {exc}")
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"preset parse error ({src}): {exc}")


def config_hash(data: dict) -> str:
    return hashlib.sha256(
        json.dumps(data, sort_keys=True).encode("utf-8")
    ).hexdigest()


def _initial_vectors(section: dict, n: int):
    preset = section.get("preset")
    if preset is not None:
        if preset == "single_mode":
            e1 = np.zeros(n)
            e1[0] = 1.0
            return e1.copy(), np.zeros(n), e1.copy()
        if preset == "smooth_bump":
            bump = np.arange(1, n + 1, dtype=float) ** (-3.0)
            return bump.copy(), np.zeros(n), bump.copy()
        raise ConfigError(f"initial.preset: unknown preset '{preset}'")
    try:
        x1 = np.asarray(section["x1"], dtype=float)
        x2 = np.asarray(section["x2"], dtype=float)
        y = np.asarray(section["y"], dtype=float)
    except KeyError as exc:
        raise ConfigError(f"initial.{exc.args[0]}: missing (or use a preset)")
    for name, vec in (("x1", x1), ("x2", x2), ("y", y)):
        if vec.shape != (n,):
            raise ConfigError(
                f"initial.{name}: expected {n} mode coefficients, "
                f"got shape {vec.shape}"
            )
    return x1, x2, y


def _spectrum(section, n: int, label: str) -> QWienerSpec:
    if isinstance(section, list):
        lams = np.asarray(section, dtype=float)
        if lams.shape != (n,):
            raise ConfigError(f"{label}: explicit spectrum needs {n} entries")
        return QWienerSpec(lams)
    if isinstance(section, dict):
        kind = section.get("kind", "power_law")
        if kind == "power_law":
            return QWienerSpec.power_law(
                n, c=float(section.get("c", 1.0)), p=float(section.get("p", 2.0))
            )
        if kind == "explicit":
            return _spectrum(section["lambdas"], n, label)
        raise ConfigError(f"{label}.kind: unknown spectrum kind '{kind}'")
    raise ConfigError(f"{label}: expected a table or a list of eigenvalues")


def _coupling(section: dict) -> CouplingSpec:
    kind = section.get("kind", "separable")
    if kind == "separable":
        return CouplingSpec(
            "separable",
            f1=ScalarFn.parse(str(section.get("f1", "zero"))),
            f2=ScalarFn.parse(str(section.get("f2", "zero"))),
        )
    if kind == "entangled_sin":
        return CouplingSpec("entangled_sin")
    raise ConfigError(f"coupling.F.kind: unknown kind '{kind}'")


@dataclass
class ExperimentConfig:
    """Validated experiment description, ready to build runtime objects."""

    data: dict
    basis: SpectralBasis
    system: SystemSpec
    x0: WaveState
    y0: np.ndarray
    functional: TestFunctional
    epsilons: list
    replicas: int
    base_seed: int
    block_size: int
    h_slow: float
    T: float
    micro_ratio: int
    fast_step_max: float | None
    adaptive_substeps: bool
    fbar_mode: str
    fbar_options: dict
    diagnostics: dict

    def multiscale(self, epsilon: float) -> MultiscaleConfig:
        return MultiscaleConfig(
            epsilon=epsilon,
            h_slow=self.h_slow,
            T=self.T,
            micro_ratio=self.micro_ratio,
            fast_step_max=self.fast_step_max,
            adaptive_substeps=self.adaptive_substeps,
        )

    def stream(self, seed: int | None = None) -> RngStream:
        return RngStream(self.base_seed if seed is None else seed)

    def build_fbar(self, stream: RngStream) -> AveragedDrift:
        """Freeze the averaged drift: closed form for the linear fast
        process, otherwise an ergodic estimate over invariant samples."""
        if self.fbar_mode == "oracle":
            return averaged_drift_oracle(
                self.system.coupling, self.basis, self.system.ou_variances()
            )
        opts = self.fbar_options
        inv = sample_invariant(
            self.system,
            n=int(opts.get("n", 2000)),
            rng=stream.substream("mu").generator(),
            burn_in=opts.get("burn_in"),
            thin=opts.get("thin"),
            h=opts.get("h"),
        )
        return averaged_drift_ergodic(self.system.coupling, self.basis, inv)

    @property
    def hash(self) -> str:
        return config_hash(self.data)


def validate_config(data: dict):
    """Check every invariant; returns (ExperimentConfig | None, errors).

    Every violation names the offending field path.  No simulation work is
    performed here.
    """
    errors: list[str] = []

    def fail(msg):
        errors.append(msg)

    basis = None
    sec = data.get("basis", {})
    L = sec.get("L", 1.0)
    N = sec.get("N", 0)
    try:
        basis = make_basis(float(L), int(N))
    except (ConfigError, TypeError, ValueError) as exc:
        fail(f"basis: {exc}")

    sigma1 = float(data.get("noise", {}).get("sigma1", 0.0))
    sigma2 = float(data.get("noise", {}).get("sigma2", 0.0))
    if sigma1 < 0:
        fail("noise.sigma1: must be >= 0")
    if sigma2 < 0:
        fail("noise.sigma2: must be >= 0")

    q1 = q2 = None
    if basis is not None:
        try:
            q1 = _spectrum(data.get("noise", {}).get("q1", {}), basis.N, "noise.q1")
        except (ConfigError, KeyError, TypeError, ValueError) as exc:
            fail(f"noise.q1: {exc}")
        try:
            q2 = _spectrum(data.get("noise", {}).get("q2", {}), basis.N, "noise.q2")
        except (ConfigError, KeyError, TypeError, ValueError) as exc:
            fail(f"noise.q2: {exc}")

    reaction = coupling = None
    try:
        reaction = ReactionSpec.parse(str(data.get("reaction", {}).get("g", "zero")))
    except ConfigError as exc:
        fail(f"reaction.g: {exc}")
    try:
        coupling = _coupling(data.get("coupling", {}).get("F", {}))
    except (ConfigError, TypeError) as exc:
        fail(f"coupling.F: {exc}")

    if basis is not None and reaction is not None:
        if reaction.lipschitz >= basis.alphas[0]:
            fail(
                "reaction.g: Lipschitz constant "
                f"{reaction.lipschitz} >= alpha_1 = {basis.alphas[0]}; "
                "the fast process is not dissipative"
            )

    x0 = y0 = None
    if basis is not None:
        try:
            x1, x2, y0 = _initial_vectors(data.get("initial", {}), basis.N)
            x0 = WaveState(x1, x2)
        except ConfigError as exc:
            fail(str(exc))

    num = data.get("numerics", {})
    h_slow = float(num.get("h_slow", 0.0))
    T = float(num.get("T", 0.0))
    micro_ratio = int(num.get("micro_ratio", 8))
    fast_step_max = num.get("fast_step_max")
    adaptive = bool(num.get("adaptive_substeps", True))
    if h_slow <= 0:
        fail("numerics.h_slow: must be positive")
    if T < h_slow:
        fail("numerics.T: must be >= h_slow")
    if micro_ratio < 1:
        fail("numerics.micro_ratio: must be >= 1")

    sweep = data.get("sweep", {})
    eps = list(sweep.get("epsilons", []))
    if not eps:
        fail("sweep.epsilons: must be a nonempty list")
    else:
        if any(not (0.0 < e <= 1.0) for e in eps):
            fail("sweep.epsilons: every value must lie in (0, 1]")
        if len(set(eps)) != len(eps):
            fail("sweep.epsilons: values must be distinct")
        eps = sorted(eps, reverse=True)
    replicas = int(sweep.get("replicas", 0))
    if replicas < 2:
        fail("sweep.replicas: need at least 2")
    base_seed = int(sweep.get("base_seed", 0))
    if base_seed < 0:
        fail("sweep.base_seed: must be >= 0")
    block_size = int(sweep.get("block_size", 256))
    if block_size < 1:
        fail("sweep.block_size: must be >= 1")

    functional = None
    fsec = data.get("functional", {})
    fkind = fsec.get("kind", "bounded_projection")
    if basis is not None:
        try:
            if fkind == "bounded_projection":
                if "w" in fsec:
                    w = np.asarray(fsec["w"], dtype=float)
                    if w.shape != (basis.N,):
                        raise ConfigError(
                            f"functional.w: expected {basis.N} coefficients"
                        )
                elif fsec.get("w_preset", "first_mode") == "first_mode":
                    w = np.zeros(basis.N)
                    w[0] = 1.0
                else:
                    raise ConfigError(
                        "functional.w_preset: unknown preset "
                        f"'{fsec.get('w_preset')}'"
                    )
                functional = TestFunctional(
                    "bounded_projection", w=w, c=float(fsec.get("c", 0.0))
                )
            elif fkind == "gaussian_bump":
                functional = TestFunctional("gaussian_bump")
            else:
                raise ConfigError(f"functional.kind: unknown kind '{fkind}'")
        except ConfigError as exc:
            fail(str(exc))

    fbar_sec = data.get("fbar", {})
    fbar_mode = fbar_sec.get("mode", "oracle")
    if fbar_mode not in ("oracle", "ergodic"):
        fail(f"fbar.mode: must be 'oracle' or 'ergodic', got '{fbar_mode}'")
    elif fbar_mode == "oracle" and reaction is not None and coupling is not None:
        if not reaction.is_zero:
            fail("fbar.mode: 'oracle' requires a zero reaction term")
        if coupling.kind != "separable":
            fail("fbar.mode: 'oracle' requires a separable coupling")
    if fbar_mode == "ergodic" and int(fbar_sec.get("n", 2000)) < 1:
        fail("fbar.n: must be >= 1")

    if errors:
        return None, errors

    sys = SystemSpec(
        basis=basis, q1=q1, q2=q2, sigma1=sigma1, sigma2=sigma2,
        reaction=reaction, coupling=coupling,
    )
    cfg = ExperimentConfig(
        data=data, basis=basis, system=sys, x0=x0, y0=y0,
        functional=functional, epsilons=eps, replicas=replicas,
        base_seed=base_seed, block_size=block_size, h_slow=h_slow, T=T,
        micro_ratio=micro_ratio,
        fast_step_max=None if fast_step_max is None else float(fast_step_max),
        adaptive_substeps=adaptive, fbar_mode=fbar_mode,
        fbar_options=dict(fbar_sec), diagnostics=dict(data.get("diagnostics", {})),
    )
    return cfg, []
