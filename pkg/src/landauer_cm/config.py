"""Scenario configuration: flat ``key = value`` files, validation and presets."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any

from .errors import ConfigError
from .models import BathSpec, CouplingSpec

SCENARIOS = ("single", "cascade", "indirect_qubit", "indirect_oscillator")
MODES = ("continuous", "discrete", "both")
SWEEP_PARAMS = ("J", "gamma_g", "beta", "N")


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got '{text}'")


def _parse_float(text: str) -> float:
    v = float(text)
    if math.isnan(v):
        raise ValueError("NaN is not allowed")
    return v


def _parse_list(text: str) -> tuple[float, ...]:
    body = text.strip()
    if body.startswith("[") and body.endswith("]"):
        body = body[1:-1]
    items = [s for s in (p.strip() for p in body.split(",")) if s]
    return tuple(_parse_float(s) for s in items)


def _parse_state(text: str) -> str | tuple[str, ...]:
    parts = tuple(p.strip() for p in text.split(","))
    if any(not p for p in parts):
        raise ValueError("empty entry in state list")
    return parts[0] if len(parts) == 1 else parts


# config key -> (dataclass field, parser)
KEYS: dict[str, tuple[str, Any]] = {
    "preset": ("preset", str),
    "scenario": ("scenario", str),
    "name": ("name", str),
    "mode": ("mode", str),
    "system.n_qubits": ("n_qubits", int),
    "bath.beta": ("beta", _parse_float),
    "bath.xi": ("xi", _parse_float),
    "bath.omega": ("omega", _parse_float),
    "coupling.gamma": ("gamma", _parse_float),
    "coupling.g": ("g", _parse_float),
    "coupling.tau": ("tau", _parse_float),
    "coupling.J": ("J", _parse_float),
    "coupling.gamma_g": ("gamma_g", _parse_float),
    "fock.dim": ("fock_dim", int),
    "fock.strict": ("fock_strict", _parse_bool),
    "state.initial": ("initial_state", _parse_state),
    "time.t_max": ("t_max", _parse_float),
    "time.dt": ("dt", _parse_float),
    "time.save_every": ("save_every", int),
    "output.dir": ("output", str),
    "sweep.param": ("sweep_param", str),
    "sweep.values": ("sweep_values", _parse_list),
    "run.workers": ("workers", int),
    "analysis.literal_heat": ("literal_heat", _parse_bool),
}
FIELD_TO_KEY = {f: k for k, (f, _) in KEYS.items()}
_RATE_GROUP = ("coupling.gamma", "coupling.gamma_g", "coupling.g", "coupling.tau")
_TEMP_GROUP = ("bath.beta", "bath.xi")


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated run configuration. Build with :func:`parse_config` or :func:`from_mapping`."""

    scenario: str
    t_max: float | None = None
    n_qubits: int = 2
    beta: float | None = None
    xi: float | None = None
    omega: float = 1.0
    gamma: float | None = None
    g: float | None = None
    tau: float | None = None
    J: float = 0.0
    gamma_g: float | None = None
    fock_dim: int = 20
    fock_strict: bool = False
    initial_state: str | tuple[str, ...] | None = None
    dt: float | None = None
    save_every: int | None = None
    mode: str = "continuous"
    output: str = "runs"
    name: str | None = None
    sweep_param: str | None = None
    sweep_values: tuple[float, ...] | None = None
    workers: int = 1
    literal_heat: bool = False
    preset: str | None = None
    lines: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        self._validate()

    # -- validation -------------------------------------------------------
    def _fail(self, key: str, msg: str):
        raise ConfigError(msg, key=key, line=self.lines.get(key))

    def _validate(self):
        if self.scenario not in SCENARIOS:
            self._fail("scenario", f"unknown scenario '{self.scenario}'; "
                                   f"expected one of {', '.join(SCENARIOS)}")
        if self.mode not in MODES:
            self._fail("mode", f"unknown mode '{self.mode}'")
        if self.scenario == "cascade" and self.n_qubits < 2:
            self._fail("system.n_qubits", "cascade needs n_qubits >= 2")
        if not self.omega > 0:
            self._fail("bath.omega", "omega must be positive")
        if (self.beta is None) == (self.xi is None):
            self._fail("bath.beta", "give exactly one of bath.beta and bath.xi")
        if self.xi is not None and not -1 < self.xi < 1:
            self._fail("bath.xi", "xi must lie strictly between -1 and 1")
        if self.beta is not None and (math.isinf(self.beta) or self.beta < 0):
            self._fail("bath.beta", "beta must be finite and non-negative "
                                    "(use bath.xi < 0 for an inverted bath)")
        self._validate_rates()
        if self.J < 0:
            self._fail("coupling.J", "J must be non-negative")
        if self.scenario not in ("indirect_qubit", "indirect_oscillator") and self.J:
            self._fail("coupling.J", "J only applies to indirect scenarios")
        if self.fock_dim < 2:
            self._fail("fock.dim", "fock.dim must be at least 2")
        if self.t_max is not None and not self.t_max > 0:
            self._fail("time.t_max", "t_max must be positive")
        if self.dt is not None and not self.dt > 0:
            self._fail("time.dt", "dt must be positive")
        if self.save_every is not None and self.save_every < 1:
            self._fail("time.save_every", "save_every must be >= 1")
        if self.workers < 1:
            self._fail("run.workers", "workers must be >= 1")
        if (self.sweep_param is None) != (self.sweep_values is None):
            key = "sweep.values" if self.sweep_param is not None else "sweep.param"
            self._fail(key, "sweep.param and sweep.values go together")
        if self.sweep_param is not None:
            if self.sweep_param not in SWEEP_PARAMS:
                self._fail("sweep.param", f"cannot sweep '{self.sweep_param}'; "
                                          f"expected one of {', '.join(SWEEP_PARAMS)}")
            if not self.sweep_values:
                self._fail("sweep.values", "sweep needs at least one value")
            if self.sweep_param == "N" and self.scenario not in ("single", "cascade"):
                self._fail("sweep.param", "N sweeps need the cascade scenario")
            if self.sweep_param == "N" and any(v < 1 or v != int(v) for v in self.sweep_values):
                self._fail("sweep.values", "N values must be positive integers")

    def _validate_rates(self):
        indirect = self.is_indirect
        rate_key = "coupling.gamma_g" if indirect else "coupling.gamma"
        other_key = "coupling.gamma" if indirect else "coupling.gamma_g"
        if getattr(self, KEYS[other_key][0]) is not None:
            self._fail(other_key, f"{other_key} does not apply to scenario "
                                  f"'{self.scenario}'; use {rate_key}")
        rate = getattr(self, KEYS[rate_key][0])
        has_gt = self.g is not None or self.tau is not None
        if has_gt and (self.g is None or self.tau is None):
            self._fail("coupling.g" if self.g is None else "coupling.tau",
                       "coupling.g and coupling.tau must be given together")
        if self.mode == "continuous":
            if rate is not None and has_gt:
                self._fail(rate_key, f"conflict: both {rate_key} and (coupling.g, "
                                     "coupling.tau) given; keep one")
            if rate is None and not has_gt:
                self._fail(rate_key, f"missing {rate_key} (or coupling.g with coupling.tau)")
        else:
            if not has_gt:
                self._fail("coupling.g", f"mode '{self.mode}' needs coupling.g and coupling.tau")
            if rate is not None and not math.isclose(rate, self.g ** 2 * self.tau,
                                                     rel_tol=1e-12):
                self._fail(rate_key, f"{rate_key}={rate} disagrees with g^2 tau")
        for key in ("coupling.g", "coupling.tau", rate_key):
            v = getattr(self, KEYS[key][0])
            if v is not None and not v > 0:
                self._fail(key, f"{key} must be positive")

    # -- derived views -----------------------------------------------------
    @property
    def is_indirect(self) -> bool:
        return self.scenario.startswith("indirect")

    @property
    def rate(self) -> float:
        """gamma for single/cascade, gamma_g for indirect scenarios."""
        explicit = self.gamma_g if self.is_indirect else self.gamma
        if explicit is not None:
            return explicit
        return self.g ** 2 * self.tau

    def bath(self) -> BathSpec:
        if self.xi is not None:
            return BathSpec.from_xi(self.xi, self.omega)
        return BathSpec(self.beta, self.omega)

    def coupling(self) -> CouplingSpec:
        if self.is_indirect:
            return CouplingSpec(gamma=self.rate, J=self.J, gamma_g=self.rate)
        return CouplingSpec(gamma=self.rate)

    def discrete_coupling(self) -> CouplingSpec:
        if self.g is None:
            raise ConfigError("discrete runs need coupling.g and coupling.tau", key="coupling.g")
        return CouplingSpec(g=self.g, tau=self.tau, J=self.J,
                            gamma_g=self.rate if self.is_indirect else 0.0)

    @property
    def n_sites(self) -> int:
        if self.scenario == "single":
            return 1
        if self.scenario == "cascade":
            return self.n_qubits
        return 2

    @property
    def default_initial_state(self):
        if self.initial_state is not None:
            return self.initial_state
        if self.scenario == "single":
            return "up"
        if self.scenario == "cascade":
            return "all_up"
        return ("up", "thermal")

    @property
    def horizon(self) -> float:
        """t_max, defaulting to six relaxation times 1/rate."""
        return self.t_max if self.t_max is not None else 6.0 / self.rate

    @property
    def run_id(self) -> str:
        if self.name:
            return self.name
        return self.preset or self.scenario

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def with_sweep_value(self, value: float) -> "ScenarioConfig":
        """Configuration of one sweep point (sweep fields cleared)."""
        p = self.sweep_param
        base = dict(sweep_param=None, sweep_values=None)
        if p == "J":
            return self.replace(J=float(value), **base)
        if p == "gamma_g":
            if self.mode != "continuous":
                raise ConfigError("gamma_g sweeps run in continuous mode", key="sweep.param")
            return self.replace(gamma_g=float(value), g=None, tau=None, **base)
        if p == "beta":
            return self.replace(beta=float(value), xi=None, **base)
        if p == "N":
            n = int(value)
            if n == 1:
                state = self.initial_state
                if state in ("all_up", None):
                    state = "up"
                return self.replace(scenario="single", n_qubits=2, initial_state=state, **base)
            return self.replace(scenario="cascade", n_qubits=n, **base)
        raise ConfigError(f"no sweep parameter set", key="sweep.param")

    def manifest_items(self) -> list[tuple[str, Any]]:
        """Every key with its effective value, in declaration order."""
        out = []
        for key, (fname, _) in KEYS.items():
            out.append((key, getattr(self, fname)))
        return out


# --------------------------------------------------------------------------
# presets

_XI_FIG1 = 0.9
PRESETS: dict[str, dict[str, Any]] = {
    "fig1b": {"scenario": "single", "bath.xi": _XI_FIG1, "coupling.gamma": 1.0,
              "state.initial": "up", "time.t_max": 10.0, "time.dt": 1e-3},
    "fig1b_inset": {"scenario": "single", "bath.xi": -_XI_FIG1, "coupling.gamma": 1.0,
                    "state.initial": "up", "time.t_max": 10.0, "time.dt": 1e-3},
    "fig1c": {"scenario": "cascade", "system.n_qubits": 2, "bath.xi": _XI_FIG1,
              "coupling.gamma": 1.0, "state.initial": "up_up", "time.t_max": 10.0,
              "time.dt": 1e-3},
    "fig1c_inset": {"scenario": "cascade", "system.n_qubits": 2, "bath.xi": -_XI_FIG1,
                    "coupling.gamma": 1.0, "state.initial": "up_up", "time.t_max": 10.0,
                    "time.dt": 1e-3},
    "fig2b": {"scenario": "indirect_qubit", "bath.beta": 10.0, "coupling.J": 0.1,
              "coupling.gamma_g": 0.01, "state.initial": "up, thermal",
              "time.t_max": 100.0, "time.dt": 0.01},
    "fig2d": {"scenario": "indirect_oscillator", "bath.beta": 10.0, "coupling.J": 0.1,
              "coupling.gamma_g": 0.01, "fock.dim": 20, "state.initial": "up, thermal",
              "time.t_max": 100.0, "time.dt": 0.01},
    "fig_supp1": {"scenario": "cascade", "bath.xi": _XI_FIG1, "coupling.gamma": 1.0,
                  "state.initial": "all_up", "time.t_max": 6.0, "time.dt": 1e-3,
                  "sweep.param": "N", "sweep.values": (1, 2, 3, 4, 5)},
    "fig_supp2": {"scenario": "indirect_qubit", "bath.beta": 10.0, "coupling.gamma_g": 0.1,
                  "state.initial": "up, thermal", "time.t_max": 60.0, "time.dt": 0.01,
                  "sweep.param": "J", "sweep.values": (0.1, 0.2, 0.4, 0.8)},
    "fig_supp3": {"scenario": "indirect_qubit", "bath.beta": 10.0, "coupling.J": 0.5,
                  "state.initial": "up, thermal", "time.t_max": 300.0, "time.dt": 0.01,
                  "coupling.gamma_g": 0.1,
                  "sweep.param": "gamma_g", "sweep.values": (0.05, 0.1, 0.2, 0.4)},
}
PRESETS["fig1"] = PRESETS["fig1c"]
PRESETS["fig1d"] = PRESETS["fig1c"]
PRESETS["fig2c"] = {**PRESETS["fig2b"], "bath.beta": 0.5}
PRESETS["fig2e"] = {**PRESETS["fig2d"], "bath.beta": 0.5, "fock.dim": 40}
PRESETS["fig3a"] = PRESETS["fig2d"]
PRESETS["fig3b"] = PRESETS["fig2e"]


def _coerce_preset_value(key: str, value: Any) -> Any:
    parser = KEYS[key][1]
    if isinstance(value, str):
        return parser(value)
    if parser is int:
        return int(value)
    if parser is _parse_float:
        return float(value)
    if parser is _parse_list:
        return tuple(float(v) for v in value)
    return value


def _tokenize(text: str) -> tuple[dict[str, str], dict[str, int]]:
    raw, lines = {}, {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if body.startswith("[") and body.endswith("]"):
            raise ConfigError("section headers are not supported; use dotted keys",
                              line=lineno)
        if "=" not in body:
            raise ConfigError(f"expected 'key = value', got '{body}'", line=lineno)
        key, value = (s.strip() for s in body.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"unknown key '{key}'", key=key, line=lineno)
        if key in raw:
            raise ConfigError(f"duplicate key '{key}'", key=key, line=lineno)
        if not value:
            raise ConfigError("empty value", key=key, line=lineno)
        raw[key], lines[key] = value, lineno
    return raw, lines


def from_mapping(values: dict[str, Any], preset: str | None = None,
                 lines: dict[str, int] | None = None) -> ScenarioConfig:
    """Merge ``values`` (dotted keys, parsed or text) over an optional preset."""
    lines = dict(lines or {})
    values = dict(values)
    preset = values.pop("preset", None) if preset is None else preset
    merged: dict[str, Any] = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset '{preset}'; available: "
                              f"{', '.join(sorted(PRESETS))}", key="preset",
                              line=lines.get("preset"))
        merged.update(PRESETS[preset])
        # user-specified rates or temperatures replace the preset's whole group
        for group in (_RATE_GROUP, _TEMP_GROUP):
            if any(k in values for k in group):
                for k in group:
                    merged.pop(k, None)
    merged.update(values)
    kwargs: dict[str, Any] = {"preset": preset}
    for key, value in merged.items():
        if key not in KEYS:
            raise ConfigError(f"unknown key '{key}'", key=key, line=lines.get(key))
        try:
            kwargs[KEYS[key][0]] = _coerce_preset_value(key, value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value {value!r}: {exc}", key=key,
                              line=lines.get(key)) from None
    if "scenario" not in kwargs:
        raise ConfigError("missing required key 'scenario'", key="scenario")
    field_lines = {k: v for k, v in lines.items()}
    return ScenarioConfig(lines=field_lines, **kwargs)


def parse_config(text: str, preset: str | None = None,
                 overrides: dict[str, Any] | None = None) -> ScenarioConfig:
    """Parse ``key = value`` text (``#`` comments) into a validated config.

    ``preset`` (or a ``preset`` key in the text) supplies defaults that the
    text overrides; ``overrides`` (dotted keys) win over both.
    """
    raw, lines = _tokenize(text)
    if preset is None:
        preset = raw.pop("preset", None)
    else:
        raw.pop("preset", None)
    values: dict[str, Any] = dict(raw)
    if overrides:
        values.update(overrides)
    return from_mapping(values, preset=preset, lines=lines)
