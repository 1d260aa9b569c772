"""Run configuration: JSON schema, validation, and round-tripping.

A config fully determines a run: model rates, incidence kind, generator
matrix, initial condition, horizon, tolerances, ensemble size, seed, and
histogram layout. Parsing validates through the model and chain modules so
a bad config fails before any simulation starts, with a machine-readable
error report.

Environment variables prefixed ``SIRS_PDMP_`` (e.g. ``SIRS_PDMP_SEED``)
fill in missing scalar keys; explicit config keys win over the environment,
and command-line flags win over both.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, SirsPdmpError
from .incidence import IncidenceFunction, make_incidence
from .markov import CtmcGenerator, validate_generator
from .model import EpidemicState, ModelParams

ENV_PREFIX = "SIRS_PDMP_"
#: top-level scalar keys that may come from the environment
ENV_KEYS = {
    "seed": int,
    "horizon": float,
    "n_paths": int,
    "output_dt": float,
    "out_dir": str,
    "threads": int,
}


@dataclass(frozen=True)
class OdeSettings:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10


@dataclass(frozen=True)
class HistogramSettings:
    bins: int = 64
    max_support: int = 200_000


@dataclass(frozen=True)
class RunConfig:
    """Validated run description (see README for the JSON schema)."""

    params: dict
    incidence: dict
    q_matrix: list
    initial_state: tuple[float, float, float] = (50.0, 1.0, 0.0)
    initial_regime: int = 0
    horizon: float = 1000.0
    output_dt: float = 1.0
    ode: OdeSettings = OdeSettings()
    n_paths: int = 1
    seed: int = 0
    burn_in: float | None = None
    histogram: HistogramSettings = HistogramSettings()
    out_dir: str = "out"
    threads: int = 1

    def model_params(self) -> ModelParams:
        try:
            return ModelParams(
                lambda_in=float(self.params["lambda_in"]),
                mu=float(self.params["mu"]),
                lambda_loss=float(self.params.get("lambda_loss", 0.0)),
                alpha=float(self.params.get("alpha", 0.0)),
                delta=float(self.params.get("delta", 0.0)),
                betas=tuple(float(b) for b in self.params["betas"]),
            )
        except KeyError as exc:
            raise ConfigError(f"params missing key {exc}") from exc
        except (TypeError, ValueError, SirsPdmpError) as exc:
            raise ConfigError(f"invalid params: {exc}") from exc

    def incidence_function(self) -> IncidenceFunction:
        spec = dict(self.incidence)
        kind = spec.pop("kind", None)
        if kind is None:
            raise ConfigError("incidence needs a 'kind' key")
        try:
            return make_incidence(kind, **spec)
        except (TypeError, SirsPdmpError) as exc:
            raise ConfigError(f"invalid incidence: {exc}") from exc

    def generator(self) -> CtmcGenerator:
        try:
            return validate_generator(self.q_matrix)
        except SirsPdmpError as exc:
            raise ConfigError(f"invalid q_matrix: {exc}") from exc

    def initial(self) -> EpidemicState:
        try:
            return EpidemicState(*self.initial_state)
        except (TypeError, SirsPdmpError) as exc:
            raise ConfigError(f"invalid initial_state: {exc}") from exc

    def validate(self) -> None:
        """Cross-validate all pieces; raises ConfigError on any defect."""
        p = self.model_params()
        gen = self.generator()
        if p.n_regimes != gen.n_regimes:
            raise ConfigError(
                f"betas has {p.n_regimes} regimes but q_matrix is "
                f"{gen.n_regimes}x{gen.n_regimes}"
            )
        if not 0 <= self.initial_regime < gen.n_regimes:
            raise ConfigError(
                f"initial_regime {self.initial_regime} out of range "
                f"0..{gen.n_regimes - 1}"
            )
        self.incidence_function()
        self.initial()
        if not self.horizon > 0:
            raise ConfigError("horizon must be > 0")
        if not self.output_dt > 0:
            raise ConfigError("output_dt must be > 0")
        if self.n_paths < 1:
            raise ConfigError("n_paths must be >= 1")
        if self.burn_in is not None and not 0 <= self.burn_in < self.horizon:
            raise ConfigError("burn_in must lie in [0, horizon)")
        if self.ode.rel_tol <= 0 or self.ode.abs_tol <= 0:
            raise ConfigError("ode tolerances must be > 0")
        if self.histogram.bins < 2:
            raise ConfigError("histogram.bins must be >= 2")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")

    def effective_burn_in(self) -> float:
        return 0.1 * self.horizon if self.burn_in is None else self.burn_in

    def to_dict(self) -> dict:
        d = asdict(self)
        d["initial_state"] = list(self.initial_state)
        return d

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)


def _env_defaults() -> dict:
    out = {}
    for key, cast in ENV_KEYS.items():
        raw = os.environ.get(ENV_PREFIX + key.upper())
        if raw is not None:
            try:
                out[key] = cast(raw)
            except ValueError as exc:
                raise ConfigError(f"bad environment value for {key}: {raw!r} ({exc})")
    return out


def config_from_dict(data: dict) -> RunConfig:
    """Build and validate a RunConfig from a parsed JSON object."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    known = {
        "params",
        "incidence",
        "q_matrix",
        "initial_state",
        "initial_regime",
        "horizon",
        "output_dt",
        "ode",
        "n_paths",
        "seed",
        "burn_in",
        "histogram",
        "out_dir",
        "threads",
    }
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for req in ("params", "incidence", "q_matrix"):
        if req not in data:
            raise ConfigError(f"config is missing required key {req!r}")

    merged = {**_env_defaults(), **data}
    try:
        ode_settings = OdeSettings(**merged.get("ode", {}))
        hist_settings = HistogramSettings(**merged.get("histogram", {}))
        cfg = RunConfig(
            params=dict(merged["params"]),
            incidence=dict(merged["incidence"]),
            q_matrix=[list(map(float, row)) for row in merged["q_matrix"]],
            initial_state=tuple(float(v) for v in merged.get("initial_state", (50.0, 1.0, 0.0))),
            initial_regime=int(merged.get("initial_regime", 0)),
            horizon=float(merged.get("horizon", 1000.0)),
            output_dt=float(merged.get("output_dt", 1.0)),
            ode=ode_settings,
            n_paths=int(merged.get("n_paths", 1)),
            seed=int(merged.get("seed", 0)),
            burn_in=None if merged.get("burn_in") is None else float(merged["burn_in"]),
            histogram=hist_settings,
            out_dir=str(merged.get("out_dir", "out")),
            threads=int(merged.get("threads", 1)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed config value: {exc}") from exc
    cfg.validate()
    return cfg


def load_config(path: str | Path) -> RunConfig:
    """Read, parse, and validate a JSON config file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)


def error_report(exc: Exception) -> dict:
    """Machine-readable error payload for CLI output."""
    return {"error": type(exc).__name__, "message": str(exc)}
