"""
Run configuration.

A run is described by a TOML file and command-line overrides. Top-level
keys map onto :class:`RunConfig` fields; the ``[model]`` table names a
Cannings model, ``[intensity]`` an explicit limit intensity, and
``[experiment]`` holds the parameter sweeps of the delta-model commands.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import daiquiri

from .exceptions import ConfigurationError

__all__ = ["RunConfig", "load_config", "COMMANDS"]

logger = daiquiri.getLogger(__name__)

COMMANDS = ("pedigree", "quenched", "limit", "naive", "sfs", "vardecomp", "selftest")

# flat options forwarded into the model table when the model takes them
_MODEL_OPTIONS = {
    "large-family-couple": {"psi": "psi", "gamma": "gamma"},
    "large-family-individual": {"psi": "psi", "gamma": "gamma"},
    "random-fitness": {"alpha": "alpha"},
    "gw-couples": {"alpha": "alpha"},
    "two-sex": {"lam": "lam", "psi": "beta"},
}

# fields that do not change what is computed
_RUNTIME_ONLY = ("out", "threads", "log_level")


@dataclass(frozen=True)
class RunConfig:
    """Validated parameters of one command."""

    command: str
    seed: int | None = None
    out: str = "out"
    threads: int = 1
    log_level: str = "WARNING"
    n: int = 2
    N: int = 100
    model: Mapping[str, Any] = field(default_factory=lambda: {"name": "wf"})
    intensity: Mapping[str, Any] | None = None
    psi: float | None = None
    lam: float | None = None
    alpha: float | None = None
    eps: float | None = None
    gamma: float | None = None
    c_pair: float | None = None
    loci: int = 100
    pedigrees: int = 10
    replicates: int = 1000
    horizon: float | None = None
    generations: int = 10
    mc_reps: int = 0
    theta: float | None = None
    sampler: str = "flow"
    psi_file: str | None = None
    fixed_psi: bool = False
    trajectories: bool = False
    time_unit: str = "pair"
    psi_grid: tuple[float, ...] = ()
    lambdas: tuple[float, ...] = ()
    total_pedigrees: int | None = None

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ConfigurationError(f"unknown command {self.command!r}; choose from {', '.join(COMMANDS)}")
        if self.seed is None:
            raise ConfigurationError("a seed is required (--seed or 'seed' in the config file)")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigurationError(f"seed must be a nonnegative integer, got {self.seed!r}")
        if self.threads == 0 or self.threads < -1:
            raise ConfigurationError("threads must be positive, or -1 for all cores")
        if self.n < 1:
            raise ConfigurationError(f"sample size n must be at least 1, got {self.n}")
        if self.N < 2:
            raise ConfigurationError(f"population size N must be at least 2, got {self.N}")
        for name in ("loci", "pedigrees", "replicates"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be at least 1")
        if self.generations < 0 or self.mc_reps < 0:
            raise ConfigurationError("generations and mc_reps must be nonnegative")
        if self.psi is not None and not 0 < self.psi <= 1:
            raise ConfigurationError(f"psi must lie in (0, 1], got {self.psi}")
        for psi in self.psi_grid:
            if not 0 < psi <= 1:
                raise ConfigurationError(f"psi grid value {psi} outside (0, 1]")
        for lam in (self.lam, *self.lambdas):
            if lam is not None and not lam > 0:
                raise ConfigurationError(f"lambda must be positive, got {lam}")
        if self.alpha is not None and not 1 < self.alpha < 2:
            raise ConfigurationError(f"alpha must lie in (1, 2), got {self.alpha}")
        if self.eps is not None and not self.eps > 0:
            raise ConfigurationError(f"eps must be positive, got {self.eps}")
        if self.gamma is not None and not self.gamma > 0:
            raise ConfigurationError(f"gamma must be positive, got {self.gamma}")
        if self.c_pair is not None and self.c_pair < 0:
            raise ConfigurationError("c_pair must be nonnegative")
        if self.horizon is not None and not 0 < self.horizon < math.inf:
            raise ConfigurationError("horizon must be positive and finite")
        if self.theta is not None and self.theta < 0:
            raise ConfigurationError("theta must be nonnegative")
        if self.sampler not in ("flow", "jump-hold"):
            raise ConfigurationError(f"unknown sampler {self.sampler!r}")
        if self.time_unit not in ("pair", "kingman"):
            raise ConfigurationError(f"unknown time unit {self.time_unit!r}")
        if "name" not in self.model:
            raise ConfigurationError("the [model] table needs a 'name'")
        if self.psi_file is not None and not Path(self.psi_file).is_file():
            raise ConfigurationError(f"Psi path file {self.psi_file!r} not found")
        return self

    def model_spec(self) -> dict[str, Any]:
        """The ``[model]`` table completed with ``N`` and the matching flat options."""
        spec = dict(self.model)
        spec["N"] = self.N
        for option, key in _MODEL_OPTIONS.get(spec["name"], {}).items():
            value = getattr(self, option)
            if value is not None:
                spec[key] = value
        return spec

    def to_dict(self) -> dict[str, Any]:
        data = dataclasses.asdict(self)
        data["model"] = dict(self.model)
        data["intensity"] = dict(self.intensity) if self.intensity is not None else None
        data["psi_grid"] = list(self.psi_grid)
        data["lambdas"] = list(self.lambdas)
        return data

    def parameters(self) -> dict[str, Any]:
        """Everything that determines the outputs."""
        data = self.to_dict()
        for key in _RUNTIME_ONLY:
            data.pop(key)
        return data

    def digest(self) -> str:
        text = json.dumps(self.parameters(), sort_keys=True, default=str)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _flatten(data: Mapping[str, Any]) -> dict[str, Any]:
    flat = {k: v for k, v in data.items() if k != "experiment"}
    experiment = data.get("experiment", {})
    if not isinstance(experiment, Mapping):
        raise ConfigurationError("[experiment] must be a table")
    flat.update(experiment)
    model = flat.get("model")
    if isinstance(model, Mapping) and "N" in model:
        model = dict(model)
        flat.setdefault("N", model.pop("N"))
        flat["model"] = model
    if isinstance(model, str):
        flat["model"] = {"name": model}
    for key in ("psi_grid", "lambdas"):
        if key in flat:
            flat[key] = tuple(float(x) for x in flat[key])
    return flat


def load_config(
    command: str, path: str | Path | None = None, overrides: Mapping[str, Any] | None = None
) -> RunConfig:
    """
    Read ``path`` (TOML) if given, apply ``overrides`` and validate.

    Overrides whose value is ``None`` are ignored; a ``model`` override
    given as a string replaces the model name.
    """
    data: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "rb") as f:
                data = _flatten(tomllib.load(f))
        except FileNotFoundError:
            raise ConfigurationError(f"config file {str(path)!r} not found") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigurationError(f"cannot parse {str(path)!r}: {exc}") from None
        logger.debug("read config %s", path)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "model" and isinstance(value, str):
            model = dict(data.get("model", {}))
            if model.get("name") != value:
                model = {"name": value}
            data["model"] = model
        elif key in ("psi_grid", "lambdas"):
            data[key] = tuple(float(x) for x in value)
        else:
            data[key] = value
    names = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigurationError(f"unknown configuration keys: {', '.join(unknown)}")
    data["command"] = command
    return RunConfig(**data).validate()
