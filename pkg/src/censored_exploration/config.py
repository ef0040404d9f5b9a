"""Experiment configuration: JSON file <-> simulator config and policy templates."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ._validation import DomainError
from .models import Family, VenueModel
from .policies import POLICY_KINDS
from .simulator import SimConfig

METRICS = ("filled_fraction", "half_life")

# parameters each policy kind accepts in the config file (n_venues, v_cap, venues are implied)
POLICY_PARAMS = {
    "learner-km": {"epsilon", "delta", "explore_const"},
    "learner-parametric": {"family", "refit_every"},
    "ideal": set(),
    "uniform": set(),
    "bandit": {"alpha"},
}


class ConfigError(ValueError):
    """Malformed configuration; ``field`` names the offending entry."""

    def __init__(self, field, message, line=None):
        self.field = field
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{field}: {message}")


@dataclass
class PolicySpec:
    kind: str
    name: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.name:
            self.name = self.kind

    def build(self, sim: SimConfig):
        """Return an unobserved policy template for ``sim``."""
        cls = POLICY_KINDS[self.kind]
        if self.kind == "ideal":
            return cls(venues=list(sim.venues))
        implied = {"n_venues": sim.n_venues}
        if self.kind.startswith("learner"):
            implied["v_cap"] = sim.volume.v_max
        return cls(**implied, **self.params)

    def to_dict(self):
        return {"kind": self.kind, "name": self.name, **self.params}


@dataclass
class ExperimentConfig:
    sim: SimConfig
    policies: list
    output_path: str = "results"
    metrics: tuple = ("filled_fraction",)

    def to_dict(self):
        return {
            "sim": self.sim.to_dict(),
            "policies": [p.to_dict() for p in self.policies],
            "output": {"path": self.output_path, "metrics": list(self.metrics)},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _require(obj, key, where):
    if not isinstance(obj, dict):
        raise ConfigError(where, "expected an object")
    if key not in obj:
        raise ConfigError(f"{where}.{key}" if where else key, "missing")
    return obj[key]


def _parse_venue(entry, where):
    if not isinstance(entry, dict):
        raise ConfigError(where, "expected an object")
    try:
        family = Family.parse(_require(entry, "family", where))
        if family is not Family.NONPARAMETRIC:
            _require(entry, "s_max", where)
        else:
            _require(entry, "pmf", where)
        return VenueModel.from_dict(entry)
    except (DomainError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(where, str(exc)) from None


def _parse_policy(entry, idx):
    where = f"policies[{idx}]"
    kind = _require(entry, "kind", where)
    if kind not in POLICY_PARAMS:
        raise ConfigError(f"{where}.kind", f"unknown policy kind {kind!r}")
    params = {k: v for k, v in entry.items() if k not in ("kind", "name")}
    extra = set(params) - POLICY_PARAMS[kind]
    if extra:
        raise ConfigError(f"{where}.{sorted(extra)[0]}", f"not a parameter of {kind}")
    if "family" in params:
        try:
            params["family"] = Family.parse(params["family"]).value
        except DomainError as exc:
            raise ConfigError(f"{where}.family", str(exc)) from None
    for key in ("epsilon", "delta", "explore_const", "alpha", "refit_every"):
        if key in params and not isinstance(params[key], (int, float)):
            raise ConfigError(f"{where}.{key}", "expected a number")
    if "refit_every" in params and (params["refit_every"] < 1 or params["refit_every"] % 1):
        raise ConfigError(f"{where}.refit_every", "expected a positive integer")
    if "alpha" in params and not params["alpha"] > 1:
        raise ConfigError(f"{where}.alpha", "must exceed 1")
    if "delta" in params and not 0 < params["delta"] < 1:
        raise ConfigError(f"{where}.delta", "must lie in (0, 1)")
    for key in ("epsilon", "explore_const"):
        if key in params and not params[key] > 0:
            raise ConfigError(f"{where}.{key}", "must be positive")
    return PolicySpec(kind, entry.get("name", kind), params)


def config_from_dict(data: dict) -> ExperimentConfig:
    sim = _require(data, "sim", "")
    venues = _require(sim, "venues", "sim")
    if not isinstance(venues, list) or not venues:
        raise ConfigError("sim.venues", "expected a nonempty list")
    models = [_parse_venue(v, f"sim.venues[{i}]") for i, v in enumerate(venues)]
    known = {"venues", "volume", "episodes", "trials", "seed", "half_life_cap", "smoothing",
             "half_life_every"}
    extra = set(sim) - known
    if extra:
        raise ConfigError(f"sim.{sorted(extra)[0]}", "unknown field")
    kwargs = {k: sim[k] for k in known - {"venues"} if k in sim}
    for key in ("episodes", "trials", "seed", "half_life_cap", "half_life_every"):
        if key in kwargs and (not isinstance(kwargs[key], int) or isinstance(kwargs[key], bool)):
            raise ConfigError(f"sim.{key}", "expected an integer")
    try:
        sim_config = SimConfig(models, **kwargs)
    except (DomainError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError("sim", str(exc)) from None

    policies = _require(data, "policies", "")
    if not isinstance(policies, list) or not policies:
        raise ConfigError("policies", "expected a nonempty list")
    specs = [_parse_policy(p, i) for i, p in enumerate(policies)]
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ConfigError("policies", "policy names must be unique")

    output = data.get("output", {})
    if not isinstance(output, dict):
        raise ConfigError("output", "expected an object")
    metrics = tuple(output.get("metrics", ["filled_fraction"]))
    bad = [m for m in metrics if m not in METRICS]
    if bad or not metrics:
        raise ConfigError("output.metrics", f"expected a nonempty subset of {list(METRICS)}")
    return ExperimentConfig(sim_config, specs, str(output.get("path", "results")), metrics)


def loads(text: str) -> ExperimentConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("json", exc.msg, line=exc.lineno) from None
    return config_from_dict(data)


def load(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
