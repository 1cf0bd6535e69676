"""Experiment configuration: TOML file, documented defaults, strict validation.

Layout (every key optional unless noted)::

    [model]
    n_sites = 64            # or a list for a chain-length sweep
    axis_angle = 0.0        # radians, field axis in the XY plane
    [model.field]
    kind = "staggered"      # uniform | staggered | sinusoidal | gaussian | explicit (required)
    h0 = 2.0                # uniform, staggered
    amplitude = 1.0         # sinusoidal
    wave_number = 0.1       # sinusoidal, in (0, pi]
    std_dev = 0.3           # gaussian
    path = "field.txt"      # explicit: one value per line
    sweep = [0.5, 1.0]      # values of the amplitude parameter (h0 / amplitude / std_dev)

    [engine]
    max_bond = 64
    cutoff = 1e-10
    keep_degenerate = true
    bias_angle = 1.5707963267948966
    init_seed = 0
    warm_start = false
    check_every = 10
    alarm_threshold = 1e-4
    stages = [[0.1, 4000, 1e-11], [0.03, 2000, 1e-10], [0.01, 2000, 1e-10]]

    [ensemble]
    master_seed = 0
    count = 1               # realizations per sweep point (gaussian fields)
    seeds = []              # explicit per-realization seeds; overrides count

    [analysis]
    boundary_exclusion = 3
    correlation_length = false
    beta_window = [0.02, 0.2]
    h_c = 2.915             # reference critical field for the order-parameter fit
    onset_threshold = 0.05
    island_floor = 0.05
    nu = 0.57
    inverse_delta = 0.14

    [output]
    directory = "results"
    save_states = false

Sites are numbered from 1, so a staggered field starts with ``-h0``.
Per-realization field seeds come from ``SeedSequence(master_seed).spawn(count)``;
child ``k`` yields the seed ``generate_state(1, uint64)[0]``.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..model import GaussianRandom, Sinusoidal, Staggered, Uniform, load_explicit_field
from ..tebd import DEFAULT_STAGES

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


FIELD_KINDS = ("uniform", "staggered", "sinusoidal", "gaussian", "explicit")
AMPLITUDE_KEY = {"uniform": "h0", "staggered": "h0", "sinusoidal": "amplitude",
                 "gaussian": "std_dev", "explicit": None}

DEFAULTS = {
    "model": {
        "n_sites": 64,
        "axis_angle": 0.0,
        "field": {"kind": None, "h0": 0.0, "amplitude": 1.0, "wave_number": math.pi / 2,
                  "std_dev": 0.0, "path": "", "sweep": []},
    },
    "engine": {
        "max_bond": 64,
        "cutoff": 1e-10,
        "keep_degenerate": True,
        "bias_angle": math.pi / 2,
        "init_seed": 0,
        "warm_start": False,
        "check_every": 10,
        "alarm_threshold": 1e-4,
        "stages": [[s.dt, s.max_sweeps, s.tol] for s in DEFAULT_STAGES],
    },
    "ensemble": {"master_seed": 0, "count": 1, "seeds": []},
    "analysis": {
        "boundary_exclusion": 3,
        "correlation_length": False,
        "beta_window": [0.02, 0.2],
        "h_c": 2.915,
        "onset_threshold": 0.05,
        "island_floor": 0.05,
        "nu": 0.57,
        "inverse_delta": 0.14,
    },
    "output": {"directory": "results", "save_states": False},
}


def _merge(base: dict, update: dict, path: str = ""):
    for key, value in update.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown key '{where}'")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"'{where}' must be a table")
            _merge(base[key], value, where + ".")
        else:
            base[key] = value


def _parse_value(text: str):
    """Interpret a --set value as a TOML value, falling back to a bare string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_override(raw: dict, assignment: str):
    """Apply ``dotted.key=value`` to a raw config dict in place."""
    if "=" not in assignment:
        raise ConfigError(f"override '{assignment}' is not of the form key=value")
    key, text = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = raw
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override '{key}' descends into a non-table")
    node[parts[-1]] = _parse_value(text.strip())


def _check(cond: bool, where: str, message: str):
    if not cond:
        raise ConfigError(f"{where}: {message}")


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated configuration; ``data`` holds the full merged table."""

    data: dict
    base_dir: Path

    @property
    def model(self) -> dict:
        return self.data["model"]

    @property
    def field(self) -> dict:
        return self.data["model"]["field"]

    @property
    def engine(self) -> dict:
        return self.data["engine"]

    @property
    def ensemble(self) -> dict:
        return self.data["ensemble"]

    @property
    def analysis(self) -> dict:
        return self.data["analysis"]

    @property
    def output(self) -> dict:
        return self.data["output"]

    @property
    def kind(self) -> str:
        return self.field["kind"]

    def chain_lengths(self) -> list[int]:
        n = self.model["n_sites"]
        return list(n) if isinstance(n, list) else [n]

    def sweep_values(self) -> list:
        """Amplitude values to run; a single value when no sweep list is given."""
        key = AMPLITUDE_KEY[self.kind]
        if key is None:
            return [None]
        return list(self.field["sweep"]) or [self.field[key]]

    def field_seeds(self) -> list[int]:
        """Per-realization seeds for random fields (a single 0 otherwise)."""
        if self.kind != "gaussian":
            return [0]
        if self.ensemble["seeds"]:
            return list(self.ensemble["seeds"])
        return spawn_seeds(self.ensemble["master_seed"], self.ensemble["count"])

    def field_spec(self, value, seed: int):
        kind = self.kind
        f = self.field
        if kind == "uniform":
            return Uniform(float(value))
        if kind == "staggered":
            return Staggered(float(value))
        if kind == "sinusoidal":
            return Sinusoidal(float(value), float(f["wave_number"]))
        if kind == "gaussian":
            return GaussianRandom(float(value), int(seed))
        path = Path(f["path"])
        if not path.is_absolute():
            path = self.base_dir / path
        return load_explicit_field(path)

    def physics_hash(self) -> str:
        """Hash of everything that affects results (output settings excluded)."""
        payload = {k: v for k, v in self.data.items() if k != "output"}
        text = json.dumps(payload, sort_keys=True, default=repr)
        return hashlib.sha256(text.encode()).hexdigest()

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)


def spawn_seeds(master_seed: int, count: int) -> list[int]:
    """Independent 64-bit seeds from a master seed via ``SeedSequence.spawn``."""
    children = np.random.SeedSequence(master_seed).spawn(count)
    return [int(c.generate_state(1, np.uint64)[0]) for c in children]


def validate(data: dict):
    m = data["model"]
    f = m["field"]
    e = data["engine"]
    ens = data["ensemble"]
    a = data["analysis"]

    n = m["n_sites"]
    ns = n if isinstance(n, list) else [n]
    _check(len(ns) > 0, "model.n_sites", "list must not be empty")
    for v in ns:
        _check(_is_int(v) and v >= 2, "model.n_sites", f"must be an integer >= 2, got {v!r}")
    _check(_is_number(m["axis_angle"]), "model.axis_angle", "must be a number")

    _check(f["kind"] in FIELD_KINDS, "model.field.kind", f"must be one of {FIELD_KINDS}, got {f['kind']!r}")
    for key in ("h0", "amplitude", "wave_number", "std_dev"):
        _check(_is_number(f[key]), f"model.field.{key}", "must be a number")
    _check(0 < f["wave_number"] <= math.pi, "model.field.wave_number", "must lie in (0, pi]")
    _check(f["std_dev"] >= 0, "model.field.std_dev", "must be >= 0")
    _check(isinstance(f["sweep"], list), "model.field.sweep", "must be a list")
    for v in f["sweep"]:
        _check(_is_number(v), "model.field.sweep", f"entries must be numbers, got {v!r}")
    if f["kind"] == "gaussian":
        _check(all(v >= 0 for v in f["sweep"]), "model.field.sweep", "standard deviations must be >= 0")
    if f["kind"] == "explicit":
        _check(bool(f["path"]), "model.field.path", "required for explicit fields")
        _check(not f["sweep"], "model.field.sweep", "not supported for explicit fields")
    _check(len(set(map(float, f["sweep"]))) == len(f["sweep"]), "model.field.sweep", "values must be distinct")

    _check(_is_int(e["max_bond"]) and e["max_bond"] >= 1, "engine.max_bond", "must be an integer >= 1")
    _check(_is_number(e["cutoff"]) and e["cutoff"] >= 0, "engine.cutoff", "must be >= 0")
    _check(isinstance(e["keep_degenerate"], bool), "engine.keep_degenerate", "must be true or false")
    _check(_is_number(e["bias_angle"]) and 0 <= e["bias_angle"] <= math.pi,
           "engine.bias_angle", "must lie in [0, pi]")
    _check(_is_int(e["init_seed"]) and 0 <= e["init_seed"] < 2**64, "engine.init_seed", "must be a 64-bit unsigned integer")
    _check(isinstance(e["warm_start"], bool), "engine.warm_start", "must be true or false")
    _check(_is_int(e["check_every"]) and e["check_every"] >= 1, "engine.check_every", "must be an integer >= 1")
    _check(_is_number(e["alarm_threshold"]) and e["alarm_threshold"] > 0,
           "engine.alarm_threshold", "must be > 0")
    _check(isinstance(e["stages"], list) and len(e["stages"]) > 0, "engine.stages", "must be a non-empty list")
    prev = math.inf
    for k, s in enumerate(e["stages"]):
        where = f"engine.stages[{k}]"
        _check(isinstance(s, list) and len(s) == 3, where, "must be [dt, max_sweeps, tol]")
        dt, sweeps, tol = s
        _check(_is_number(dt) and dt > 0, where, "dt must be > 0")
        _check(_is_int(sweeps) and sweeps >= 1, where, "max_sweeps must be an integer >= 1")
        _check(_is_number(tol) and tol > 0, where, "tol must be > 0")
        _check(dt < prev, where, "dt must strictly decrease across stages")
        prev = dt

    _check(_is_int(ens["master_seed"]) and ens["master_seed"] >= 0, "ensemble.master_seed", "must be an integer >= 0")
    _check(_is_int(ens["count"]) and ens["count"] >= 1, "ensemble.count", "must be an integer >= 1")
    _check(isinstance(ens["seeds"], list), "ensemble.seeds", "must be a list")
    for s in ens["seeds"]:
        _check(_is_int(s) and 0 <= s < 2**64, "ensemble.seeds", f"entries must be 64-bit unsigned integers, got {s!r}")
    _check(len(set(ens["seeds"])) == len(ens["seeds"]), "ensemble.seeds", "seeds must be distinct")

    excl = a["boundary_exclusion"]
    _check(_is_int(excl) and excl >= 0, "analysis.boundary_exclusion", "must be an integer >= 0")
    _check(all(excl < v / 2 for v in ns), "analysis.boundary_exclusion", "must be smaller than N/2")
    _check(isinstance(a["correlation_length"], bool), "analysis.correlation_length", "must be true or false")
    w = a["beta_window"]
    _check(isinstance(w, list) and len(w) == 2 and all(_is_number(x) for x in w) and 0 < w[0] < w[1],
           "analysis.beta_window", "must be [lo, hi] with 0 < lo < hi")
    for key in ("h_c", "onset_threshold", "island_floor", "nu", "inverse_delta"):
        _check(_is_number(a[key]) and a[key] > 0, f"analysis.{key}", "must be a positive number")

    _check(isinstance(data["output"]["directory"], str), "output.directory", "must be a string")
    _check(isinstance(data["output"]["save_states"], bool), "output.save_states", "must be true or false")


def build_config(raw: dict | None = None, overrides=(), base_dir=".") -> ExperimentConfig:
    """Merge ``raw`` and ``key=value`` overrides over the defaults and validate."""
    raw = copy.deepcopy(raw or {})
    for item in overrides:
        apply_override(raw, item)
    data = copy.deepcopy(DEFAULTS)
    _merge(data, raw)
    validate(data)
    return ExperimentConfig(data, Path(base_dir))


def load_config(path=None, overrides=()) -> ExperimentConfig:
    """Read a TOML config file (or none) and apply overrides."""
    raw = {}
    base = Path(".")
    if path is not None:
        path = Path(path)
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        base = path.parent
    return build_config(raw, overrides, base)
