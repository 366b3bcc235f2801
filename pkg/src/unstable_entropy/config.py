"""Experiment configuration: a versioned YAML file with line-referenced errors.

Example::

    schema: 1
    system:
      kind: linear            # linear | bernoulli | markov
      matrix: [[2, 1], [1, 1]]
    partition:
      k: 10
      epsilon0: 0.15
    formulas: [partition]
    n_window: [8, 14]
    deltas: [0.1]
    anchors: 32
    seed: 0
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .errors import ConfigError, UnstableEntropyError
from .measures import measure_for
from .partitions import (DEFAULT_BUDGET, CylinderPartition, build_grid, build_unstable_scheme)
from .systems import ShiftModel, build_linear_model, build_shift_model

SCHEMA_VERSION = 1

DEFAULTS = {
    "schema": SCHEMA_VERSION,
    "system": {"kind": "linear", "matrix": [[2, 1], [1, 1]]},
    "measure": "natural",
    "partition": {"k": 10, "epsilon0": 0.15, "leaf_halflength": None, "block_length": 1},
    "formulas": ["partition"],
    "ball_methods": ["oracle_interval"],
    "n_window": [8, 14],
    "epsilons": [0.1, 0.05, 0.025],
    "deltas": [0.1],
    "anchors": 32,
    "sample_count": 100_000,
    "seed": 0,
    "budget": DEFAULT_BUDGET,
    "output": "runs/out",
    "sweep": {"k": None},
    "verify": {"pair_samples": 10_000, "triple_samples": 1_000, "anchor_samples": 100_000,
               "gamma": 0.01, "max_n": 10, "faults": []},
    "oracle": {"n": 3, "anchors": 1, "cover_instance": None},
}

FORMULAS = ("partition", "ball")
BALL_METHODS = ("oracle_interval", "greedy")
MEASURES = ("natural", "lebesgue", "bernoulli", "markov")


@dataclass
class ExperimentConfig:
    data: dict
    lines: dict = field(default_factory=dict)
    source: Optional[Path] = None

    def __getitem__(self, key):
        return self.data[key]

    def line_of(self, *path) -> Optional[int]:
        while path:
            if path in self.lines:
                return self.lines[path]
            path = path[:-1]
        return None

    def error(self, message: str, *path) -> ConfigError:
        where = ".".join(str(p) for p in path)
        return ConfigError(f"{where}: {message}" if where else message, self.line_of(*path))

    def dump(self) -> str:
        """Canonical YAML text; loading it gives back an equal config."""
        return yaml.safe_dump(self.data, sort_keys=True, default_flow_style=None)

    def digest(self) -> str:
        return hashlib.sha256(self.dump().encode()).hexdigest()

    @property
    def run_id(self) -> str:
        return self.digest()[:12]


def _line_map(node, path=(), out=None) -> dict:
    """Map key paths to 1-based source lines using the composed YAML tree."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            p = path + (key.value,)
            out[p] = key.start_mark.line + 1
            _line_map(value, p, out)
    elif isinstance(node, yaml.SequenceNode):
        for j, item in enumerate(node.value):
            out[path + (j,)] = item.start_mark.line + 1
            _line_map(item, path + (j,), out)
    return out


def _merge(defaults, given):
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def parse_config(text: str, source=None) -> ExperimentConfig:
    try:
        node = yaml.compose(text)
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"not valid YAML: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None) from None
    raw = {} if raw is None else raw
    lines = _line_map(node) if node is not None else {}
    cfg = ExperimentConfig(raw, lines, Path(source) if source else None)
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a mapping", 1)
    unknown = sorted(set(raw) - set(DEFAULTS))
    if unknown:
        raise cfg.error("unknown key", unknown[0])
    schema = raw.get("schema", SCHEMA_VERSION)
    if schema != SCHEMA_VERSION:
        raise cfg.error(f"unsupported schema {schema!r}; this version reads {SCHEMA_VERSION}", "schema")
    merged = _merge(DEFAULTS, raw)
    if isinstance(raw.get("system"), dict):
        # a given system replaces the default one instead of merging into it
        merged["system"] = {"kind": "linear", **raw["system"]}
    cfg.data = merged
    _check_types(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, path)


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_types(cfg: ExperimentConfig):
    d = cfg.data
    for key in ("anchors", "sample_count", "seed", "budget"):
        if not isinstance(d[key], int) or isinstance(d[key], bool) or d[key] < (0 if key == "seed" else 1):
            raise cfg.error("expected a positive integer" if key != "seed" else
                            "expected a nonnegative integer", key)
    for key in ("formulas", "ball_methods", "deltas", "epsilons", "n_window"):
        if not isinstance(d[key], list):
            raise cfg.error("expected a list", key)
    for j, f in enumerate(d["formulas"]):
        if f not in FORMULAS:
            raise cfg.error(f"unknown formula {f!r}; choose from {FORMULAS}", "formulas", j)
    for j, m in enumerate(d["ball_methods"]):
        if m not in BALL_METHODS:
            raise cfg.error(f"unknown method {m!r}; choose from {BALL_METHODS}", "ball_methods", j)
    for j, v in enumerate(d["deltas"]):
        if not _is_number(v) or not 0 < v < 1:
            raise cfg.error("delta must lie in (0, 1)", "deltas", j)
    for j, v in enumerate(d["epsilons"]):
        if not _is_number(v) or not v > 0:
            raise cfg.error("epsilon must be positive", "epsilons", j)
    w = d["n_window"]
    if len(w) != 2 or not all(isinstance(v, int) and v >= 1 for v in w) or w[1] - w[0] < 2:
        raise cfg.error("expected [n_min, n_max] with n_max >= n_min + 2 >= 3", "n_window")
    if d["measure"] not in MEASURES:
        raise cfg.error(f"unknown measure {d['measure']!r}", "measure")
    for key in ("verify", "oracle", "partition", "sweep", "system"):
        if not isinstance(d[key], dict):
            raise cfg.error("expected a mapping", key)
        extra = sorted(set(d[key]) - set(DEFAULTS[key]) - {"matrix", "translation", "probabilities",
                                                             "transition", "name"})
        if extra:
            raise cfg.error("unknown key", key, extra[0])


@dataclass
class Setup:
    """Everything a run needs, built and validated before any output exists."""

    system: object
    mu: object
    xi: object
    scheme: object
    config: ExperimentConfig


def build_system(cfg: ExperimentConfig):
    s = cfg["system"]
    kind = s.get("kind")
    try:
        if kind == "linear":
            return build_linear_model(s.get("matrix"), s.get("translation"), s.get("name"))
        if kind == "bernoulli":
            if "probabilities" not in s:
                raise cfg.error("missing probabilities", "system")
            return build_shift_model(probabilities=s["probabilities"], name=s.get("name"))
        if kind == "markov":
            if "transition" not in s:
                raise cfg.error("missing transition", "system")
            return build_shift_model(transition=s["transition"], name=s.get("name"))
    except ConfigError:
        raise
    except (UnstableEntropyError, ValueError, TypeError) as exc:
        key = {"linear": "matrix", "bernoulli": "probabilities", "markov": "transition"}[kind]
        if "translation" in str(exc):
            key = "translation"
        raise cfg.error(str(exc), "system", key) from None
    raise cfg.error(f"unknown system kind {kind!r}", "system", "kind")


def build_partition(cfg: ExperimentConfig, system, k=None):
    p = cfg["partition"]
    if isinstance(system, ShiftModel):
        b = p.get("block_length", 1)
        if not isinstance(b, int) or b < 1:
            raise cfg.error("expected a positive integer", "partition", "block_length")
        return CylinderPartition(system.alphabet_size, b)
    k = p["k"] if k is None else k
    if not isinstance(k, int) or isinstance(k, bool) or k < 1:
        raise cfg.error("expected a positive integer", "partition", "k")
    if not _is_number(p["epsilon0"]) or p["epsilon0"] <= 0:
        raise cfg.error("expected a positive number", "partition", "epsilon0")
    try:
        return build_grid(k, p["epsilon0"], system.dimension)
    except UnstableEntropyError as exc:
        raise cfg.error(f"{type(exc).__name__}: {exc}", "partition", "k") from None


def build_setup(cfg: ExperimentConfig, k=None) -> Setup:
    system = build_system(cfg)
    mu = measure_for(system)
    want = cfg["measure"]
    if want not in ("natural", mu.kind):
        raise cfg.error(f"measure {want!r} does not fit a {type(system).__name__}", "measure")
    grid = build_partition(cfg, system, k)
    if isinstance(system, ShiftModel):
        scheme = build_unstable_scheme(system, CylinderPartition(system.alphabet_size, 1))
    else:
        try:
            scheme = build_unstable_scheme(system, grid, cfg["partition"]["leaf_halflength"])
        except ValueError as exc:
            raise cfg.error(str(exc), "partition", "leaf_halflength") from None
    if "ball" in cfg["formulas"] and not cfg["epsilons"]:
        raise cfg.error("the ball formula needs at least one epsilon", "epsilons")
    if not isinstance(system, ShiftModel):
        eps0 = cfg["partition"]["epsilon0"]
        for j, e in enumerate(cfg["epsilons"] if "ball" in cfg["formulas"] else []):
            if e > eps0:
                raise cfg.error(f"epsilon {e} exceeds epsilon0 {eps0}", "epsilons", j)
    else:
        for j, e in enumerate(cfg["epsilons"] if "ball" in cfg["formulas"] else []):
            if e > 1:
                raise cfg.error("shift ball radii must be at most 1", "epsilons", j)
    return Setup(system, mu, grid, scheme, cfg)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"
