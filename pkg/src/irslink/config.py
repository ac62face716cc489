"""Experiment configuration: a YAML tree with strict keys and parse-time units.

Schema (every key optional; defaults reproduce the reference setup)::

    seed: 0
    system:
      m: 4
      pl_db: 40.0            # path loss, dB
      n0_dbm: -40.0          # noise power, dBm
      gamma0_db: 10.0        # SNR threshold in dB, or "derive" to use D
      r_c: 1.0
      p_src: 0.5
      distortions: [0.0, 0.1, 0.2, 0.4]
      sigmas: [1.0, 1.0, 1.0, 1.0]       # shared by both hops unless
      sigmas2: null                      # sigmas2 is given
      lambdas1: [0.95, 0.9, 0.9, 0.85]
      lambdas2: [0.9, 0.95, 0.85, 0.9]
    sweep:
      p_s_dbm: {start: -10, stop: 30, step: 2}   # or an explicit list
      distortion: 0.0
      mc_samples: 1000000
      quad_tol: 1.0e-3
      stats_samples: 1000000
    ddpg:
      actor_lr: 0.001
      critic_lr: 0.003
      capacity: 10000
      batch: 128
      n_episodes: 300
      n_steps: 200
      target_refresh: 90
      delta_max_deg: 15.0
      exploration_sigma_deg: 3.0
      sigma_decay: 0.995
      n_samples: 20
      tau: null
      discount: 0.9
      hidden: 64
      share_hidden: false
      profile_inputs: false
      warm_start: true
      eval_steps: 15
      dtype: float32

All dB, dBm and degree values are converted to linear units, watts and
radians once, here. Unknown keys are rejected with their line number.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
import yaml

from .channel import CorrelationProfile, LinkBudget
from .ddpg import TrainConfig
from .errors import ConfigError, ParameterError
from .lossy import budget_gamma0

DERIVE = "derive"


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


def dbm_to_watts(dbm: float) -> float:
    return 1e-3 * 10.0 ** (dbm / 10.0)


def watts_to_dbm(w: float) -> float:
    return 10.0 * math.log10(w / 1e-3)


@dataclass(frozen=True)
class SystemConfig:
    profile1: CorrelationProfile
    profile2: CorrelationProfile
    pl: float
    n0: float
    gamma0: float | None
    r_c: float = 1.0
    p_src: float = 0.5
    distortions: tuple = (0.0, 0.1, 0.2, 0.4)

    @property
    def m(self) -> int:
        return self.profile1.size

    def budget(self, p_s: float, distortion: float) -> LinkBudget:
        return LinkBudget(p_s, self.n0, self.pl, self.r_c, self.p_src, distortion, self.gamma0)

    def gamma0_for(self, distortion: float) -> float:
        return budget_gamma0(self.budget(1.0, distortion))


@dataclass(frozen=True)
class SweepConfig:
    p_s_dbm: tuple
    p_s: tuple
    distortion: float = 0.0
    mc_samples: int = 1_000_000
    quad_tol: float = 1e-3
    stats_samples: int = 1_000_000

    @property
    def grid_label(self) -> str:
        return " ".join(f"{x:g}" for x in self.p_s_dbm)


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemConfig
    sweep: SweepConfig
    ddpg: TrainConfig
    seed: int = 0
    source: str = field(default="<defaults>", compare=False)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        if seed < 0:
            raise ConfigError("must be non-negative", "seed")
        return replace(self, ddpg=replace(self.ddpg, seed=seed), seed=seed)


TABLE_LAMBDAS1 = (0.95, 0.9, 0.9, 0.85)
TABLE_LAMBDAS2 = (0.9, 0.95, 0.85, 0.9)

_SYSTEM_DEFAULTS = {
    "m": 4,
    "pl_db": 40.0,
    "n0_dbm": -40.0,
    "gamma0_db": 10.0,
    "r_c": 1.0,
    "p_src": 0.5,
    "distortions": [0.0, 0.1, 0.2, 0.4],
    "sigmas": None,
    "sigmas2": None,
    "lambdas1": list(TABLE_LAMBDAS1),
    "lambdas2": list(TABLE_LAMBDAS2),
}
_SWEEP_DEFAULTS = {
    "p_s_dbm": {"start": -10.0, "stop": 30.0, "step": 2.0},
    "distortion": 0.0,
    "mc_samples": 1_000_000,
    "quad_tol": 1e-3,
    "stats_samples": 1_000_000,
}
_DDPG_DEFAULTS = {
    "actor_lr": 1e-3,
    "critic_lr": 3e-3,
    "capacity": 10_000,
    "batch": 128,
    "n_episodes": 300,
    "n_steps": 200,
    "target_refresh": 90,
    "delta_max_deg": 15.0,
    "exploration_sigma_deg": 3.0,
    "sigma_decay": 0.995,
    "n_samples": 20,
    "tau": None,
    "discount": 0.9,
    "hidden": 64,
    "share_hidden": False,
    "profile_inputs": False,
    "warm_start": True,
    "eval_steps": 15,
    "dtype": "float32",
}
_TOP_KEYS = {"seed", "system", "sweep", "ddpg"}


def _line_index(text: str) -> dict:
    """Map dotted key paths to 1-based source lines."""
    lines: dict = {}

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for key, value in node.value:
                sub = f"{path}.{key.value}" if path else str(key.value)
                lines[sub] = key.start_mark.line + 1
                walk(value, sub)
        elif isinstance(node, yaml.SequenceNode):
            for i, item in enumerate(node.value):
                lines[f"{path}[{i}]"] = item.start_mark.line + 1
                walk(item, f"{path}[{i}]")

    root = yaml.compose(text, Loader=yaml.SafeLoader)
    if root is not None:
        walk(root, "")
    return lines


class _Reader:
    """Typed field access with path-and-line error messages."""

    def __init__(self, lines: dict):
        self.lines = lines

    def fail(self, path: str, message: str):
        raise ConfigError(message, path, self.lines.get(path))

    def block(self, data: dict, name: str, defaults: dict) -> dict:
        raw = data.get(name, {})
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            self.fail(name, "expected a mapping")
        for key in raw:
            if key not in defaults:
                self.fail(f"{name}.{key}", "unknown key")
        return {**defaults, **raw}

    def number(self, path: str, value, integer: bool = False):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(path, f"expected a number, got {value!r}")
        if not math.isfinite(value):
            self.fail(path, "must be finite")
        if integer:
            if float(value) != int(value):
                self.fail(path, f"expected an integer, got {value!r}")
            return int(value)
        return float(value)

    def flag(self, path: str, value) -> bool:
        if not isinstance(value, bool):
            self.fail(path, f"expected true or false, got {value!r}")
        return value

    def vector(self, path: str, value, size: int | None = None) -> tuple:
        if not isinstance(value, list):
            self.fail(path, "expected a list")
        out = tuple(self.number(f"{path}[{i}]", v) for i, v in enumerate(value))
        if size is not None and len(out) != size:
            self.fail(path, f"expected {size} entries, got {len(out)}")
        return out


def _parse_system(rd: _Reader, block: dict) -> SystemConfig:
    m = rd.number("system.m", block["m"], integer=True)
    if m < 1:
        rd.fail("system.m", "must be at least 1")
    sig1 = block["sigmas"] if block["sigmas"] is not None else [1.0] * m
    sig1 = rd.vector("system.sigmas", sig1, m)
    sig2 = rd.vector("system.sigmas2", block["sigmas2"], m) if block["sigmas2"] is not None else sig1
    lam1 = rd.vector("system.lambdas1", block["lambdas1"], m)
    lam2 = rd.vector("system.lambdas2", block["lambdas2"], m)
    g = block["gamma0_db"]
    if g == DERIVE:
        gamma0 = None
    else:
        gamma0 = db_to_linear(rd.number("system.gamma0_db", g))
    distortions = rd.vector("system.distortions", block["distortions"])
    try:
        p1 = CorrelationProfile(np.array(lam1), np.array(sig1))
    except ParameterError as exc:
        rd.fail("system.lambdas1", str(exc))
    try:
        p2 = CorrelationProfile(np.array(lam2), np.array(sig2))
    except ParameterError as exc:
        rd.fail("system.lambdas2", str(exc))
    cfg = SystemConfig(
        profile1=p1,
        profile2=p2,
        pl=db_to_linear(rd.number("system.pl_db", block["pl_db"])),
        n0=dbm_to_watts(rd.number("system.n0_dbm", block["n0_dbm"])),
        gamma0=gamma0,
        r_c=rd.number("system.r_c", block["r_c"]),
        p_src=rd.number("system.p_src", block["p_src"]),
        distortions=distortions,
    )
    for i, d in enumerate(distortions):
        try:
            cfg.budget(1.0, d)
        except ParameterError as exc:
            rd.fail(f"system.distortions[{i}]", str(exc))
    try:
        cfg.budget(1.0, 0.0)
    except ParameterError as exc:
        rd.fail("system", str(exc))
    return cfg


def _parse_grid(rd: _Reader, value) -> tuple:
    path = "sweep.p_s_dbm"
    if isinstance(value, dict):
        for key in value:
            if key not in ("start", "stop", "step"):
                rd.fail(f"{path}.{key}", "unknown key")
        try:
            start, stop, step = (rd.number(f"{path}.{k}", value[k]) for k in ("start", "stop", "step"))
        except KeyError as exc:
            rd.fail(path, f"missing {exc.args[0]!r}")
        if step <= 0 or stop < start:
            rd.fail(path, "need step > 0 and stop >= start")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        # integer multiples avoid accumulated rounding in the grid
        return tuple(start + i * step for i in range(count))
    grid = rd.vector(path, value)
    if not grid:
        rd.fail(path, "grid is empty")
    return grid


def _parse_sweep(rd: _Reader, block: dict) -> SweepConfig:
    grid = _parse_grid(rd, block["p_s_dbm"])
    sweep = SweepConfig(
        p_s_dbm=grid,
        p_s=tuple(dbm_to_watts(x) for x in grid),
        distortion=rd.number("sweep.distortion", block["distortion"]),
        mc_samples=rd.number("sweep.mc_samples", block["mc_samples"], integer=True),
        quad_tol=rd.number("sweep.quad_tol", block["quad_tol"]),
        stats_samples=rd.number("sweep.stats_samples", block["stats_samples"], integer=True),
    )
    if not 0.0 <= sweep.distortion <= 1.0:
        rd.fail("sweep.distortion", "must lie in [0, 1]")
    for name in ("mc_samples", "stats_samples"):
        if getattr(sweep, name) < 2:
            rd.fail(f"sweep.{name}", "needs at least 2 samples")
    if not sweep.quad_tol > 0:
        rd.fail("sweep.quad_tol", "must be positive")
    return sweep


def _parse_ddpg(rd: _Reader, block: dict, seed: int) -> TrainConfig:
    ints = ("capacity", "batch", "n_episodes", "n_steps", "target_refresh", "n_samples", "hidden", "eval_steps")
    flags = ("share_hidden", "profile_inputs", "warm_start")
    values = {}
    for key, raw in block.items():
        path = f"ddpg.{key}"
        if key in flags:
            values[key] = rd.flag(path, raw)
        elif key == "dtype":
            if raw not in ("float32", "float64"):
                rd.fail(path, "expected float32 or float64")
            values[key] = raw
        elif key == "tau":
            values[key] = None if raw is None else rd.number(path, raw)
        elif key == "delta_max_deg":
            values["delta_max"] = math.radians(rd.number(path, raw))
        elif key == "exploration_sigma_deg":
            values["exploration_sigma"] = math.radians(rd.number(path, raw))
        else:
            values[key] = rd.number(path, raw, integer=key in ints)
    try:
        return TrainConfig(**values, seed=seed)
    except ParameterError as exc:
        rd.fail("ddpg", str(exc))


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    """Parse YAML text into a validated :class:`ExperimentConfig`."""
    try:
        lines = _line_index(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}", "", mark.line + 1 if mark else None) from exc
    data = {} if data is None else data
    rd = _Reader(lines)
    if not isinstance(data, dict):
        rd.fail("", "top level must be a mapping")
    for key in data:
        if key not in _TOP_KEYS:
            rd.fail(str(key), "unknown key")
    seed = rd.number("seed", data.get("seed", 0), integer=True)
    if seed < 0:
        rd.fail("seed", "must be non-negative")
    system = _parse_system(rd, rd.block(data, "system", _SYSTEM_DEFAULTS))
    sweep = _parse_sweep(rd, rd.block(data, "sweep", _SWEEP_DEFAULTS))
    ddpg = _parse_ddpg(rd, rd.block(data, "ddpg", _DDPG_DEFAULTS), seed)
    return ExperimentConfig(system, sweep, ddpg, seed, source)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), str(path))


def default_config() -> ExperimentConfig:
    return parse_config("", "<defaults>")
