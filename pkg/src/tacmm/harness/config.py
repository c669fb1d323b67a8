"""JSON experiment configs.

One document describes a whole experiment: the base box, strategy,
physics and noise constants, the regressor to use, the pose-sweep grid and
the lift scenarios (each a named override of the base box).  Every error
is reported as ``path:line: message``.
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

from ..grasp import BoxObject, FcgTolerances, PhysicsParams
from ..regressor import TrainConfig
from ..strategies import StrategyParams
from ..tactile import DomeGeometry
from ..world import KinematicNoise, TrialSetup, VisionNoise

SWEEP_STRATEGIES = ("self_rotation", "object_rotation", "multi_contact")
SWEEP_MODES = ("bumper", "regressor", "vision")
LIFT_MODES = ("tactile", "vision")


class ConfigError(ValueError):
    pass


def derive_seed(name: str, mode: str, index: int, master: int) -> int:
    """Stable 63-bit seed from (scenario name, mode, trial index, master seed)."""
    digest = hashlib.sha256(f"{name}|{mode}|{index}|{master}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


@dataclass(frozen=True)
class ModelSpec:
    """Where the regressor comes from: a saved file, or trained on the fly."""

    path: str | None = None
    n_contact: int = 5000
    n_noncontact: int = 500
    noise_std: float = 0.02
    train_fraction: float = 0.75
    seed: int = 0
    hidden_width: int = 64
    learning_rate: float = 1e-3
    epochs: int = 200
    batch_size: int = 64

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.hidden_width, self.learning_rate, self.epochs, self.batch_size, self.seed)


@dataclass(frozen=True)
class SweepSpec:
    angles: tuple = tuple(float(a) for a in range(-25, 30, 5))
    folds: int = 5
    strategies: tuple = SWEEP_STRATEGIES
    modes: tuple = SWEEP_MODES


@dataclass(frozen=True)
class LiftScenario:
    name: str
    box: BoxObject


@dataclass(frozen=True)
class Scenario:
    name: str = "default"
    seed: int = 0
    trials: int = 50
    setup: TrialSetup = field(default_factory=TrialSetup)
    model: ModelSpec = field(default_factory=ModelSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    lift_scenarios: tuple = ()

    def with_overrides(self, seed=None, trials=None) -> "Scenario":
        s = self
        if seed is not None:
            s = replace(s, seed=int(seed))
        if trials is not None:
            if trials < 1:
                raise ConfigError("trials must be >= 1")
            s = replace(s, trials=int(trials), sweep=replace(s.sweep, folds=int(trials)))
        return s


# --- parsing ----------------------------------------------------------------

def _line_of(text: str, key: str) -> int:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else 1


class _Ctx:
    def __init__(self, text: str, source: str):
        self.text = text
        self.source = source

    def fail(self, key: str, msg: str):
        raise ConfigError(f"{self.source}:{_line_of(self.text, key)}: {msg}")


def _build(cls, data, ctx: _Ctx, section: str, convert=None):
    """Instantiate a dataclass from a dict, rejecting unknown keys."""
    if not isinstance(data, dict):
        ctx.fail(section, f"section {section!r} must be an object")
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        ctx.fail(unknown[0], f"unknown key {unknown[0]!r} in {section!r}")
    kwargs = dict(data)
    for k, fn in (convert or {}).items():
        if k in kwargs:
            kwargs[k] = fn(kwargs[k])
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as err:
        ctx.fail(next(iter(data), section), f"invalid {section!r}: {err}")


def _physics(data, ctx):
    data = dict(data)
    tol = _build(FcgTolerances, data.pop("tolerances", {}), ctx, "tolerances")
    return _build(PhysicsParams, {**data, "tolerances": tol}, ctx, "physics")


def parse_config(text: str, source: str = "<config>") -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{source}:{err.lineno}:{err.colno}: {err.msg}") from None
    ctx = _Ctx(text, source)
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}:1: top level must be an object")
    allowed = {"name", "seed", "trials", "box", "strategy", "physics", "kinematics", "vision",
               "sensor", "dome", "sensor_offset", "robot_distance", "yaw_range", "tick_budget",
               "model", "sweep", "lift_scenarios", "description"}
    unknown = sorted(set(doc) - allowed)
    if unknown:
        ctx.fail(unknown[0], f"unknown key {unknown[0]!r}")

    tup = lambda v: tuple(v)  # noqa: E731
    box = _build(BoxObject, doc.get("box", {}), ctx, "box", {"com_offset": tup})
    sensor = doc.get("sensor", {})
    if not isinstance(sensor, dict) or set(sensor) - {"kind", "noise_std"}:
        ctx.fail("sensor", "sensor must be an object with 'kind' and 'noise_std'")
    kind = sensor.get("kind", "regressor")
    if kind not in ("bumper", "regressor"):
        ctx.fail("kind", f"unknown sensor kind {kind!r}")
    try:
        setup = TrialSetup(
            box=box,
            params=_build(StrategyParams, doc.get("strategy", {}), ctx, "strategy"),
            physics=_physics(doc.get("physics", {}), ctx),
            kinematics=_build(KinematicNoise, doc.get("kinematics", {}), ctx, "kinematics"),
            vision=_build(VisionNoise, doc.get("vision", {}), ctx, "vision", {"bias_pos": tup}),
            sensor_kind=kind,
            sensor_noise=float(sensor.get("noise_std", 0.05)),
            dome=_build(DomeGeometry, doc.get("dome", {}), ctx, "dome"),
            sensor_offset=float(doc.get("sensor_offset", 100.0)),
            robot_distance=float(doc.get("robot_distance", 1100.0)),
            yaw_range=tuple(doc.get("yaw_range", (-25.0, 25.0))),
            tick_budget=int(doc.get("tick_budget", 10_000)),
        )
    except (TypeError, ValueError) as err:
        raise ConfigError(f"{source}:1: invalid setup: {err}") from None

    sweep = _build(SweepSpec, doc.get("sweep", {}), ctx, "sweep",
                   {"angles": lambda v: tuple(float(a) for a in v), "strategies": tup, "modes": tup})
    for a in sweep.angles:
        if not -25.0 <= a <= 25.0:
            ctx.fail("angles", f"sweep angle {a} outside [-25, 25]")
    if sweep.folds < 1:
        ctx.fail("folds", "folds must be >= 1")
    for s in sweep.strategies:
        if s not in SWEEP_STRATEGIES:
            ctx.fail("strategies", f"unknown strategy {s!r}")
    for m in sweep.modes:
        if m not in SWEEP_MODES:
            ctx.fail("modes", f"unknown sweep mode {m!r}")

    lifts = []
    for entry in doc.get("lift_scenarios", []):
        if not isinstance(entry, dict) or "name" not in entry:
            ctx.fail("lift_scenarios", "each lift scenario needs a 'name'")
        overrides = {k: v for k, v in entry.items() if k != "name"}
        merged = {f.name: getattr(box, f.name) for f in fields(BoxObject)}
        merged.update(overrides)
        lifts.append(LiftScenario(entry["name"], _build(BoxObject, merged, ctx, entry["name"],
                                                        {"com_offset": tup})))
    names = [s.name for s in lifts]
    if len(set(names)) != len(names):
        ctx.fail("lift_scenarios", "lift scenario names must be unique")

    trials = doc.get("trials", 50)
    if not isinstance(trials, int) or trials < 1:
        ctx.fail("trials", "trials must be an integer >= 1")
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        ctx.fail("seed", "seed must be a non-negative integer")
    return Scenario(name=str(doc.get("name", "default")), seed=seed, trials=trials, setup=setup,
                    model=_build(ModelSpec, doc.get("model", {}), ctx, "model"),
                    sweep=sweep, lift_scenarios=tuple(lifts))


def load_config(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"{path}: cannot read config: {err.strerror}") from None
    return parse_config(text, str(path))


def default_config_text(name: str = "default") -> str:
    return resources.files("tacmm.configs").joinpath(f"{name}.json").read_text()


def default_config(name: str = "default") -> Scenario:
    return parse_config(default_config_text(name), f"<builtin {name}.json>")
