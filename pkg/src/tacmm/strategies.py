"""Pose-adjustment, depth-servo and lifting strategies.

Closed-loop procedures are written as generators that issue one motion
command per step (``move_fn``), then ``yield`` so a behavior-tree leaf can
spread them over ticks.  :func:`run_to_completion` drives one to the end
for blocking use.

Object-centre hints are points in the robot body frame (x forward, y left)
and are dead-reckoned through every commanded motion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .bt import Action, Condition, Parallel, Sequence, Status
from .geometry import Pose2, normalize_angle


class StrategyError(RuntimeError):
    pass


class NoContact(StrategyError):
    def __init__(self, msg="no contact"):
        super().__init__(msg)


class ObjectNotFound(StrategyError):
    def __init__(self, msg="object not found"):
        super().__init__(msg)


class ServoOscillation(StrategyError):
    def __init__(self, msg="servo oscillation"):
        super().__init__(msg)


@dataclass(frozen=True)
class StrategyParams:
    angle_threshold: float = 2.0
    depth_target: float = 2.6
    proportional_gain: float = 0.8
    max_contacts: int = 8
    backoff_distance: float = 30.0
    approach_speed: float = 10.0
    settle_tolerance: float = 0.05
    depth_band: float = 0.2
    max_depth: float = 5.0
    max_servo_moves: int = 20
    approach_budget: float = 2000.0
    reapproach_budget: float = 120.0
    standoff: float = 50.0

    def __post_init__(self):
        for name in ("angle_threshold", "depth_target", "proportional_gain", "max_contacts",
                     "backoff_distance", "approach_speed", "settle_tolerance", "depth_band",
                     "max_depth", "max_servo_moves", "approach_budget", "reapproach_budget"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.angle_threshold < 25:
            raise ValueError("angle_threshold must be below 25 degrees")
        if not 1 <= self.depth_target <= 5:
            raise ValueError("depth_target must lie in [1, 5] mm")
        if self.standoff < 0:
            raise ValueError("standoff must be >= 0")


# --- commands -------------------------------------------------------------

@dataclass(frozen=True)
class Translate:
    dx: float
    dy: float = 0.0


@dataclass(frozen=True)
class Rotate:
    dtheta: float


@dataclass(frozen=True)
class RotateAboutPoint:
    centre: tuple
    dtheta: float


@dataclass(frozen=True)
class Lift:
    pass


@dataclass(frozen=True)
class Lower:
    pass


@dataclass(frozen=True)
class Stop:
    pass


RobotCommand = (Translate, Rotate, RotateAboutPoint, Lift, Lower, Stop)


def command_payload(cmd) -> dict:
    if isinstance(cmd, Translate):
        return {"dx": cmd.dx, "dy": cmd.dy}
    if isinstance(cmd, Rotate):
        return {"dtheta": cmd.dtheta}
    if isinstance(cmd, RotateAboutPoint):
        return {"centre": [float(cmd.centre[0]), float(cmd.centre[1])], "dtheta": cmd.dtheta}
    return {}


class Estimate(NamedTuple):
    """What the tactile sensor reports: depth, angle and the contact flag."""

    depth: float
    angle: float
    contact: bool


@dataclass(frozen=True)
class AdjustOutcome:
    contacts_used: int
    final_angle_est: float
    converged: bool
    angle_history: tuple = ()


@dataclass(frozen=True)
class ServoOutcome:
    final_depth_est: float
    moves: int = 0


# --- pure step functions --------------------------------------------------

def self_rotation_step(estimate: Estimate, params: StrategyParams, threshold: float | None = None):
    """Rotate about the robot centre by ``-gain * angle``; Stop inside the threshold."""
    if not estimate.contact:
        raise NoContact()
    thr = params.angle_threshold if threshold is None else threshold
    if abs(estimate.angle) < thr:
        return Stop()
    return Rotate(-params.proportional_gain * estimate.angle)


def object_rotation_step(estimate: Estimate, object_centre_hint, params: StrategyParams,
                         threshold: float | None = None):
    """Rotate about the (body-frame) object centre by ``-gain * angle``."""
    if not estimate.contact:
        raise NoContact()
    centre = (float(object_centre_hint[0]), float(object_centre_hint[1]))
    if not all(math.isfinite(c) for c in centre):
        raise ValueError("object centre hint must be finite")
    thr = params.angle_threshold if threshold is None else threshold
    if abs(estimate.angle) < thr:
        return Stop()
    return RotateAboutPoint(centre, -params.proportional_gain * estimate.angle)


def track_hint(hint, cmd):
    """Body-frame position of a fixed world point after executing ``cmd``."""
    x, y = hint
    if isinstance(cmd, Translate):
        return (x - cmd.dx, y - cmd.dy)
    if isinstance(cmd, Rotate):
        t = math.radians(-cmd.dtheta)
        return (math.cos(t) * x - math.sin(t) * y, math.sin(t) * x + math.cos(t) * y)
    if isinstance(cmd, RotateAboutPoint):
        # rotating about a point leaves that point's body-frame coordinates unchanged;
        # other points move like the inverse rotation about the pivot
        cx, cy = cmd.centre
        t = math.radians(-cmd.dtheta)
        dx, dy = x - cx, y - cy
        return (cx + math.cos(t) * dx - math.sin(t) * dy, cy + math.sin(t) * dx + math.cos(t) * dy)
    return hint


# --- closed-loop procedures -----------------------------------------------

class _Tracker:
    """Forwards commands to ``move_fn`` and dead-reckons the object hint.

    ``move_fn`` may return the command it actually completed; otherwise the
    commanded motion is assumed.
    """

    def __init__(self, move_fn, hint=None):
        self.move_fn = move_fn
        self.hint = None if hint is None else (float(hint[0]), float(hint[1]))

    def move(self, cmd):
        done = self.move_fn(cmd)
        # a mover may report the motion actually made (e.g. stopped at contact)
        if self.hint is not None:
            self.hint = track_hint(self.hint, cmd if done is None else done)


def approach(sensor_fn, tracker: _Tracker, params: StrategyParams, budget: float):
    """Advance in ``approach_speed`` steps until the sensor reports contact."""
    est = sensor_fn()
    travelled = 0.0
    while not est.contact:
        if travelled >= budget:
            raise ObjectNotFound()
        tracker.move(Translate(params.approach_speed, 0.0))
        travelled += params.approach_speed
        yield
        est = sensor_fn()
    return est


def _settle_rotation(tracker: _Tracker, angle: float, params: StrategyParams, pivot: str):
    """Proportional rotation on the dead-reckoned residual of one estimate,
    until that residual drops below ``settle_tolerance``."""
    remaining = angle
    rotated = 0.0
    while True:
        est = Estimate(1.0, remaining, True)
        if pivot == "self":
            cmd = self_rotation_step(est, params, threshold=params.settle_tolerance)
        else:
            cmd = object_rotation_step(est, tracker.hint, params, threshold=params.settle_tolerance)
        if isinstance(cmd, Stop):
            return rotated
        tracker.move(cmd)
        rotated += cmd.dtheta
        remaining += cmd.dtheta
        yield


def single_contact_steps(sensor_fn, move_fn, params: StrategyParams, object_centre_hint=None,
                         pivot: str = "object"):
    """One contact, one estimate: back off, rotate (about the robot or the
    object centre) until the dead-reckoned error settles, then re-approach."""
    if pivot not in ("self", "object"):
        raise ValueError("pivot must be 'self' or 'object'")
    if pivot == "object" and object_centre_hint is None:
        raise ValueError("object rotation needs a centre hint")
    tracker = _Tracker(move_fn, object_centre_hint)
    est = yield from approach(sensor_fn, tracker, params, params.approach_budget)
    first = est.angle
    if abs(first) >= params.angle_threshold:
        tracker.move(Translate(-params.backoff_distance, 0.0))
        yield
        yield from _settle_rotation(tracker, first, params, pivot)
        est = yield from approach(sensor_fn, tracker, params, params.reapproach_budget)
    return AdjustOutcome(1, est.angle, True, (first,))


def multi_contact_steps(sensor_fn, move_fn, object_centre_hint, params: StrategyParams):
    tracker = _Tracker(move_fn, object_centre_hint)
    history = []
    budget = params.approach_budget
    while True:
        est = yield from approach(sensor_fn, tracker, params, budget)
        budget = params.reapproach_budget
        history.append(est.angle)
        if abs(est.angle) < params.angle_threshold:
            return AdjustOutcome(len(history), est.angle, True, tuple(history))
        if len(history) >= params.max_contacts:
            return AdjustOutcome(len(history), est.angle, False, tuple(history))
        tracker.move(Translate(-params.backoff_distance, 0.0))
        yield
        yield from _settle_rotation(tracker, est.angle, params, "object")


def depth_servo_steps(sensor_fn, move_fn, params: StrategyParams):
    """Move along the sensor axis until the depth estimate sits in the band
    around ``depth_target``.  Moves are at most ``approach_speed`` and shrink
    to the remaining error near the target; a reading beyond ``max_depth``
    backs off a full step."""
    est = sensor_fn()
    moves = 0
    while not (est.contact and abs(est.depth - params.depth_target) <= params.depth_band):
        if moves >= params.max_servo_moves:
            raise ServoOscillation()
        if not est.contact:
            step = params.approach_speed / 2.0
        elif est.depth > params.max_depth:
            step = -params.approach_speed
        else:
            err = params.depth_target - est.depth
            step = math.copysign(min(abs(err), params.approach_speed), err)
        move_fn(Translate(step, 0.0))
        moves += 1
        yield
        est = sensor_fn()
    return ServoOutcome(est.depth, moves)


def run_to_completion(gen):
    while True:
        try:
            next(gen)
        except StopIteration as stop:
            return stop.value


def self_rotation_adjust(sensor_fn, move_fn, params: StrategyParams) -> AdjustOutcome:
    return run_to_completion(single_contact_steps(sensor_fn, move_fn, params, pivot="self"))


def object_rotation_adjust(sensor_fn, move_fn, object_centre_hint, params: StrategyParams) -> AdjustOutcome:
    return run_to_completion(single_contact_steps(sensor_fn, move_fn, params, object_centre_hint, "object"))


def multi_contact_adjust(sensor_fn, move_fn, object_centre_hint, params: StrategyParams) -> AdjustOutcome:
    """Contact, estimate, back off and orbit the object centre; repeat until
    the estimated angle is inside ``angle_threshold`` or ``max_contacts``
    readings have been used (``converged=False``)."""
    return run_to_completion(multi_contact_steps(sensor_fn, move_fn, object_centre_hint, params))


def depth_servo(sensor_fn, move_fn, params: StrategyParams) -> ServoOutcome:
    return run_to_completion(depth_servo_steps(sensor_fn, move_fn, params))


# --- vision baseline ------------------------------------------------------

def _facing_face(box_pose: Pose2, length: float, width: float):
    """Centre and inward-normal heading of the box face whose outward
    normal points most directly at the body-frame origin."""
    cx, cy = box_pose.x, box_pose.y
    to_robot = np.array([-cx, -cy])
    best = None
    for local_normal, half in (((1.0, 0.0), length / 2), ((-1.0, 0.0), length / 2),
                               ((0.0, 1.0), width / 2), ((0.0, -1.0), width / 2)):
        n = box_pose.rotate_vector(local_normal)
        score = float(n @ to_robot)
        if best is None or score > best[0]:
            best = (score, np.array([cx, cy]) + half * n, n)
    _, centre, n_out = best
    return centre, math.degrees(math.atan2(-n_out[1], -n_out[0]))


def _chunks(distance: float, step: float):
    n = int(math.floor(abs(distance) / step))
    sign = math.copysign(1.0, distance)
    out = [Translate(sign * step, 0.0) for _ in range(n)]
    rest = abs(distance) - n * step
    if rest > 1e-9:
        out.append(Translate(sign * rest, 0.0))
    return out


def vision_adjust_plan(vision_estimate: Pose2, params: StrategyParams, *, box_length: float = 30.0,
                       box_width: float = 60.0, sensor_offset: float = 100.0,
                       dome_radius: float = 20.0) -> list:
    """Open-loop plan from one body-frame estimate of the box pose.

    Orbit the estimated centre onto the estimated face normal, square up to
    it, drive to a standoff and then advance the precomputed distance that
    should leave the dome ``depth_target`` into the face.  Translations are
    emitted as ``approach_speed`` chunks.
    """
    c = np.array([vision_estimate.x, vision_estimate.y])
    if not np.all(np.isfinite(c)):
        raise ValueError("vision estimate must be finite")
    face_centre, normal_heading = _facing_face(vision_estimate, box_length, box_width)
    bearing = math.degrees(math.atan2(c[1], c[0]))
    orbit = normalize_angle(normal_heading - bearing)
    plan = []
    if abs(orbit) > 1e-12:
        plan.append(RotateAboutPoint((float(c[0]), float(c[1])), orbit))
    if abs(bearing) > 1e-12:
        plan.append(Rotate(bearing))
    # distance from the robot centre to the centre, along the normal line
    rho = float(np.hypot(*c))
    centre_to_face = float(np.hypot(*(face_centre - c)))
    goal_from_centre = centre_to_face + dome_radius - params.depth_target + sensor_offset
    travel = rho - goal_from_centre
    to_standoff = travel - params.standoff
    if to_standoff > 0:
        plan.extend(_chunks(to_standoff, params.approach_speed))
        plan.extend(_chunks(params.standoff, params.approach_speed))
    else:
        plan.extend(_chunks(travel, params.approach_speed))
    return plan


def vision_plan_steps(plan, move_fn):
    for cmd in plan:
        move_fn(cmd)
        yield
    return len(plan)


# --- behavior-tree wiring -------------------------------------------------

class StepAction(Action):
    """Leaf that advances a step generator by one command per tick.

    ``factory(bb)`` creates the generator on the first tick of a pass; its
    return value is stored under ``result_key``.  Strategy errors turn into
    Failure with the message stored under ``"error"``.
    """

    def __init__(self, callback, factory, result_key=None, name=None):
        super().__init__(callback, self._step, name=name, on_reset=self._clear)
        self.factory = factory
        self.result_key = result_key or callback
        self._gen = None

    def _clear(self):
        self._gen = None

    def _step(self, bb):
        if self._gen is None:
            self._gen = self.factory(bb)
        try:
            next(self._gen)
        except StopIteration as stop:
            self._gen = None
            bb[self.result_key] = stop.value
            return Status.SUCCESS
        except StrategyError as err:
            self._gen = None
            bb["error"] = str(err)
            return Status.FAILURE
        return Status.RUNNING

    def _own_state(self):
        return self._gen is not None


def build_lift_tree(role: int, params: StrategyParams, link, adjust, servo=None):
    """Lifting behaviour for one robot.

    ``link`` is the robot's connection to the world; it must provide
    ``send(kind)``, ``peer_ready(kind) -> bool`` (barrier release) and
    ``execute(cmd)``.  ``adjust`` and ``servo`` are subtrees (the vision
    variant passes its plan executor as ``adjust`` and no servo).
    """
    if role not in (0, 1):
        raise ValueError("role must be 0 or 1")

    def sender(kind):
        def fn(bb):
            link.send(kind)
            return Status.SUCCESS
        return fn

    def doer(cmd):
        def fn(bb):
            link.execute(cmd)
            return Status.SUCCESS
        return fn

    children = [adjust]
    if servo is not None:
        children.append(servo)
    children += [
        Action("send_ready", sender("READY")),
        Condition("peer_ready", lambda bb: link.peer_ready("READY"), wait=True),
        Parallel([Action("lift", doer(Lift()))]),
        Action("send_done", sender("DONE")),
        Condition("peer_done", lambda bb: link.peer_ready("DONE"), wait=True),
        Action("lower", doer(Lower())),
    ]
    return Sequence(children, name=f"lift_robot_{role}")
