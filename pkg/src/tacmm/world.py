"""Deterministic quasi-static world: one box, one or two robots, a noisy
global vision oracle and a tick-stamped mailbox between robots."""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import LineSegment, Pose2, compose, normalize_angle, relative_pose, rotate_about
from .grasp import BoxObject, ContactSpec, LiftVerdict, PhysicsParams, lift_outcome
from .regressor import RegressorModel, is_contact, predict
from .bt import Blackboard, Status
from .strategies import (AdjustOutcome, Estimate, Lift, Lower, Rotate, RotateAboutPoint,
                         StepAction, Stop, StrategyError, StrategyParams, Translate,
                         build_lift_tree, command_payload, depth_servo_steps, multi_contact_steps,
                         run_to_completion, single_contact_steps, vision_adjust_plan,
                         vision_plan_steps)
from .tactile import ContactState, DomeGeometry, add_feature_noise, contact_geometry, pin_compressions

MAX_PENETRATION = 5.0


def _scaled(cmd, t: float):
    if t >= 1.0:
        return cmd
    if isinstance(cmd, Translate):
        return Translate(cmd.dx * t, cmd.dy * t)
    if isinstance(cmd, Rotate):
        return Rotate(cmd.dtheta * t)
    return RotateAboutPoint(cmd.centre, cmd.dtheta * t)


@dataclass(frozen=True)
class KinematicNoise:
    k_trans: float = 0.02
    k_rot: float = 0.02

    def __post_init__(self):
        if self.k_trans < 0 or self.k_rot < 0:
            raise ValueError("kinematic noise fractions must be >= 0")


@dataclass(frozen=True)
class VisionNoise:
    sigma_pos: float = 8.0
    sigma_ang: float = 2.0
    bias_pos: tuple = (0.0, 0.0)
    bias_ang: float = 0.0

    def __post_init__(self):
        if self.sigma_pos < 0 or self.sigma_ang < 0:
            raise ValueError("vision noise sigmas must be >= 0")


@dataclass(frozen=True)
class SensorMode:
    """``kind`` is ``"bumper"`` (exact contact state) or ``"regressor"``."""

    kind: str = "bumper"
    model: RegressorModel | None = None
    noise_std: float = 0.0

    def __post_init__(self):
        if self.kind not in ("bumper", "regressor"):
            raise ValueError(f"unknown sensor mode {self.kind!r}")
        if self.kind == "regressor" and self.model is None:
            raise ValueError("regressor sensing needs a trained model")
        if self.noise_std < 0:
            raise ValueError("sensor noise must be >= 0")


@dataclass(frozen=True)
class Message:
    sender: int
    kind: str
    tick_stamp: int


@dataclass
class Robot:
    pose: Pose2
    dome: DomeGeometry
    sensor: SensorMode
    rng: np.random.Generator
    sensor_offset: float = 100.0
    touch_offset: float | None = None
    shear: float = 0.0
    lift_contact: ContactSpec | None = None


@dataclass
class World:
    box: BoxObject
    box_pose: Pose2
    robots: list
    kinematics: KinematicNoise = field(default_factory=KinematicNoise)
    physics: PhysicsParams = field(default_factory=PhysicsParams)
    tick: int = 0
    log: list = field(default_factory=list)
    verdict: LiftVerdict | None = None

    def __post_init__(self):
        n = len(self.robots)
        self._pending = [deque() for _ in range(n)]
        self.inbox = [[] for _ in range(n)]
        self._lift_ticks = [None] * n
        self._build_geometry()

    # --- geometry ---------------------------------------------------------
    def _build_geometry(self):
        corners = [self.box_pose.transform_point(c) for c in self.box.corners()]
        self._corners = [(float(c[0]), float(c[1])) for c in corners]
        self.faces = [LineSegment.from_points(self._corners[i], self._corners[(i + 1) % 4])
                      for i in range(4)]

    def sensor_pose(self, robot_id: int, pose: Pose2 | None = None) -> Pose2:
        r = self.robots[robot_id]
        return compose(pose or r.pose, Pose2(r.sensor_offset, 0.0, 0.0))

    def _dome_centre(self, robot: Robot, pose: Pose2):
        h = math.radians(pose.heading)
        return pose.x + robot.sensor_offset * math.cos(h), pose.y + robot.sensor_offset * math.sin(h)

    def penetration(self, point) -> float:
        """Dome-radius-free penetration: minus the distance from ``point`` to the
        box outline, or the depth inside it."""
        px, py = point
        best = math.inf
        inside = True
        for i in range(4):
            ax, ay = self._corners[i]
            bx, by = self._corners[(i + 1) % 4]
            ex, ey = bx - ax, by - ay
            L2 = ex * ex + ey * ey
            t = max(0.0, min(1.0, ((px - ax) * ex + (py - ay) * ey) / L2))
            d = math.hypot(px - ax - t * ex, py - ay - t * ey)
            best = min(best, d)
            if ex * (py - ay) - ey * (px - ax) < 0:
                inside = False
        return best if inside else -best

    def true_depth(self, robot_id: int, pose: Pose2 | None = None) -> float:
        r = self.robots[robot_id]
        return max(0.0, r.dome.radius + self.penetration(self._dome_centre(r, pose or r.pose)))

    def contact(self, robot_id: int):
        """``(face_index, ContactState)`` of the deepest face contact, or
        ``(None, non-contact)``."""
        r = self.robots[robot_id]
        sp = self.sensor_pose(robot_id)
        best = (None, ContactState())
        for i, face in enumerate(self.faces):
            st = contact_geometry(sp, face, r.dome)
            if st.in_contact and st.depth > best[1].depth:
                best = (i, st)
        if best[0] is not None and r.shear:
            st = best[1]
            best = (best[0], ContactState(st.depth, st.angle, st.tangential_offset, r.shear))
        return best

    def facing_face(self, point) -> int:
        """Index of the face whose outward normal points most toward ``point``."""
        c = np.array([self.box_pose.x, self.box_pose.y])
        d = np.asarray(point, dtype=float) - c
        return int(np.argmax([np.dot(f.outward_normal, d) for f in self.faces]))

    def face_metrics(self, robot_id: int, face_index: int):
        """Absolute angle error (deg) and signed tangential offset (mm) of a
        robot's sensor relative to a face, measured geometrically."""
        face = self.faces[face_index]
        sp = self.sensor_pose(robot_id)
        nx, ny = face.outward_normal
        inward = math.degrees(math.atan2(-ny, -nx))
        angle = normalize_angle(sp.heading - inward)
        tan = face.tangent
        offset = float((np.array([sp.x, sp.y]) - face.midpoint) @ tan)
        return angle, offset

    # --- motion -----------------------------------------------------------
    def _clip_path(self, robot: Robot, path):
        """Largest fraction t in [0, 1] of ``path(t) -> Pose2`` whose dome
        stays within the penetration limit."""
        limit = MAX_PENETRATION - robot.dome.radius

        def slack(t):
            return limit + 1e-9 - self.penetration(self._dome_centre(robot, path(t)))

        start = self._dome_centre(robot, path(0.0))
        end = self._dome_centre(robot, path(1.0))
        mid = self._dome_centre(robot, path(0.5))
        span = math.hypot(end[0] - start[0], end[1] - start[1]) + 2 * math.hypot(
            mid[0] - (start[0] + end[0]) / 2, mid[1] - (start[1] + end[1]) / 2)
        n = max(1, int(math.ceil(span / 1.0)))
        # penetration is 1-Lipschitz and span bounds the path length, so
        # samples closer than the current slack are known to pass
        spacing = span / n
        k = 1
        prev = 0.0
        while k <= n:
            t = k / n
            s = slack(t)
            if s < 0:
                lo, hi = prev, t
                for _ in range(40):
                    m = 0.5 * (lo + hi)
                    if slack(m) >= 0:
                        lo = m
                    else:
                        hi = m
                return lo
            skip = n if s >= span else int(s / spacing)
            prev = min(k + skip, n) / n
            k += skip + 1
        return 1.0

    def _record(self, robot_id, kind, payload=None):
        self.log.append({"tick": self.tick, "robot": robot_id, "kind": kind, "payload": payload or {}})

    def apply_command(self, robot_id: int, cmd):
        """Execute ``cmd`` with kinematic noise and contact clipping.  Returns
        the nominal command scaled to the completed fraction (what wheel
        odometry would report when a motion is stopped by the box)."""
        r = self.robots[robot_id]
        k = self.kinematics
        start = r.pose
        if isinstance(cmd, Translate):
            f = 1.0 + k.k_trans * r.rng.standard_normal() if k.k_trans else 1.0
            v = start.rotate_vector((cmd.dx * f, cmd.dy * f))
            def path(t):
                return Pose2(start.x + t * v[0], start.y + t * v[1], start.heading)
        elif isinstance(cmd, Rotate):
            f = 1.0 + k.k_rot * r.rng.standard_normal() if k.k_rot else 1.0
            dth = cmd.dtheta * f
            def path(t):
                return Pose2(start.x, start.y, start.heading + t * dth)
        elif isinstance(cmd, RotateAboutPoint):
            f = 1.0 + k.k_rot * r.rng.standard_normal() if k.k_rot else 1.0
            dth = cmd.dtheta * f
            c = start.transform_point(cmd.centre)
            def path(t):
                return rotate_about(start, c, t * dth)
        elif isinstance(cmd, Lift):
            self._lift(robot_id)
            return
        elif isinstance(cmd, Lower):
            self._record(robot_id, "LOWER")
            return
        elif isinstance(cmd, Stop):
            self._record(robot_id, "STOP")
            return
        else:
            raise TypeError(f"unknown command {cmd!r}")
        t = self._clip_path(r, path)
        r.pose = path(t)
        payload = command_payload(cmd)
        if t < 1.0:
            payload["clipped"] = t
        self._record(robot_id, type(cmd).__name__, payload)
        self._update_shear(robot_id)
        return _scaled(cmd, t)

    def _update_shear(self, robot_id):
        r = self.robots[robot_id]
        face, st = self.contact(robot_id)
        if face is None:
            r.touch_offset = None
            r.shear = 0.0
        elif r.touch_offset is None:
            r.touch_offset = st.tangential_offset
            r.shear = 0.0
        else:
            r.shear = st.tangential_offset - r.touch_offset

    # --- sensing ----------------------------------------------------------
    def read_sensor(self, robot_id: int) -> Estimate:
        r = self.robots[robot_id]
        _, st = self.contact(robot_id)
        if r.sensor.kind == "bumper":
            return Estimate(st.depth, st.angle if st.in_contact else 0.0, st.in_contact)
        feats = add_feature_noise(pin_compressions(st, r.dome), r.sensor.noise_std, r.rng)
        d, a = predict(r.sensor.model, feats)
        return Estimate(d, a, is_contact(d))

    def vision_pose_estimate(self, noise: VisionNoise, rng) -> Pose2:
        """True box pose plus bias plus one Gaussian draw."""
        dx, dy = rng.normal(0.0, 1.0, size=2) * noise.sigma_pos if noise.sigma_pos else (0.0, 0.0)
        dh = rng.normal(0.0, noise.sigma_ang) if noise.sigma_ang else 0.0
        return Pose2(self.box_pose.x + noise.bias_pos[0] + dx, self.box_pose.y + noise.bias_pos[1] + dy,
                     self.box_pose.heading + noise.bias_ang + dh)

    def relative_estimate(self, robot_id: int, estimate: Pose2) -> Pose2:
        return relative_pose(self.robots[robot_id].pose, estimate)

    # --- messaging --------------------------------------------------------
    def send(self, robot_id: int, kind: str) -> Message:
        msg = Message(robot_id, kind, self.tick)
        for other in range(len(self.robots)):
            if other != robot_id:
                self._pending[other].append(msg)
        self._record(robot_id, kind)
        return msg

    def deliver(self, robot_id: int) -> None:
        """Start-of-tick delivery: messages stamped before the current tick."""
        q = self._pending[robot_id]
        while q and q[0].tick_stamp < self.tick:
            self.inbox[robot_id].append(q.popleft())

    def receive(self, robot_id: int, kind: str):
        for m in self.inbox[robot_id]:
            if m.kind == kind:
                return m
        return None

    def sent(self, robot_id: int, kind: str):
        for rec in self.log:
            if rec["robot"] == robot_id and rec["kind"] == kind:
                return rec["tick"]
        return None

    # --- lifting ----------------------------------------------------------
    def contact_spec(self, robot_id: int) -> ContactSpec:
        """The robot's contact expressed in the box frame (depth 0 if none)."""
        face_i, st = self.contact(robot_id)
        r = self.robots[robot_id]
        sp = self.sensor_pose(robot_id)
        if face_i is None:
            return ContactSpec((0.0, 0.0), (1.0, 0.0), 0.0)
        face = self.faces[face_i]
        n_out = np.asarray(face.outward_normal)
        s = r.dome.radius - st.depth
        foot = np.array([sp.x, sp.y]) - s * n_out
        p = self.box_pose.inverse_transform_point(foot)
        h = math.radians(-self.box_pose.heading)
        n_in = -n_out
        n_local = (math.cos(h) * n_in[0] - math.sin(h) * n_in[1], math.sin(h) * n_in[0] + math.cos(h) * n_in[1])
        norm = math.hypot(*n_local)
        return ContactSpec((float(p[0]), float(p[1])), (n_local[0] / norm, n_local[1] / norm),
                           st.depth, st.tangential_offset)

    def _lift(self, robot_id):
        r = self.robots[robot_id]
        spec = self.contact_spec(robot_id)
        r.lift_contact = spec
        self._lift_ticks[robot_id] = self.tick
        self._record(robot_id, "LIFT", {"depth": spec.depth})
        if spec.depth <= 0:
            self._record(robot_id, "lift_failed: no contact")
        if all(t is not None for t in self._lift_ticks) and len(self.robots) == 2 and self.verdict is None:
            c1, c2 = (rb.lift_contact for rb in self.robots)
            self.verdict = lift_outcome(c1, c2, self.box, self.physics)
            self._record(-1, "lift_outcome", {"success": self.verdict.success,
                                               "cause": self.verdict.failure_cause.value})

    def export_log(self) -> str:
        return "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in self.log)


class RobotLink:
    """A robot controller's view of the world (used by the lift tree)."""

    def __init__(self, world: World, robot_id: int):
        self.world = world
        self.robot_id = robot_id

    def execute(self, cmd):
        return self.world.apply_command(self.robot_id, cmd)

    def sense(self) -> Estimate:
        return self.world.read_sensor(self.robot_id)

    def send(self, kind):
        self.world.send(self.robot_id, kind)

    def peer_ready(self, kind) -> bool:
        """Barrier release: the peer's message has been delivered and the
        current tick is past both send stamps, so both robots release on the
        same world step."""
        w = self.world
        msg = None
        for m in w.inbox[self.robot_id]:
            if m.kind == kind:
                msg = m
        if msg is None:
            return False
        own = w.sent(self.robot_id, kind)
        if own is None:
            return False
        return w.tick > max(own, msg.tick_stamp)


# --- single trials ----------------------------------------------------------

@dataclass(frozen=True)
class TrialSetup:
    """Everything a trial needs besides the mode and the seed."""

    box: BoxObject = field(default_factory=BoxObject)
    params: StrategyParams = field(default_factory=StrategyParams)
    physics: PhysicsParams = field(default_factory=PhysicsParams)
    kinematics: KinematicNoise = field(default_factory=KinematicNoise)
    vision: VisionNoise = field(default_factory=VisionNoise)
    sensor_kind: str = "bumper"
    sensor_noise: float = 0.05
    dome: DomeGeometry = field(default_factory=DomeGeometry)
    sensor_offset: float = 100.0
    robot_distance: float = 1100.0
    yaw_range: tuple = (-25.0, 25.0)
    tick_budget: int = 10_000

    def __post_init__(self):
        if self.robot_distance <= self.box.width + self.sensor_offset + self.dome.radius:
            raise ValueError("robots must start clear of the box")
        lo, hi = self.yaw_range
        if not -25.0 <= lo <= hi <= 25.0:
            raise ValueError("yaw range must lie within [-25, 25] degrees")
        if self.tick_budget < 1:
            raise ValueError("tick budget must be >= 1")

    def sensor_mode(self, model=None) -> SensorMode:
        if self.sensor_kind == "bumper":
            return SensorMode("bumper")
        return SensorMode("regressor", model, self.sensor_noise)


@dataclass(frozen=True)
class TrialResult:
    success: bool
    failure_cause: str
    contacts_used: tuple
    final_angles: tuple
    final_depths: tuple
    tangential_offsets: tuple
    ticks: int
    log: str = ""


@dataclass(frozen=True)
class AdjustResult:
    """Outcome of one single-robot pose adjustment, measured on the face the
    robot initially faced."""

    angle_error: float
    distance_error: float
    contacts_used: int
    error: str = ""


def _streams(seed: int, n: int):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _make_robot(setup: TrialSetup, pose: Pose2, rng, model) -> Robot:
    return Robot(pose, setup.dome, setup.sensor_mode(model), rng, setup.sensor_offset)


def _plan_for(world: World, robot_id: int, setup: TrialSetup, estimate: Pose2):
    rel = world.relative_estimate(robot_id, estimate)
    return vision_adjust_plan(rel, setup.params, box_length=setup.box.length,
                              box_width=setup.box.width, sensor_offset=setup.sensor_offset,
                              dome_radius=setup.dome.radius)


def run_lift_trial(setup: TrialSetup, mode: str, seed: int, model=None, initial_yaw=None) -> TrialResult:
    """Two robots start on opposite sides of the box, adjust (tactile
    multi-contact plus depth servo, or the open-loop vision plan), meet at
    the READY barrier, lift, and lower."""
    if mode not in ("tactile", "vision"):
        raise ValueError(f"unknown lift mode {mode!r}")
    rng0, rng1, oracle = _streams(seed, 3)
    yaw = float(oracle.uniform(*setup.yaw_range)) if initial_yaw is None else float(initial_yaw)
    r = setup.robot_distance
    # vision trials never read the tactile sensor
    sensing = setup if mode == "tactile" else replace(setup, sensor_kind="bumper")
    robots = [_make_robot(sensing, Pose2(-r, 0.0, 0.0), rng0, model),
              _make_robot(sensing, Pose2(r, 0.0, 180.0), rng1, model)]
    world = World(setup.box, Pose2(0.0, 0.0, yaw), robots, setup.kinematics, setup.physics)
    estimate = world.vision_pose_estimate(setup.vision, oracle)
    world._record(-1, "start", {"yaw": yaw, "mode": mode})

    trees = []
    for rid in range(2):
        link = RobotLink(world, rid)
        if mode == "tactile":
            hint = world.relative_estimate(rid, estimate)
            hint = (hint.x, hint.y)
            adjust = StepAction("adjust", lambda bb, l=link, h=hint: multi_contact_steps(
                l.sense, l.execute, h, setup.params), "adjust_outcome")
            servo = StepAction("servo", lambda bb, l=link: depth_servo_steps(
                l.sense, l.execute, setup.params), "servo_outcome")
        else:
            plan = _plan_for(world, rid, setup, estimate)
            adjust = StepAction("adjust", lambda bb, l=link, p=plan: vision_plan_steps(p, l.execute))
            servo = None
        trees.append((build_lift_tree(rid, setup.params, link, adjust, servo), Blackboard()))

    done = [None, None]
    cause = ""
    while world.tick < setup.tick_budget and None in done:
        for rid, (tree, bb) in enumerate(trees):
            if done[rid] is not None:
                continue
            world.deliver(rid)
            status = tree.tick(bb)
            if status is not Status.RUNNING:
                done[rid] = status
                if status is Status.FAILURE:
                    cause = bb.get("error", "failure")
                    world._record(rid, "abort", {"error": cause})
        world.tick += 1
        if Status.FAILURE in done:
            break

    contacts = []
    for _, bb in trees:
        out = bb.get("adjust_outcome")
        contacts.append(out.contacts_used if out is not None else 0)
    angles, depths, offsets = [], [], []
    for rid in range(2):
        _, st = world.contact(rid)
        angles.append(st.angle)
        depths.append(st.depth)
        offsets.append(st.tangential_offset)

    if world.verdict is not None:
        success, cause = world.verdict.success, world.verdict.failure_cause.value
    else:
        success = False
        cause = cause or "timeout"
    world._record(-1, "end", {"success": success, "cause": cause})
    return TrialResult(success, cause, tuple(contacts), tuple(angles), tuple(depths),
                       tuple(offsets), world.tick, world.export_log())


def run_adjust_trial(setup: TrialSetup, strategy: str, initial_yaw: float, seed: int,
                     model=None) -> AdjustResult:
    """One robot, one pose adjustment toward the box face it initially faces.

    ``strategy`` is ``self_rotation``, ``object_rotation``, ``multi_contact``
    (tactile, using ``setup.sensor_kind``) or ``vision_plan``.  Errors are the
    absolute contact-angle error and the absolute tangential offset from the
    face centre, both measured on the face's full line.
    """
    rng, oracle = _streams(seed, 2)
    start = Pose2(-setup.robot_distance, 0.0, 0.0)
    world = World(setup.box, Pose2(0.0, 0.0, float(initial_yaw)),
                  [_make_robot(setup, start, rng, model)], setup.kinematics, setup.physics)
    face = world.facing_face(start.position)
    estimate = world.vision_pose_estimate(setup.vision, oracle)
    rel = world.relative_estimate(0, estimate)
    hint = (rel.x, rel.y)
    link = RobotLink(world, 0)
    params = setup.params
    if strategy == "self_rotation":
        gen = single_contact_steps(link.sense, link.execute, params, pivot="self")
    elif strategy == "object_rotation":
        gen = single_contact_steps(link.sense, link.execute, params, hint, "object")
    elif strategy == "multi_contact":
        gen = multi_contact_steps(link.sense, link.execute, hint, params)
    elif strategy == "vision_plan":
        gen = vision_plan_steps(_plan_for(world, 0, setup, estimate), link.execute)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    error = ""
    contacts = 0
    try:
        out = run_to_completion(gen)
        contacts = out.contacts_used if isinstance(out, AdjustOutcome) else 0
    except StrategyError as err:
        error = str(err)
    angle, offset = world.face_metrics(0, face)
    return AdjustResult(abs(angle), abs(offset), contacts, error)
