"""Two-contact force-closure checks and the quasi-static lift outcome.

All contact quantities are expressed in the box frame: origin at the
geometric centre, x across the gap between the two gripped faces
(``length``), y along those faces (``width``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class FailureCause(str, Enum):
    NONE = "none"
    NOT_OPPOSITE_SIDES = "NotOppositeSides"
    CONE_MISSES_COM = "ConeMissesCom"
    FORCE_IMBALANCE = "ForceImbalance"
    TORQUE_IMBALANCE = "TorqueImbalance"
    INSUFFICIENT_FRICTION = "InsufficientFriction"
    PITCH_INSTABILITY = "PitchInstability"


@dataclass(frozen=True)
class ContactSpec:
    point: tuple
    inward_normal: tuple
    depth: float
    tangential_offset: float = 0.0

    def __post_init__(self):
        if self.depth < 0:
            raise ValueError("contact depth must be >= 0")
        n = self.inward_normal
        if abs(math.hypot(n[0], n[1]) - 1.0) > 1e-9:
            raise ValueError("inward_normal must be a unit vector")


@dataclass(frozen=True)
class BoxObject:
    width: float = 60.0
    length: float = 30.0
    height: float = 30.0
    mass: float = 0.2
    com_offset: tuple = (0.0, 0.0)
    com_height: float = 15.0
    friction_mu: float = 0.5

    def __post_init__(self):
        if min(self.width, self.length, self.height) <= 0 or self.mass <= 0:
            raise ValueError("box dimensions and mass must be positive")
        if self.friction_mu <= 0:
            raise ValueError("friction coefficient must be positive")
        if abs(self.com_offset[0]) > self.length / 2 or abs(self.com_offset[1]) > self.width / 2:
            raise ValueError("centre-of-mass offset lies outside the box")
        if self.com_height < 0:
            raise ValueError("com_height must be >= 0")

    def corners(self):
        """Counter-clockwise footprint corners in the box frame."""
        hx, hy = self.length / 2, self.width / 2
        return [(-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)]


@dataclass(frozen=True)
class FcgTolerances:
    normal_deg: float = 10.0
    force: float = 1.0
    torque: float = 20.0


@dataclass(frozen=True)
class PhysicsParams:
    contact_stiffness: float = 2.0
    gravity: float = 9.81
    pitch_lever: float = 15.0
    tolerances: FcgTolerances = field(default_factory=FcgTolerances)


@dataclass(frozen=True)
class FcgReport:
    passed: bool
    cause: FailureCause
    normal_angle: float
    net_force: float
    net_torque: float


@dataclass(frozen=True)
class LiftVerdict:
    success: bool
    failure_cause: FailureCause = FailureCause.NONE

    def __post_init__(self):
        if self.success != (self.failure_cause is FailureCause.NONE):
            raise ValueError("success must coincide with an empty failure cause")


def _angle_between(u, v) -> float:
    cross = u[0] * v[1] - u[1] * v[0]
    dot = u[0] * v[0] + u[1] * v[1]
    return math.degrees(math.atan2(abs(cross), dot))


def friction_cone_contains(contact: ContactSpec, mu: float, point) -> bool:
    """Whether ``point`` lies inside the contact's friction cone (half-angle atan(mu))."""
    v = (point[0] - contact.point[0], point[1] - contact.point[1])
    if math.hypot(*v) < 1e-12:
        return True
    return _angle_between(v, contact.inward_normal) <= math.degrees(math.atan(mu)) + 1e-12


def contact_forces(c1: ContactSpec, c2: ContactSpec, stiffness: float):
    return stiffness * c1.depth, stiffness * c2.depth


def fcg_check(c1: ContactSpec, c2: ContactSpec, box: BoxObject,
              tolerances: FcgTolerances | None = None, stiffness: float = 2.0) -> FcgReport:
    """Force-closure checks in order: opposite sides, CoM inside both cones,
    force balance, torque balance about the CoM.  The first failure names
    the cause."""
    tol = tolerances or FcgTolerances()
    n1, n2 = np.asarray(c1.inward_normal), np.asarray(c2.inward_normal)
    N1, N2 = contact_forces(c1, c2, stiffness)
    com = np.asarray(box.com_offset, dtype=float)
    normal_angle = _angle_between(n1, -n2)
    f = N1 * n1 + N2 * n2
    net_force = float(math.hypot(f[0], f[1]))
    r1 = np.asarray(c1.point) - com
    r2 = np.asarray(c2.point) - com
    net_torque = float(abs(N1 * (r1[0] * n1[1] - r1[1] * n1[0]) + N2 * (r2[0] * n2[1] - r2[1] * n2[0])))

    cause = FailureCause.NONE
    if normal_angle > tol.normal_deg:
        cause = FailureCause.NOT_OPPOSITE_SIDES
    elif not (friction_cone_contains(c1, box.friction_mu, com)
              and friction_cone_contains(c2, box.friction_mu, com)):
        cause = FailureCause.CONE_MISSES_COM
    elif net_force > tol.force:
        cause = FailureCause.FORCE_IMBALANCE
    elif net_torque > tol.torque:
        cause = FailureCause.TORQUE_IMBALANCE
    return FcgReport(cause is FailureCause.NONE, cause, normal_angle, net_force, net_torque)


def grip_capacity(c1: ContactSpec, c2: ContactSpec, box: BoxObject, physics: PhysicsParams) -> float:
    """Largest vertical friction force the two contacts can transmit, N."""
    N1, N2 = contact_forces(c1, c2, physics.contact_stiffness)
    return box.friction_mu * (N1 + N2)


def lift_outcome(c1: ContactSpec, c2: ContactSpec, box: BoxObject,
                 physics: PhysicsParams | None = None) -> LiftVerdict:
    physics = physics or PhysicsParams()
    if c1.depth <= 0 or c2.depth <= 0:
        return LiftVerdict(False, FailureCause.INSUFFICIENT_FRICTION)
    report = fcg_check(c1, c2, box, physics.tolerances, physics.contact_stiffness)
    if not report.passed:
        return LiftVerdict(False, report.cause)
    weight = box.mass * physics.gravity
    capacity = grip_capacity(c1, c2, box, physics)
    if capacity < weight:
        return LiftVerdict(False, FailureCause.INSUFFICIENT_FRICTION)
    # lever-arm heuristic: tipping moment of the load vs frictional restoring moment
    if weight * box.com_height > capacity * physics.pitch_lever:
        return LiftVerdict(False, FailureCause.PITCH_INSTABILITY)
    return LiftVerdict(True)
