"""Planar rigid poses and line segments.

Units are millimetres and degrees everywhere; radians only appear inside
trigonometric calls.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def normalize_angle(deg: float) -> float:
    """Wrap an angle in degrees into (-180, 180]."""
    r = math.fmod(deg, 360.0)
    if r <= -180.0:
        r += 360.0
    elif r > 180.0:
        r -= 360.0
    return r


@dataclass(frozen=True)
class Pose2:
    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.heading)):
            raise ValueError(f"non-finite pose {self.x}, {self.y}, {self.heading}")
        object.__setattr__(self, "heading", normalize_angle(self.heading))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def axis(self) -> np.ndarray:
        """Unit vector along the heading."""
        h = math.radians(self.heading)
        return np.array([math.cos(h), math.sin(h)])

    def transform_point(self, p) -> np.ndarray:
        """Map a point from this pose's local frame into the parent frame."""
        h = math.radians(self.heading)
        c, s = math.cos(h), math.sin(h)
        return np.array([self.x + c * p[0] - s * p[1], self.y + s * p[0] + c * p[1]])

    def inverse_transform_point(self, p) -> np.ndarray:
        """Map a parent-frame point into this pose's local frame."""
        h = math.radians(self.heading)
        c, s = math.cos(h), math.sin(h)
        dx, dy = p[0] - self.x, p[1] - self.y
        return np.array([c * dx + s * dy, -s * dx + c * dy])

    def rotate_vector(self, v) -> np.ndarray:
        h = math.radians(self.heading)
        c, s = math.cos(h), math.sin(h)
        return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


IDENTITY = Pose2()


def compose(parent: Pose2, child: Pose2) -> Pose2:
    """Rigid-transform composition ``parent ∘ child``."""
    p = parent.transform_point((child.x, child.y))
    return Pose2(float(p[0]), float(p[1]), parent.heading + child.heading)


def inverse(pose: Pose2) -> Pose2:
    h = math.radians(pose.heading)
    c, s = math.cos(h), math.sin(h)
    return Pose2(-(c * pose.x + s * pose.y), s * pose.x - c * pose.y, -pose.heading)


def relative_pose(frm: Pose2, to: Pose2) -> Pose2:
    """Pose of ``to`` expressed in the frame of ``frm``, so that
    ``compose(frm, relative_pose(frm, to)) == to``."""
    return compose(inverse(frm), to)


def rotate_about(pose: Pose2, centre, dtheta: float) -> Pose2:
    """Rotate a pose rigidly about a parent-frame point by ``dtheta`` degrees."""
    t = math.radians(dtheta)
    c, s = math.cos(t), math.sin(t)
    dx, dy = pose.x - centre[0], pose.y - centre[1]
    return Pose2(centre[0] + c * dx - s * dy, centre[1] + s * dx + c * dy, pose.heading + dtheta)


def poses_close(a: Pose2, b: Pose2, tol: float = 1e-9) -> bool:
    return (abs(a.x - b.x) <= tol and abs(a.y - b.y) <= tol
            and abs(normalize_angle(a.heading - b.heading)) <= tol)


@dataclass(frozen=True)
class LineSegment:
    """A flat face: endpoints ``a``, ``b`` and the outward unit normal."""

    a: tuple
    b: tuple
    outward_normal: tuple

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        n = np.asarray(self.outward_normal, dtype=float)
        d = b - a
        length = float(np.hypot(d[0], d[1]))
        if not length > 0.0:
            raise ValueError("degenerate surface")
        if abs(float(np.hypot(n[0], n[1])) - 1.0) > 1e-9 or abs(float(n @ d)) > 1e-9 * length:
            raise ValueError("outward normal must be a unit vector perpendicular to the face")
        object.__setattr__(self, "a", (float(a[0]), float(a[1])))
        object.__setattr__(self, "b", (float(b[0]), float(b[1])))
        object.__setattr__(self, "outward_normal", (float(n[0]), float(n[1])))

    @classmethod
    def from_points(cls, a, b) -> "LineSegment":
        """Face running ``a -> b`` on a counter-clockwise polygon; the
        outward normal is the right-hand perpendicular of ``b - a``."""
        dx, dy = b[0] - a[0], b[1] - a[1]
        length = math.hypot(dx, dy)
        if not length > 0.0:
            raise ValueError("degenerate surface")
        return cls(tuple(a), tuple(b), (dy / length, -dx / length))

    @property
    def length(self) -> float:
        return math.hypot(self.b[0] - self.a[0], self.b[1] - self.a[1])

    @property
    def midpoint(self) -> np.ndarray:
        return np.array([(self.a[0] + self.b[0]) / 2.0, (self.a[1] + self.b[1]) / 2.0])

    @property
    def tangent(self) -> np.ndarray:
        L = self.length
        return np.array([(self.b[0] - self.a[0]) / L, (self.b[1] - self.a[1]) / L])

    @property
    def inward_normal(self) -> np.ndarray:
        return -np.asarray(self.outward_normal)
