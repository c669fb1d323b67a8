"""Analytic 2D model of a soft hemispherical tactile dome.

The dome is a circle of radius ``R`` whose centre and axis are given by a
sensor pose.  Contact with a flat face is summarised by a
:class:`ContactState`; internal pins fanned across the dome turn that state
into compressions and lateral marker shifts (:class:`FeatureVector`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import LineSegment, Pose2, normalize_angle

KAPPA_SHEAR = 1.0
KAPPA_LEVER = 0.1


@dataclass(frozen=True)
class DomeGeometry:
    radius: float = 20.0
    pin_count: int = 21
    max_pin_angle: float = 70.0
    pin_angles: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("dome radius must be positive")
        if self.pin_count < 3:
            raise ValueError("need at least 3 pins")
        if not 0 < self.max_pin_angle < 90:
            raise ValueError("max_pin_angle must lie in (0, 90)")
        angles = np.linspace(-self.max_pin_angle, self.max_pin_angle, self.pin_count)
        angles.setflags(write=False)
        object.__setattr__(self, "pin_angles", angles)

    @property
    def feature_size(self) -> int:
        return 2 * self.pin_count


@dataclass(frozen=True)
class ContactState:
    """Ground-truth contact between dome and face.

    ``angle`` is the dome axis heading minus the heading of the face's
    inward normal; ``tangential_offset`` runs along the face from its
    midpoint to the foot of the perpendicular from the dome centre.
    """

    depth: float = 0.0
    angle: float = 0.0
    tangential_offset: float = 0.0
    shear: float = 0.0

    def __post_init__(self):
        if self.depth < 0 or not math.isfinite(self.depth):
            raise ValueError(f"invalid depth {self.depth}")
        if not abs(self.angle) < 90:
            raise ValueError(f"contact angle {self.angle} outside (-90, 90)")

    @property
    def in_contact(self) -> bool:
        return self.depth > 0.0


NO_CONTACT = ContactState()


@dataclass(frozen=True, eq=False)
class FeatureVector:
    compressions: np.ndarray
    lateral_shifts: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.compressions, self.lateral_shifts])

    @classmethod
    def from_array(cls, values) -> "FeatureVector":
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or values.size % 2:
            raise ValueError("feature array must be 1-D with even length")
        m = values.size // 2
        return cls(values[:m].copy(), values[m:].copy())

    def __eq__(self, other):
        if not isinstance(other, FeatureVector):
            return NotImplemented
        return np.array_equal(self.as_array(), other.as_array())

    __hash__ = None


def contact_geometry(sensor_pose: Pose2, face: LineSegment, dome: DomeGeometry) -> ContactState:
    """Contact state of a dome (centre and axis from ``sensor_pose``) against ``face``.

    Non-contact is returned when the dome does not reach the face's line,
    when the foot of the perpendicular falls outside the segment, when the
    centre is behind the face, or when the dome faces away from it.
    """
    ax, ay = face.a
    bx, by = face.b
    ex, ey = bx - ax, by - ay
    L = math.hypot(ex, ey)
    if not L > 0:
        raise ValueError("degenerate surface")
    nx, ny = face.outward_normal
    cx, cy = sensor_pose.x, sensor_pose.y
    s = (cx - ax) * nx + (cy - ay) * ny
    t = ((cx - ax) * ex + (cy - ay) * ey) / L
    offset = t - L / 2.0
    inward_heading = math.degrees(math.atan2(-ny, -nx))
    angle = normalize_angle(sensor_pose.heading - inward_heading)
    facing = abs(angle) < 90.0
    if not facing:
        return ContactState(0.0, 0.0, offset)
    if s < 0 or s >= dome.radius or t < 0 or t > L:
        return ContactState(0.0, angle, offset)
    return ContactState(dome.radius - s, angle, offset)


def bumper_oracle(sensor_pose: Pose2, face: LineSegment, dome: DomeGeometry) -> ContactState:
    """Exact contact pose, as a simulated bumper would report it."""
    return contact_geometry(sensor_pose, face, dome)


def pin_compressions(state: ContactState, dome: DomeGeometry) -> FeatureVector:
    m = dome.pin_count
    if not state.in_contact:
        return FeatureVector(np.zeros(m), np.zeros(m))
    R = dome.radius
    s = R - state.depth
    rel = np.radians(dome.pin_angles + state.angle)
    cos = np.cos(rel)
    delta = np.zeros(m)
    facing = cos > 0
    delta[facing] = np.maximum(0.0, R - s / cos[facing])
    shifts = np.zeros(m)
    active = delta > 0
    shifts[active] = (delta[active] / R) * (
        KAPPA_SHEAR * state.shear + KAPPA_LEVER * R * np.tan(rel[active]))
    return FeatureVector(delta, shifts)


def add_feature_noise(features: FeatureVector, noise_std: float, rng) -> FeatureVector:
    if noise_std < 0:
        raise ValueError("noise_std must be >= 0")
    if noise_std == 0:
        return features
    m = features.compressions.size
    noise = rng.normal(0.0, noise_std, size=2 * m)
    return FeatureVector(np.maximum(features.compressions + noise[:m], 0.0),
                         features.lateral_shifts + noise[m:])


def sense(sensor_pose: Pose2, face: LineSegment, dome: DomeGeometry, noise_std: float, rng,
          shear: float = 0.0) -> FeatureVector:
    """Noisy tactile observation of ``face`` from ``sensor_pose``."""
    if noise_std < 0:
        raise ValueError("noise_std must be >= 0")
    state = contact_geometry(sensor_pose, face, dome)
    if shear and state.in_contact:
        state = replace(state, shear=shear)
    return add_feature_noise(pin_compressions(state, dome), noise_std, rng)
