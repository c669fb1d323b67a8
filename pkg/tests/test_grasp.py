import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import random_contact, ray_cone_contains
from tacmm.grasp import (BoxObject, ContactSpec, FailureCause, FcgTolerances, LiftVerdict,
                         PhysicsParams, fcg_check, friction_cone_contains, grip_capacity,
                         lift_outcome)

BOX = BoxObject()


def grasp(d1=2.6, d2=2.6, y1=0.0, y2=0.0):
    return (ContactSpec((-15.0, y1), (1.0, 0.0), d1), ContactSpec((15.0, y2), (-1.0, 0.0), d2))


def test_cone_axis_and_edge():
    c = ContactSpec((0.0, 0.0), (1.0, 0.0), 1.0)
    assert friction_cone_contains(c, 0.5, (10.0, 0.0))
    t = math.radians(30)
    assert not friction_cone_contains(c, 0.5, (math.cos(t), math.sin(t)))
    t = math.radians(26)
    assert friction_cone_contains(c, 0.5, (math.cos(t), math.sin(t)))
    assert friction_cone_contains(c, 0.5, (0.0, 0.0))


def test_cone_zero_friction_limit():
    c = ContactSpec((0.0, 0.0), (0.0, 1.0), 1.0)
    assert friction_cone_contains(c, 1e-12, (0.0, 5.0))
    assert not friction_cone_contains(c, 1e-12, (1e-3, 5.0))


def test_cone_matches_ray_sampling():
    rng = np.random.default_rng(0)
    disagree = 0
    for _ in range(2000):
        c = random_contact(rng, BOX)
        mu = rng.uniform(0.05, 2.0)
        p = rng.uniform(-40, 40, size=2)
        disagree += friction_cone_contains(c, mu, p) != ray_cone_contains(c, mu, p)
    assert disagree == 0


def test_symmetric_grasp_passes():
    rep = fcg_check(*grasp(), BOX)
    assert rep.passed and rep.cause is FailureCause.NONE
    assert rep.net_force == pytest.approx(0.0) and rep.net_torque == pytest.approx(0.0)


def test_same_side_contacts():
    c1 = ContactSpec((-15.0, 0.0), (1.0, 0.0), 2.0)
    c2 = ContactSpec((0.0, -30.0), (0.0, 1.0), 2.0)
    assert fcg_check(c1, c2, BOX).cause is FailureCause.NOT_OPPOSITE_SIDES


def test_offset_contacts_miss_com():
    # tan(26.57 deg) * 15 mm ~= 7.5 mm: 20 mm offsets put the CoM outside both cones
    rep = fcg_check(*grasp(y1=20.0, y2=-20.0), BOX)
    assert rep.cause is FailureCause.CONE_MISSES_COM


def test_unequal_depths_force_imbalance():
    rep = fcg_check(*grasp(2.6, 1.0), BOX, FcgTolerances(force=1.0), stiffness=2.0)
    assert rep.cause is FailureCause.FORCE_IMBALANCE
    assert rep.net_force == pytest.approx(2.0 * 1.6)


def test_torque_imbalance():
    # 4 mm offsets stay inside the cones; couple = 2 * 5.2 N * 4 mm = 41.6 N mm
    rep = fcg_check(*grasp(y1=4.0, y2=-4.0), BOX, FcgTolerances(torque=20.0))
    assert rep.cause is FailureCause.TORQUE_IMBALANCE
    assert rep.net_torque == pytest.approx(41.6)


def test_empty_box_lifts():
    physics = PhysicsParams()
    c1, c2 = grasp()
    assert grip_capacity(c1, c2, BOX, physics) == pytest.approx(5.2)
    assert lift_outcome(c1, c2, BOX, physics) == LiftVerdict(True)


def test_heavy_box_slips():
    heavy = replace(BOX, mass=0.6)
    assert lift_outcome(*grasp(), heavy).failure_cause is FailureCause.INSUFFICIENT_FRICTION


def test_zero_depth_is_insufficient_friction():
    assert lift_outcome(*grasp(0.0, 2.6), BOX).failure_cause is FailureCause.INSUFFICIENT_FRICTION


def test_pitch_boundary():
    physics = PhysicsParams()
    # m g h <= mu (N1 + N2) lever  ->  h* = 5.2 * 15 / (0.2 * 9.81)
    h_star = 5.2 * 15.0 / (0.2 * 9.81)
    assert lift_outcome(*grasp(), replace(BOX, com_height=h_star - 1e-6), physics).success
    top = lift_outcome(*grasp(), replace(BOX, com_height=h_star + 1e-6), physics)
    assert top.failure_cause is FailureCause.PITCH_INSTABILITY


def test_verdict_invariant():
    with pytest.raises(ValueError):
        LiftVerdict(True, FailureCause.PITCH_INSTABILITY)
    with pytest.raises(ValueError):
        LiftVerdict(False)


def test_box_validation():
    with pytest.raises(ValueError):
        BoxObject(mass=0)
    with pytest.raises(ValueError):
        BoxObject(com_offset=(40.0, 0.0))
    with pytest.raises(ValueError):
        BoxObject(friction_mu=0.0)


def test_swap_symmetry_random():
    rng = np.random.default_rng(1)
    for _ in range(500):
        c1, c2 = random_contact(rng, BOX), random_contact(rng, BOX)
        a, b = fcg_check(c1, c2, BOX), fcg_check(c2, c1, BOX)
        assert (a.passed, a.cause) == (b.passed, b.cause)
        assert a.net_force == pytest.approx(b.net_force)
        assert a.net_torque == pytest.approx(b.net_torque)


near_grasp = st.tuples(st.floats(-8, 8), st.floats(-8, 8), st.floats(0.5, 5), st.floats(0.5, 5),
                       st.floats(-8, 8))


@settings(max_examples=300)
@given(near_grasp, st.floats(0.05, 1.5), st.floats(0.0, 1.0))
def test_more_friction_never_breaks_a_grasp(g, mu, extra):
    y1, y2, d1, d2, tilt = g
    t = math.radians(tilt)
    c1 = ContactSpec((-15.0, y1), (math.cos(t), math.sin(t)), d1)
    c2 = ContactSpec((15.0, y2), (-1.0, 0.0), d2)
    low = replace(BOX, friction_mu=mu)
    high = replace(BOX, friction_mu=mu + extra)
    if fcg_check(c1, c2, low).passed:
        assert fcg_check(c1, c2, high).passed
    if lift_outcome(c1, c2, low).success:
        assert lift_outcome(c1, c2, high).success


@given(st.floats(0.5, 5), st.floats(0.1, 3.0))
def test_depth_scaling_checks_independently(d, k):
    """Scaling both depths keeps force/torque balance of an aligned grasp,
    while capacity scales linearly and decides the lift on its own."""
    c1, c2 = grasp(d, d)
    s1, s2 = grasp(d * k, d * k)
    assert fcg_check(c1, c2, BOX).passed and fcg_check(s1, s2, BOX).passed
    physics = PhysicsParams()
    assert grip_capacity(s1, s2, BOX, physics) == pytest.approx(k * grip_capacity(c1, c2, BOX, physics))
    weight = BOX.mass * physics.gravity
    cap = grip_capacity(s1, s2, BOX, physics)
    expect_ok = cap >= weight and weight * BOX.com_height <= cap * physics.pitch_lever
    assert lift_outcome(s1, s2, BOX, physics).success == expect_ok
