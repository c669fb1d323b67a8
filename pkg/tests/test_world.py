import json
from dataclasses import replace

import numpy as np
import pytest

from tacmm.geometry import Pose2
from tacmm.grasp import BoxObject
from tacmm.strategies import Translate
from tacmm.tactile import DomeGeometry
from tacmm.world import (MAX_PENETRATION, KinematicNoise, Robot, RobotLink, SensorMode, TrialSetup,
                         VisionNoise, World, run_adjust_trial, run_lift_trial)

EXACT = KinematicNoise(0.0, 0.0)


def two_robot_world():
    dome = DomeGeometry()
    robots = [Robot(Pose2(-1100, 0, 0), dome, SensorMode("bumper"), np.random.default_rng(0)),
              Robot(Pose2(1100, 0, 180), dome, SensorMode("bumper"), np.random.default_rng(1))]
    return World(BoxObject(), Pose2(), robots, EXACT)


def test_translation_noise_distribution():
    dome = DomeGeometry()
    rng = np.random.default_rng(5)
    dist = []
    for _ in range(4000):
        robot = Robot(Pose2(-5000, 0, 0), dome, SensorMode("bumper"), rng)
        world = World(BoxObject(), Pose2(), [robot], KinematicNoise(0.02, 0.0))
        world.apply_command(0, Translate(1000.0))
        dist.append(robot.pose.x + 5000)
    assert np.mean(dist) == pytest.approx(1000.0, abs=1.5)
    assert np.std(dist) == pytest.approx(20.0, rel=0.05)


def test_vision_estimate_exact_and_biased():
    world = two_robot_world()
    rng = np.random.default_rng(0)
    assert world.vision_pose_estimate(VisionNoise(0, 0), rng) == world.box_pose
    est = world.vision_pose_estimate(VisionNoise(0, 0, bias_ang=3.0), rng)
    assert est.heading == pytest.approx(3.0)


def test_vision_estimate_spread():
    world = two_robot_world()
    rng = np.random.default_rng(1)
    xs = [world.vision_pose_estimate(VisionNoise(10.0, 0.0), rng).x for _ in range(10_000)]
    assert np.std(xs) == pytest.approx(10.0, rel=0.05)


def test_noise_validation():
    with pytest.raises(ValueError):
        VisionNoise(sigma_pos=-1)
    with pytest.raises(ValueError):
        KinematicNoise(k_trans=-0.1)
    with pytest.raises(ValueError):
        SensorMode("regressor")


def test_message_delivery_next_tick_and_fifo():
    world = two_robot_world()
    world.tick = 4
    world.send(0, "READY")
    world.send(0, "DONE")
    world.deliver(1)
    assert world.receive(1, "READY") is None
    world.tick = 5
    world.deliver(1)
    assert [m.kind for m in world.inbox[1]] == ["READY", "DONE"]
    assert world.receive(1, "READY").tick_stamp == 4


def test_peer_ready_waits_for_both_stamps():
    world = two_robot_world()
    l0, l1 = RobotLink(world, 0), RobotLink(world, 1)
    l0.send("READY")
    assert not l1.peer_ready("READY")
    world.tick += 1
    world.deliver(1)
    assert not l1.peer_ready("READY")  # own READY not sent yet
    l1.send("READY")
    assert not l1.peer_ready("READY")  # same tick as own send
    world.deliver(0)
    assert not l0.peer_ready("READY")
    world.tick += 1
    world.deliver(0)
    world.deliver(1)
    assert l0.peer_ready("READY") and l1.peer_ready("READY")


def lift_ticks(log_text):
    recs = [json.loads(line) for line in log_text.splitlines()]
    return recs, {r["robot"]: r["tick"] for r in recs if r["kind"] == "LIFT"}


def assert_ready_before_lift(log_text):
    recs, _ = lift_ticks(log_text)
    ready = set()
    for r in recs:
        if r["kind"] == "READY":
            ready.add(r["robot"])
        if r["kind"] == "LIFT":
            assert ready == {0, 1}


@pytest.mark.parametrize("seed", range(5))
def test_empty_box_tactile_bumper_succeeds(seed):
    res = run_lift_trial(TrialSetup(), "tactile", seed)
    assert res.success, res.failure_cause
    assert all(abs(d - 2.6) <= 0.2 for d in res.final_depths)
    _, ticks = lift_ticks(res.log)
    assert len(ticks) == 2 and ticks[0] == ticks[1]
    assert_ready_before_lift(res.log)


@pytest.mark.parametrize("yaw", [-25.0, 0.0, 18.0])
def test_vision_zero_noise_succeeds(yaw):
    setup = TrialSetup(kinematics=EXACT, vision=VisionNoise(0.0, 0.0))
    res = run_lift_trial(setup, "vision", 3, initial_yaw=yaw)
    assert res.success, res.failure_cause
    assert_ready_before_lift(res.log)


def test_lift_trial_deterministic():
    a = run_lift_trial(TrialSetup(), "tactile", 123)
    b = run_lift_trial(TrialSetup(), "tactile", 123)
    assert a.log == b.log and a == b
    c = run_lift_trial(TrialSetup(), "tactile", 124)
    assert c.log != a.log


def test_timeout():
    res = run_lift_trial(TrialSetup(tick_budget=5), "tactile", 0)
    assert not res.success and res.failure_cause == "timeout"
    assert res.ticks == 5


def test_penetration_bound(monkeypatch, model):
    worst = [0.0]
    original = World.apply_command

    def checked(self, rid, cmd):
        out = original(self, rid, cmd)
        for i in range(len(self.robots)):
            worst[0] = max(worst[0], self.true_depth(i))
        return out

    monkeypatch.setattr(World, "apply_command", checked)
    heavy = BoxObject(mass=0.7, com_height=25.7, friction_mu=0.8)
    for seed in range(4):
        for setup in (TrialSetup(), TrialSetup(sensor_kind="regressor", box=heavy)):
            for mode in ("tactile", "vision"):
                run_lift_trial(setup, mode, seed, model)
    assert 0.0 < worst[0] <= MAX_PENETRATION + 1e-9


def test_regressor_reading_near_truth(model):
    """One-shot readings at a fixed contact are within the model's error
    bands on average over seeds."""
    dome = DomeGeometry()
    errs_d, errs_a = [], []
    for seed in range(100):
        robot = Robot(Pose2(-15 - 20 + 2.6 - 100, 0, 0), dome, SensorMode("regressor", model, 0.05),
                      np.random.default_rng(seed))
        world = World(BoxObject(), Pose2(0, 0, -8.0), [robot], EXACT)
        _, st_ = world.contact(0)
        est = world.read_sensor(0)
        errs_d.append(abs(est.depth - st_.depth))
        errs_a.append(abs(est.angle - st_.angle))
    assert np.mean(errs_d) <= 0.26 and np.mean(errs_a) <= 1.06


@pytest.mark.parametrize("yaw", [-25.0, -15.0, -5.0, 5.0, 20.0, 25.0])
def test_multi_contact_zero_noise_always_below_threshold(yaw):
    setup = TrialSetup(kinematics=EXACT)
    for seed in range(10):
        res = run_adjust_trial(setup, "multi_contact", yaw, seed)
        assert res.error == "" and res.angle_error < setup.params.angle_threshold


def test_adjust_trial_unknown_strategy():
    with pytest.raises(ValueError):
        run_adjust_trial(TrialSetup(), "teleport", 0.0, 0)
    with pytest.raises(ValueError):
        run_lift_trial(TrialSetup(), "telepathy", 0)


def test_setup_validation():
    with pytest.raises(ValueError):
        TrialSetup(yaw_range=(-30.0, 0.0))
    with pytest.raises(ValueError):
        TrialSetup(robot_distance=100.0)
    with pytest.raises(ValueError):
        TrialSetup(tick_budget=0)


def test_failed_adjust_aborts_trial():
    # robots that face away from the box never find it
    setup = replace(TrialSetup(), params=replace(TrialSetup().params, approach_budget=50.0))
    res = run_lift_trial(setup, "tactile", 0)
    assert not res.success and res.failure_cause == "object not found"
    assert '"LIFT"' not in res.log


def test_model_checker_catches_broken_barrier(monkeypatch):
    from oracles import model_check_barrier

    _, _, bad, _ = model_check_barrier(((1,), (2,)), max_ticks=8)
    assert not bad
    monkeypatch.setattr(RobotLink, "peer_ready", lambda self, kind: True)
    _, _, bad, _ = model_check_barrier(((1,), (2,)), max_ticks=8)
    assert bad
