"""Acceptance suite: one test per criterion, each recording a PASS/FAIL
line that is repeated in the terminal summary."""
import json
import time

import numpy as np
import pytest

from oracles import (bt_truth_table_mismatches, fd_relative_errors, lift_before_ready,
                     model_check_barrier, random_contact, ray_cone_contains)
from tacmm.bt import Status
from tacmm.grasp import BoxObject, fcg_check, friction_cone_contains
from tacmm.harness import experiments
from tacmm.harness.config import default_config
from tacmm.harness.experiments import (lift_checks, lift_csv, run_lift_suite, run_pose_sweep,
                                       sweep_checks, sweep_csv, train_from_spec)
from tacmm.regressor import predict
from tacmm.tactile import ContactState, DomeGeometry, pin_compressions

pytestmark = pytest.mark.slow

TIMINGS = {}


@pytest.fixture(scope="session")
def trained():
    spec = default_config().model
    t0 = time.perf_counter()
    model, report = train_from_spec(spec)
    TIMINGS["train"] = time.perf_counter() - t0
    return model, report


@pytest.fixture(scope="session")
def sweep(trained):
    t0 = time.perf_counter()
    rep = run_pose_sweep(default_config(), trained[0])
    TIMINGS["sweep"] = time.perf_counter() - t0
    return rep


@pytest.fixture(scope="session")
def lift(trained):
    logs = {}
    t0 = time.perf_counter()
    rep = run_lift_suite(default_config(), model=trained[0], logs=logs)
    TIMINGS["lift"] = time.perf_counter() - t0
    return rep, logs


def test_criterion_1_regressor_quality(trained, record):
    model, rep = trained
    x = pin_compressions(ContactState(2.6, 12.0), DomeGeometry())
    predict(model, x)
    times = []
    for _ in range(1000):
        t0 = time.perf_counter()
        predict(model, x)
        times.append(time.perf_counter() - t0)
    per_call = float(np.median(times))
    ok = (rep.mae_depth <= 0.26 and rep.mae_angle <= 1.06 and per_call <= 1e-3
          and TIMINGS["train"] <= 120.0)
    record(1, ok, f"mae_depth={rep.mae_depth:.3f}mm (<=0.26) mae_angle={rep.mae_angle:.3f}deg (<=1.06) "
                  f"predict={1e6 * per_call:.0f}us (<=1000) train+eval={TIMINGS['train']:.1f}s (<=120)")
    assert ok


def test_criterion_2_contact_discrimination(trained, record):
    _, rep = trained
    acc = rep.contact_classification_accuracy
    record(2, acc >= 0.99, f"is_contact accuracy={acc:.4f} (>=0.99) on {rep.n_samples} held-out samples")
    assert acc >= 0.99


def test_criterion_3_gradient_oracle(record):
    errs = np.concatenate([fd_relative_errors(60, seed=s, hidden=64) for s in range(3)])
    ok = errs.size >= 100 and errs.max() <= 1e-4
    record(3, ok, f"{errs.size} probes, max relative error={errs.max():.2e} (<=1e-4)")
    assert ok


def test_criterion_4_sweep_trends(sweep, record):
    checks = sweep_checks(sweep, ceiling_strategies=("object_rotation", "multi_contact"))
    trend = [c for c in checks if c[0].startswith("sweep trend")]
    ok = len(trend) == 2 and all(c[1] for c in trend) and TIMINGS["sweep"] <= 120.0
    detail = "; ".join(f"{c[0]}: {c[2]}" for c in trend)
    # self-rotation is reported but not held to the object-centre ceilings
    selfrot = sweep.mae("self_rotation", "bumper")
    edge = ", ".join(f"{a:g}: {selfrot[a][0]:.2f}deg/{selfrot[a][1]:.1f}mm" for a in (-25.0, 25.0))
    record(4, ok, f"{detail}; self_rotation/bumper (reported only) {edge}; "
                  f"runtime={TIMINGS['sweep']:.1f}s (<=120)")
    assert ok


def test_criterion_5_strategy_ordering(sweep, record):
    multi = sweep.mae("multi_contact", "regressor")
    single = sweep.mae("object_rotation", "regressor")
    angles = [a for a in sorted(multi) if abs(a) >= 10]
    bad = [a for a in angles if not multi[a][0] < single[a][0]]
    detail = ", ".join(f"{a:g}: {multi[a][0]:.3f} vs {single[a][0]:.3f}" for a in angles)
    record(5, not bad, f"multi vs single angle MAE (deg) {detail}"
                       + (f"; not strictly lower at {[float(a) for a in bad]}" if bad else ""))
    assert not bad


def test_criterion_6_lift_ordering(lift, record):
    rep, _ = lift
    checks = lift_checks(rep, heaviest="500g top")
    ok = all(c[1] for c in checks) and TIMINGS["lift"] <= 300.0
    agg = f"tactile={100 * rep.aggregate('tactile'):.0f}% vision={100 * rep.aggregate('vision'):.0f}%"
    record(6, ok, f"{agg}; " + "; ".join(f"{'ok' if c[1] else 'NOT'} {c[0]} ({c[2]})" for c in checks)
           + f"; runtime={TIMINGS['lift']:.1f}s (<=300)")
    assert ok


def test_criterion_7_bt_semantics(record):
    cases, bad = bt_truth_table_mismatches(3)
    record(7, not bad, f"{cases} composite/status-tuple cases, {len(bad)} mismatches")
    assert not bad


def test_criterion_8_fcg_oracles(record):
    rng = np.random.default_rng(2024)
    box = BoxObject()
    cone_bad = 0
    for _ in range(10_000):
        c = random_contact(rng, box)
        mu = rng.uniform(0.05, 2.0)
        p = rng.uniform(-40, 40, size=2)
        cone_bad += friction_cone_contains(c, mu, p) != ray_cone_contains(c, mu, p)
    swap_bad = 0
    for _ in range(1000):
        c1, c2 = random_contact(rng, box), random_contact(rng, box)
        a, b = fcg_check(c1, c2, box), fcg_check(c2, c1, box)
        swap_bad += (a.passed, a.cause) != (b.passed, b.cause) or \
            abs(a.net_force - b.net_force) > 1e-9 or abs(a.net_torque - b.net_torque) > 1e-9
    ok = cone_bad == 0 and swap_bad == 0
    record(8, ok, f"cone vs ray sampling: {cone_bad}/10000 disagreements; swap asymmetries: {swap_bad}/1000")
    assert ok


def test_criterion_9_coordination_safety(lift, record):
    scenarios = [((0,), (0,)), ((1,), (3,)), ((3,), (1,)), ((2,), (2,)), ((1,), (0, Status.FAILURE))]
    total = 0
    violations = []
    for adjust in scenarios:
        n, _, bad, _ = model_check_barrier(adjust, max_ticks=20)
        total += n
        violations += bad
    # every recorded lift trial obeys the same ordering

    class _Log:
        def __init__(self, text):
            self.log = [json.loads(line) for line in text.splitlines()]

    _, logs = lift
    traces = [_Log(text) for text in logs.values()]
    trace_bad = sum(lift_before_ready(t) for t in traces)
    lifted = sum(any(r["kind"] == "LIFT" for r in t.log) for t in traces)
    ok = not violations and trace_bad == 0 and lifted > 0
    record(9, ok, f"{total:.3g} interleavings of <=20 ticks over {len(scenarios)} controller pairs, "
                  f"{len(violations)} violations; {trace_bad}/{len(logs)} suite traces with Lift before both READY "
                  f"({lifted} traces contain a Lift)")
    assert ok


def test_criterion_10_determinism(sweep, lift, record):
    experiments._MODEL_CACHE.clear()
    cfg = default_config()
    model, _ = train_from_spec(cfg.model)
    same_sweep = sweep_csv(run_pose_sweep(cfg, model)) == sweep_csv(sweep)
    same_lift = lift_csv(run_lift_suite(cfg, model=model)) == lift_csv(lift[0])
    ok = same_sweep and same_lift
    record(10, ok, f"sweep CSV identical={same_sweep}, lift CSV identical={same_lift}")
    assert ok
