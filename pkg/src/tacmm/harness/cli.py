"""Command line: ``tacmm {train,eval,sweep,lift,report}``.

Exit codes: 0 success, 1 configuration or input error, 2 a ``--assert``
check failed.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from ..regressor import RegressorModel, evaluate, generate_dataset, split
from .config import LIFT_MODES, ConfigError, default_config, load_config
from .experiments import (lift_checks, lift_csv, run_lift_suite, run_pose_sweep, sweep_checks,
                          sweep_csv, train_command)
from .report import ReportError, lift_table, report, sweep_table

DEPTH_CEILING = 0.26
ANGLE_CEILING = 1.06
CONTACT_ONLY_DEPTH_CEILING = 0.19


def _scenario(args):
    s = load_config(args.config) if args.config else default_config()
    return s.with_overrides(seed=args.seed, trials=getattr(args, "trials", None))


def _emit(text: str, out):
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _print_checks(checks) -> bool:
    ok = True
    for name, passed, detail in checks:
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
        ok = ok and passed
    return ok


def _report_checks(rep, contact_only: bool):
    depth_ceiling = CONTACT_ONLY_DEPTH_CEILING if contact_only else DEPTH_CEILING
    return [("depth MAE", rep.mae_depth <= depth_ceiling, f"{rep.mae_depth:.4f} <= {depth_ceiling}"),
            ("angle MAE", rep.mae_angle <= ANGLE_CEILING, f"{rep.mae_angle:.4f} <= {ANGLE_CEILING}")]


def cmd_train(args) -> int:
    s = _scenario(args)
    spec = s.model if args.seed is None else replace(s.model, seed=args.seed)
    rep = train_command(spec, args.out, include_noncontact=not args.no_noncontact)
    print(rep.format())
    print(f"model written to {args.out}")
    if args.assert_:
        return 0 if _print_checks(_report_checks(rep, args.no_noncontact)) else 2
    return 0


def cmd_eval(args) -> int:
    s = _scenario(args)
    spec = s.model if args.seed is None else replace(s.model, seed=args.seed)
    try:
        model = RegressorModel.load(args.model)
    except (OSError, ValueError) as err:
        raise ConfigError(f"{args.model}: {err}") from None
    data = generate_dataset(spec.n_contact, 0 if args.no_noncontact else spec.n_noncontact,
                            noise_std=spec.noise_std, seed=spec.seed)
    _, test = split(data, spec.train_fraction, seed=spec.seed)
    rep = evaluate(model, test)
    print(rep.format())
    if args.assert_:
        return 0 if _print_checks(_report_checks(rep, args.no_noncontact)) else 2
    return 0


def cmd_sweep(args) -> int:
    s = _scenario(args)
    rep = run_pose_sweep(s)
    _emit(sweep_csv(rep), args.out)
    print(sweep_table(rep), file=sys.stderr if not args.out else sys.stdout)
    if args.assert_:
        return 0 if _print_checks(sweep_checks(rep)) else 2
    return 0


def cmd_lift(args) -> int:
    s = _scenario(args)
    modes = (args.mode,) if args.mode else LIFT_MODES
    rep = run_lift_suite(s, modes)
    _emit(lift_csv(rep), args.out)
    print(lift_table(rep), file=sys.stderr if not args.out else sys.stdout)
    if args.assert_:
        if len(modes) < 2:
            print("FAIL  --assert needs both modes", file=sys.stderr)
            return 2
        return 0 if _print_checks(lift_checks(rep)) else 2
    return 0


def cmd_report(args) -> int:
    sys.stdout.write(report(args.paths, args.out))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tacmm", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, trials=True):
        sp.add_argument("--config", help="experiment JSON (default: built-in default.json)")
        sp.add_argument("--seed", type=int, help="override the master seed")
        if trials:
            sp.add_argument("--trials", type=int, help="trials per scenario (folds for the sweep)")
        sp.add_argument("--assert", dest="assert_", action="store_true",
                        help="check the acceptance targets; exit 2 on failure")

    t = sub.add_parser("train", help="generate data, train and evaluate the regressor")
    common(t, trials=False)
    t.add_argument("--out", default="model.txt", help="model file to write")
    t.add_argument("--no-noncontact", action="store_true", help="train on contact samples only")
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="evaluate a saved model on the held-out split")
    common(e, trials=False)
    e.add_argument("--model", required=True, help="saved model file")
    e.add_argument("--no-noncontact", action="store_true", help="evaluate on contact samples only")
    e.set_defaults(fn=cmd_eval)

    sw = sub.add_parser("sweep", help="run the pose-adjustment sweep")
    common(sw)
    sw.add_argument("--out", help="CSV path (default: stdout)")
    sw.set_defaults(fn=cmd_sweep)

    li = sub.add_parser("lift", help="run the lift suite")
    common(li)
    li.add_argument("--mode", choices=LIFT_MODES, help="run only one mode")
    li.add_argument("--out", help="CSV path (default: stdout)")
    li.set_defaults(fn=cmd_lift)

    r = sub.add_parser("report", help="summarise sweep/lift CSVs")
    r.add_argument("paths", nargs="+", help="CSV files")
    r.add_argument("--out", help="directory for SVG plots")
    r.set_defaults(fn=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, ReportError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
