"""Read emitted CSVs back and render aligned text tables plus SVG plots."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .config import LIFT_MODES
from .experiments import (LIFT_COLUMNS, SWEEP_COLUMNS, LiftRow, LiftSuiteReport, SweepReport,
                          SweepRow)


class ReportError(ValueError):
    pass


def _rows(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ReportError(f"{path}: cannot read: {err.strerror}") from None
    rows = list(csv.reader(text.splitlines()))
    if not rows:
        raise ReportError(f"{path}: empty CSV")
    return path, rows[0], rows[1:]


def _parse(path, header, body, columns, build):
    if tuple(header) != columns:
        raise ReportError(f"{path}: row 1: expected header {','.join(columns)}")
    if not body:
        raise ReportError(f"{path}: no data rows")
    out = []
    for i, raw in enumerate(body, start=2):
        if len(raw) != len(columns):
            raise ReportError(f"{path}: row {i}: expected {len(columns)} fields, got {len(raw)}")
        try:
            out.append(build(raw))
        except (ValueError, KeyError) as err:
            raise ReportError(f"{path}: row {i}: {err}") from None
    return out


def _sweep_row(raw):
    angle, strategy, mode, fold, a_err, d_err, contacts = raw
    row = SweepRow(float(angle), strategy, mode, int(fold), float(a_err), float(d_err), int(contacts))
    if row.final_angle_err_deg < 0 or row.distance_err_mm < 0:
        raise ValueError("errors must be >= 0")
    return row


def _lift_row(raw):
    scenario, mode, seed, success, cause, ticks = raw
    if mode not in LIFT_MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if success not in ("0", "1"):
        raise ValueError(f"success must be 0 or 1, got {success!r}")
    return LiftRow(scenario, mode, int(seed), success == "1", cause, int(ticks))


def read_sweep_csv(path) -> SweepReport:
    path, header, body = _rows(path)
    rows = _parse(path, header, body, SWEEP_COLUMNS, _sweep_row)
    folds = len({r.fold for r in rows})
    return SweepReport(tuple(rows), folds)


def read_lift_csv(path) -> LiftSuiteReport:
    path, header, body = _rows(path)
    rows = _parse(path, header, body, LIFT_COLUMNS, _lift_row)
    names = list(dict.fromkeys(r.scenario for r in rows))
    return LiftSuiteReport(tuple(rows), tuple(names))


def read_csv(path):
    """Sniff the header and return a sweep or lift report."""
    path, header, _ = _rows(path)
    if tuple(header) == SWEEP_COLUMNS:
        return read_sweep_csv(path)
    if tuple(header) == LIFT_COLUMNS:
        return read_lift_csv(path)
    raise ReportError(f"{path}: row 1: unrecognised header")


def _align(table):
    widths = [max(len(str(r[i])) for r in table) for i in range(len(table[0]))]
    lines = []
    for k, r in enumerate(table):
        cells = [str(c).ljust(w) if i == 0 else str(c).rjust(w) for i, (c, w) in enumerate(zip(r, widths))]
        lines.append("  ".join(cells).rstrip())
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def sweep_table(report: SweepReport) -> str:
    """One 11-row block per (strategy, mode): angle and distance MAE per
    initial angle."""
    blocks = []
    for s, m in report.series():
        table = [["angle (deg)", "angle MAE (deg)", "distance MAE (mm)"]]
        for a, (ea, ed) in report.mae(s, m).items():
            table.append([f"{a:g}", f"{ea:.2f}", f"{ed:.1f}"])
        blocks.append(f"{s} / {m}\n" + _align(table))
    return f"Pose sweep: MAE over {report.folds} folds\n\n" + "\n\n".join(blocks)


def lift_table(report: LiftSuiteReport) -> str:
    modes = report.modes()
    table = [["scenario"] + modes]
    for s in report.scenarios:
        table.append([s] + [f"{100 * report.rate(s, m):.0f}%" for m in modes])
    table.append(["average"] + [f"{100 * report.aggregate(m):.0f}%" for m in modes])
    return "Lift success rate\n" + _align(table)


def sweep_svg(report: SweepReport, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    for s, m in report.series():
        tab = report.mae(s, m)
        angles = list(tab)
        axes[0].plot(angles, [v[0] for v in tab.values()], marker="o", label=f"{s}/{m}")
        axes[1].plot(angles, [v[1] for v in tab.values()], marker="o", label=f"{s}/{m}")
    axes[0].set(xlabel="initial angle (deg)", ylabel="angle MAE (deg)")
    axes[1].set(xlabel="initial angle (deg)", ylabel="distance MAE (mm)")
    axes[1].legend(fontsize=6)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def lift_svg(report: LiftSuiteReport, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    modes = report.modes()
    x = np.arange(len(report.scenarios))
    width = 0.8 / max(1, len(modes))
    fig, ax = plt.subplots(figsize=(7, 3.5))
    for k, m in enumerate(modes):
        ax.bar(x + k * width, [100 * report.rate(s, m) for s in report.scenarios], width, label=m)
    ax.set_xticks(x + width * (len(modes) - 1) / 2, report.scenarios, fontsize=7)
    ax.set_ylabel("success rate (%)")
    ax.set_ylim(0, 100)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def report(paths, out_dir=None) -> str:
    """Text summary of every CSV; SVG plots go to ``out_dir`` when given.
    All inputs are parsed before anything is written."""
    parsed = [(Path(p), read_csv(p)) for p in paths]
    if not parsed:
        raise ReportError("no CSV files given")
    parts = []
    for p, rep in parsed:
        if isinstance(rep, SweepReport):
            parts.append(f"[{p.name}]\n" + sweep_table(rep))
        else:
            parts.append(f"[{p.name}]\n" + lift_table(rep))
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for p, rep in parsed:
            target = out_dir / (p.stem + ".svg")
            (sweep_svg if isinstance(rep, SweepReport) else lift_svg)(rep, target)
    return "\n\n".join(parts) + "\n"
