"""Markdown tables and plot data from run logs.

Losses and log10(CR) are shown to 2 decimals. Mean errors are multiplied
by 1e12 and shown to 1 decimal, or as ``---`` above 1000 after scaling.
The best training loss is bold and the runner-up value underlined, in both
objective rows.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Sequence

from .search import RunLog

ERROR_SCALE = 1e12
ERROR_CUTOFF = 1000.0
PLOT_HEADER = ["iteration", "train_loss", "test_loss", "log10_cr"]


def fmt_loss(x: float) -> str:
    return f"{x:.2f}"


def fmt_error(mean_error: float) -> str:
    scaled = mean_error * ERROR_SCALE
    # round away representation noise such as 1000e-12 * 1e12 = 1000.0000000000001
    if round(scaled, 9) > ERROR_CUTOFF:
        return "---"
    return f"{scaled:.1f}"


def mark_columns(log: RunLog) -> tuple[int | None, set[int]]:
    """Iteration index of the best loss and the set of runner-up indices.

    Runner-ups are the other iterations whose loss, at display precision,
    equals the lowest loss among the non-best iterations.
    """
    if log.best_index is None:
        return None, set()
    others = [r for r in log.iterations if r.index != log.best_index]
    if not others:
        return log.best_index, set()
    second = fmt_loss(min(r.train.loss for r in others))
    return log.best_index, {r.index for r in others if fmt_loss(r.train.loss) == second}


def _decorate(text: str, idx: int, best: int | None, seconds: set[int]) -> str:
    if idx == best:
        return f"**{text}**"
    if idx in seconds:
        return f"<u>{text}</u>"
    return text


def render_table(log: RunLog) -> str:
    its = log.iterations
    best, seconds = mark_columns(log)

    def row(label, cells):
        return "| " + " | ".join([label, *cells]) + " |"

    lines = [
        row("Iteration", [str(r.index) for r in its]),
        "|" + "---|" * (len(its) + 1),
        row("Train Obj. Func.", [_decorate(fmt_loss(r.train.loss), r.index, best, seconds) for r in its]),
        row("Train Error", [fmt_error(r.train.mean_error) for r in its]),
        row("Test Obj. Func.", [
            "n/a" if r.test is None else _decorate(fmt_loss(r.test.loss), r.index, best, seconds) for r in its
        ]),
        row("Test Error", ["n/a" if r.test is None else fmt_error(r.test.mean_error) for r in its]),
        row("Log CR", [fmt_loss(r.train.log10_cr) for r in its]),
    ]
    return "\n".join(lines)


def render_report(logs: Sequence[RunLog]) -> str:
    parts = ["# Rank search report", ""]
    parts.append(
        "Objective values and Log CR rounded to 2 decimals; errors scaled by 1e12, "
        "values above 1000 after scaling shown as ---. Best training objective in bold, "
        "second best underlined."
    )
    for log in logs:
        parts += ["", f"## {log.strategy_name}", ""]
        if not log.iterations:
            parts.append("(no evaluated iterations)")
            continue
        parts.append(render_table(log))
        parts.append("")
        best = log.best
        parts.append(
            f"Best iteration {best.index}: train {fmt_loss(best.train.loss)}"
            + ("" if best.test is None else f", test {fmt_loss(best.test.loss)}")
            + f", ranks {best.ranks}. Stopped early: {'yes' if log.stopped_early else 'no'}."
        )
    if len(logs) > 1:
        parts += ["", "## Comparison", ""]
        parts.append("| Strategy | Iterations | Best iteration | Best train obj. | Test obj. at best | Log CR at best |")
        parts.append("|---|---|---|---|---|---|")
        for log in logs:
            b = log.best
            if b is None:
                parts.append(f"| {log.strategy_name} | 0 | - | - | - | - |")
                continue
            parts.append(
                f"| {log.strategy_name} | {len(log.iterations)} | {b.index} | {fmt_loss(b.train.loss)} | "
                f"{'n/a' if b.test is None else fmt_loss(b.test.loss)} | {fmt_loss(b.train.log10_cr)} |"
            )
    return "\n".join(parts) + "\n"


def plot_rows(log: RunLog) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PLOT_HEADER)
    for r in log.iterations:
        w.writerow([r.index, repr(r.train.loss), "" if r.test is None else repr(r.test.loss), repr(r.train.log10_cr)])
    return buf.getvalue()


def write_report(logs: Sequence[RunLog], out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "report.md"]
    written[0].write_text(render_report(logs), encoding="utf-8")
    for k, log in enumerate(logs, start=1):
        p = out / f"plot_{k:02d}_{log.strategy_name}.csv"
        p.write_text(plot_rows(log), encoding="utf-8")
        written.append(p)
    return written
