"""JSON Lines persistence for run logs.

One object per evaluated iteration, then one summary object::

    {"index": 1, "ranks": {"1,2": 4, ...}, "train": {...}, "test": {...} | null,
     "reasoning": str | null, "clamped_edges": [[1, 2]], "repeated": false,
     "wall_time_ms": 812}
    {"best_index": 1, "stopped_early": false, "strategy": "llm", "config_hash": "..."}

Records are flushed as they are written, so a crashed run leaves a valid
prefix (iterations without the summary line).
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import IO

from .errors import ReportError
from .fctn import RankAssignment
from .objective import DEFAULT_LAMBDA, EvalResult
from .search import IterationRecord, RunLog

RECORD_KEYS = {"index", "ranks", "train", "test", "reasoning", "clamped_edges", "repeated", "wall_time_ms"}
SUMMARY_KEYS = {"best_index", "stopped_early", "strategy", "config_hash"}
EVAL_KEYS = {"loss", "log10_cr", "mean_error", "per_tensor_errors"}


def record_to_dict(rec: IterationRecord) -> dict:
    return {
        "index": rec.index,
        "ranks": {f"{i},{j}": v for (i, j), v in rec.ranks.items()},
        "train": rec.train.to_dict(),
        "test": None if rec.test is None else rec.test.to_dict(),
        "reasoning": rec.reasoning,
        "clamped_edges": [list(e) for e in rec.clamped_edges],
        "repeated": rec.repeated,
        "wall_time_ms": rec.wall_time_ms,
    }


def summary_to_dict(log: RunLog, config_hash: str | None = None) -> dict:
    return {
        "best_index": log.best_index,
        "stopped_early": log.stopped_early,
        "strategy": log.strategy_name,
        "config_hash": config_hash,
    }


def _dumps(obj: dict) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=True)


class RunLogWriter:
    """Append-only writer; use as a context manager."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._fh: IO[str] | None = None

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", encoding="utf-8")
        return self

    def __exit__(self, *exc):
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def _write(self, obj: dict) -> None:
        self._fh.write(_dumps(obj) + "\n")
        self._fh.flush()

    def write_record(self, rec: IterationRecord) -> None:
        self._write(record_to_dict(rec))

    def write_summary(self, log: RunLog, config_hash: str | None = None) -> None:
        self._write(summary_to_dict(log, config_hash))


def _eval_from_dict(d, where) -> EvalResult:
    if not isinstance(d, dict) or set(d) != EVAL_KEYS:
        raise ReportError(f"{where}: evaluation must have keys {sorted(EVAL_KEYS)}")
    try:
        errs = [float(e) for e in d["per_tensor_errors"]]
        log_cr = float(d["log10_cr"])
        return EvalResult(
            cr=10.0**log_cr,
            log10_cr=log_cr,
            per_tensor_errors=errs,
            mean_error=float(d["mean_error"]),
            loss=float(d["loss"]),
            lam=DEFAULT_LAMBDA,
        )
    except (TypeError, ValueError) as exc:
        raise ReportError(f"{where}: bad numeric field: {exc}") from None


def _ranks_from_dict(d, where) -> RankAssignment:
    if not isinstance(d, dict) or not d:
        raise ReportError(f"{where}: ranks must be a nonempty object")
    try:
        mapping = {tuple(int(p) for p in k.split(",")): int(v) for k, v in d.items()}
        order = max(max(e) for e in mapping)
        return RankAssignment.from_dict(order, mapping)
    except Exception as exc:
        raise ReportError(f"{where}: invalid ranks: {exc}") from None


def record_from_dict(d: dict, where: str = "record") -> IterationRecord:
    if set(d) != RECORD_KEYS:
        raise ReportError(f"{where}: expected keys {sorted(RECORD_KEYS)}, got {sorted(d)}")
    if not isinstance(d["index"], int) or isinstance(d["index"], bool):
        raise ReportError(f"{where}: index must be an integer")
    reasoning = d["reasoning"]
    if reasoning is not None and not isinstance(reasoning, str):
        raise ReportError(f"{where}: reasoning must be a string or null")
    try:
        clamped = [tuple(int(v) for v in e) for e in d["clamped_edges"]]
    except (TypeError, ValueError):
        raise ReportError(f"{where}: clamped_edges must be a list of pairs") from None
    return IterationRecord(
        index=d["index"],
        ranks=_ranks_from_dict(d["ranks"], where),
        train=_eval_from_dict(d["train"], f"{where}.train"),
        test=None if d["test"] is None else _eval_from_dict(d["test"], f"{where}.test"),
        reasoning=reasoning,
        clamped_edges=clamped,
        repeated=bool(d["repeated"]),
        wall_time_ms=int(d["wall_time_ms"]),
    )


def read_runlog(path: str | Path) -> tuple[RunLog, str | None]:
    """Load a run log, returning it with its config hash (``None`` for partial logs).

    A log without its summary line is accepted; best index is then
    recomputed from the records.
    """
    path = Path(path)
    log = RunLog()
    summary = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            where = f"{path}:{lineno}"
            if not line.strip():
                continue
            if summary is not None:
                raise ReportError(f"{where}: content after the summary record")
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ReportError(f"{where}: not valid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise ReportError(f"{where}: expected a JSON object")
            if "best_index" in obj:
                if set(obj) != SUMMARY_KEYS:
                    raise ReportError(f"{where}: summary must have keys {sorted(SUMMARY_KEYS)}")
                summary = obj
                continue
            rec = record_from_dict(obj, where)
            if rec.index != len(log.iterations) + 1:
                raise ReportError(f"{where}: expected index {len(log.iterations) + 1}, got {rec.index}")
            log.iterations.append(rec)

    best, best_loss = None, math.inf
    for rec in log.iterations:
        if rec.train.loss < best_loss:
            best, best_loss = rec.index, rec.train.loss
    if summary is None:
        log.best_index = best
        log.strategy_name = path.stem
        return log, None
    if summary["best_index"] != best:
        raise ReportError(f"{path}: summary best_index {summary['best_index']} disagrees with records ({best})")
    log.best_index = summary["best_index"]
    log.stopped_early = bool(summary["stopped_early"])
    log.strategy_name = str(summary["strategy"])
    return log, summary["config_hash"]
