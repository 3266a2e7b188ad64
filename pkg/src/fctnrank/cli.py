"""Command-line entry point: ``fctnrank {synth,ingest,search,report}``.

Exit codes: 0 success, 1 runtime failure, 2 configuration error,
3 input data / file error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import data as data_mod
from .config import MARKET_MODE_DESCRIPTIONS, RunConfig, SynthConfig, load_config
from .errors import ConfigError, DataError, FctnRankError, ReportError, SpaceTooLarge, StrategyError
from .llm_client import ClientParams, HttpChatClient, ScriptedClient
from .llm_strategy import PROMPT_VERSION, LlmStrategy, TensorMeta, load_templates
from .report import fmt_loss, write_report
from .runlog import RunLogWriter, read_runlog
from .search import ExhaustiveStrategy, RandomStrategy, SmboStrategy, rank_upper_bounds, run_search

logger = logging.getLogger("fctnrank")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG, EXIT_DATA = 0, 1, 2, 3

DATASET_FILE = "dataset.npz"
MANIFEST_FILE = "manifest.json"


def _panel_from_config(cfg: RunConfig) -> data_mod.SeriesPanel:
    d = cfg.data
    if d.path is not None:
        if not Path(d.path).is_file():
            raise FileNotFoundError(f"input file {d.path} does not exist")
        return data_mod.load_panel(d.path, d.schema)
    s = d.synth
    return data_mod.synth_panel(s.shape_base, s.n_steps, s.seed, s.structure, s.latent_rank, s.noise_level)


def cmd_synth(cfg: RunConfig, out_path: Path) -> Path:
    s = cfg.data.synth or SynthConfig()
    panel = data_mod.synth_panel(s.shape_base, s.n_steps, s.seed, s.structure, s.latent_rank, s.noise_level)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    data_mod.save_panel(panel, out_path)
    return out_path


def cmd_ingest(cfg: RunConfig, out_dir: Path) -> dict:
    """Embed and split the configured data; write ``dataset.npz`` and ``manifest.json``."""
    panel = _panel_from_config(cfg)
    d = cfg.data
    ds = data_mod.build_dataset(panel, d.window, d.stride, d.fraction, d.non_overlapping, d.zscore)
    out_dir.mkdir(parents=True, exist_ok=True)
    np.savez(out_dir / DATASET_FILE, train=np.stack(ds.train), test=np.stack(ds.test))
    shape = list(ds.train[0].shape)
    manifest = {
        "config_hash": cfg.config_hash(),
        "tensor_file": DATASET_FILE,
        "shape": shape,
        "window": d.window,
        "stride": d.stride,
        "fraction": d.fraction,
        "non_overlapping": d.non_overlapping,
        "zscore": d.zscore,
        "n_steps": panel.n_steps,
        "n_windows": len(ds.train_indices) + len(ds.dropped_indices) + len(ds.test_indices),
        "n_train": len(ds.train),
        "n_dropped": len(ds.dropped_indices),
        "n_test": len(ds.test),
        "train_indices": ds.train_indices,
        "dropped_indices": ds.dropped_indices,
        "test_indices": ds.test_indices,
        "mode_names": panel.mode_names + ["window_time"],
    }
    (out_dir / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


def load_dataset(out_dir: Path) -> tuple[dict, list[np.ndarray], list[np.ndarray]]:
    mpath = out_dir / MANIFEST_FILE
    if not mpath.is_file():
        raise FileNotFoundError(f"{mpath} not found; run `fctnrank ingest` first")
    manifest = json.loads(mpath.read_text(encoding="utf-8"))
    with np.load(out_dir / manifest["tensor_file"]) as z:
        train, test = list(z["train"]), list(z["test"])
    return manifest, train, test


def _meta(cfg: RunConfig, shape: list[int]) -> TensorMeta:
    descs = cfg.llm.mode_descriptions
    if descs is None:
        descs = MARKET_MODE_DESCRIPTIONS if len(shape) == 5 else [f"Mode {k + 1}" for k in range(len(shape))]
    bounds = rank_upper_bounds(shape, cfg.search.bound_policy)
    return TensorMeta(tuple(shape), list(descs), cfg.llm.domain_label, bounds)


def build_strategy(cfg: RunConfig, shape: list[int]):
    seed = cfg.search.rng_seed
    if cfg.strategy == "random":
        return RandomStrategy(seed)
    if cfg.strategy == "bayes":
        return SmboStrategy(seed, cfg.smbo.n_init, cfg.smbo.pool_size)
    if cfg.strategy == "exhaustive":
        return ExhaustiveStrategy()
    llm = cfg.llm
    params = ClientParams(
        model_name=llm.model_name,
        max_output_tokens=llm.max_output_tokens,
        temperature=llm.temperature,
        context_window_tokens=llm.context_window_tokens,
        timeout_ms=llm.timeout_ms,
        max_retries=llm.max_retries,
    )
    if llm.mock_script:
        client = ScriptedClient.from_file(llm.mock_script)
    else:
        client = HttpChatClient(llm.endpoint, llm.api_key_env)
    templates = load_templates(llm.prompt_overrides)
    return LlmStrategy(client, _meta(cfg, shape), params, cfg.search.lam, templates)


def cmd_search(cfg: RunConfig, out_dir: Path, stream=None) -> tuple[Path, int]:
    """Run the configured strategy; returns the log path and number of evaluated iterations."""
    stream = stream or sys.stdout
    manifest, train, test = load_dataset(out_dir)
    shape = manifest["shape"]
    search_cfg = cfg.search_config()
    if cfg.strategy == "exhaustive":
        size = math.prod(rank_upper_bounds(shape, search_cfg.bound_policy).values)
        if size > cfg.exhaustive_cap:
            raise SpaceTooLarge(f"exhaustive space has {size} assignments, cap is {cfg.exhaustive_cap}")
        search_cfg.max_iterations = size
        search_cfg.patience = size
    strategy = build_strategy(cfg, shape)
    config_hash = cfg.config_hash() + ("" if cfg.strategy != "llm" else f"-p{PROMPT_VERSION}")
    log_path = out_dir / f"runlog_{cfg.strategy}.jsonl"

    def emit(rec):
        writer.write_record(rec)
        test_txt = "n/a" if rec.test is None else f"{rec.test.loss:.4f}"
        print(
            f"iter {rec.index:3d}  train {rec.train.loss:.4f}  test {test_txt}  log10CR {rec.train.log10_cr:.4f}"
            + ("  [repeat]" if rec.repeated else ""),
            file=stream,
            flush=True,
        )

    with RunLogWriter(log_path) as writer:
        log = run_search(strategy, train, test, search_cfg, on_iteration=emit)
        writer.write_summary(log, config_hash)
    for attempt, msg in log.errors:
        print(f"iteration {attempt}: {msg}", file=sys.stderr)
    if log.aborted:
        print(f"run stopped: {log.aborted}", file=sys.stderr)
    best = log.best
    if best is not None:
        print(
            f"best iteration {best.index}: train {fmt_loss(best.train.loss)} ranks {best.ranks}"
            + (" (stopped early)" if log.stopped_early else ""),
            file=stream,
        )
    return log_path, len(log.iterations)


def cmd_report(paths: list[Path], out_dir: Path) -> list[Path]:
    logs = [read_runlog(p)[0] for p in paths]
    return write_report(logs, out_dir)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fctnrank", description="FCTN rank selection experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic panel as CSV")
    s.add_argument("--config", type=Path)
    s.add_argument("--out", type=Path, required=True, help="CSV file to write")
    s.add_argument("--seed", type=int)
    s.add_argument("--structure", choices=data_mod.STRUCTURES)
    s.add_argument("--steps", type=int)
    s.add_argument("--shape", type=int, nargs="+", help="base mode sizes")

    i = sub.add_parser("ingest", help="embed and split the data into a dataset directory")
    i.add_argument("--config", type=Path, required=True)
    i.add_argument("--out", type=Path)

    r = sub.add_parser("search", help="run a rank search on an ingested dataset")
    r.add_argument("--config", type=Path, required=True)
    r.add_argument("--out", type=Path)
    r.add_argument("--strategy", choices=("llm", "random", "bayes", "exhaustive"))
    r.add_argument("--seed", type=int)
    r.add_argument("--mock-script", type=Path)

    rep = sub.add_parser("report", help="render tables and plot data from run logs")
    rep.add_argument("runlogs", type=Path, nargs="+")
    rep.add_argument("--out", type=Path, required=True)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            for path in cmd_report(args.runlogs, args.out):
                print(path)
            return EXIT_OK

        if args.command == "synth" and args.config is None:
            cfg = RunConfig()
            cfg.data.synth = SynthConfig()
        else:
            cfg = load_config(args.config)
        if args.command == "synth":
            s = cfg.data.synth or SynthConfig()
            if args.seed is not None:
                s.seed = args.seed
            if args.structure:
                s.structure = args.structure
            if args.steps:
                s.n_steps = args.steps
            if args.shape:
                s.shape_base = args.shape
            cfg.data.synth = s
            print(cmd_synth(cfg, args.out))
            return EXIT_OK

        if args.out is not None:
            cfg.out = str(args.out)
        if args.command == "search":
            if args.strategy:
                cfg.strategy = args.strategy
            if args.seed is not None:
                cfg.search.rng_seed = args.seed
            if args.mock_script:
                cfg.llm.mock_script = str(args.mock_script)
        cfg.validate(for_search=args.command == "search")
        out_dir = Path(cfg.out)
        if args.command == "ingest":
            m = cmd_ingest(cfg, out_dir)
            print(f"{m['n_windows']} windows of shape {m['shape']}: "
                  f"{m['n_train']} train, {m['n_dropped']} dropped, {m['n_test']} test -> {out_dir}")
            return EXIT_OK
        log_path, n = cmd_search(cfg, out_dir)
        print(log_path)
        return EXIT_OK if n >= 1 else EXIT_RUNTIME
    except (ConfigError, SpaceTooLarge) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, DataError, ReportError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except StrategyError as exc:
        print(f"search failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except FctnRankError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
