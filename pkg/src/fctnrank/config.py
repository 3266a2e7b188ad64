"""Run configuration loaded from a JSON document.

Example::

    {
      "data": {"synth": {"shape_base": [3, 6, 3, 4], "n_steps": 146, "structure": "mixed"},
               "window": 5},
      "strategy": "llm",
      "search": {"max_iterations": 10, "patience": 5},
      "llm": {"mock_script": "script.json"},
      "out": "runs/demo"
    }

Unknown keys are rejected so typos do not silently fall back to defaults.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .fctn import AlsOptions
from .search import BOUND_POLICIES, SearchConfig

STRATEGIES = ("llm", "random", "bayes", "exhaustive")

MARKET_MODE_DESCRIPTIONS = [
    "Types of financial instruments",
    "Asset indices within each type",
    "Features of each asset",
    "Interval lengths for averaging feature values",
    "Time points within each rolling window",
]


@dataclass
class SynthConfig:
    shape_base: list[int] = field(default_factory=lambda: [3, 6, 3, 4])
    n_steps: int = 146
    seed: int = 0
    structure: str = "mixed"
    latent_rank: int = 2
    noise_level: float = 0.05


@dataclass
class DataConfig:
    path: str | None = None
    schema: dict | None = None
    synth: SynthConfig | None = None
    window: int = 5
    stride: int = 1
    fraction: float = 0.8
    non_overlapping: bool = True
    zscore: bool = False


@dataclass
class SearchSection:
    max_iterations: int = 10
    patience: int = 5
    min_delta: float = 0.0
    bound_policy: str = "max_of_modes"
    lam: float = 1e3
    rng_seed: int = 0


@dataclass
class LlmConfig:
    endpoint: str | None = None
    api_key_env: str = "OPENAI_API_KEY"
    mock_script: str | None = None
    model_name: str = "gpt-4o"
    max_output_tokens: int = 3000
    temperature: float = 1.0
    context_window_tokens: int = 128_000
    timeout_ms: int = 120_000
    max_retries: int = 3
    domain_label: str = "financial time series analysis"
    mode_descriptions: list[str] | None = None
    prompt_overrides: dict[str, str] = field(default_factory=dict)


@dataclass
class SmboConfig:
    n_init: int = 3
    pool_size: int = 512


@dataclass
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    strategy: str = "random"
    search: SearchSection = field(default_factory=SearchSection)
    als: AlsOptions = field(default_factory=AlsOptions)
    llm: LlmConfig = field(default_factory=LlmConfig)
    smbo: SmboConfig = field(default_factory=SmboConfig)
    exhaustive_cap: int = 4096
    out: str = "runs/default"

    def search_config(self) -> SearchConfig:
        s = self.search
        return SearchConfig(
            max_iterations=s.max_iterations,
            patience=s.patience,
            min_delta=s.min_delta,
            bound_policy=s.bound_policy,
            lam=s.lam,
            als=self.als,
            rng_seed=s.rng_seed,
        )

    def validate(self, for_search: bool = True) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.search.bound_policy not in BOUND_POLICIES:
            raise ConfigError(f"bound_policy must be one of {BOUND_POLICIES}")
        if self.data.path is None and self.data.synth is None:
            raise ConfigError("data needs either 'path' or 'synth'")
        if self.data.path is not None and self.data.synth is not None:
            raise ConfigError("data takes 'path' or 'synth', not both")
        if for_search and self.strategy == "llm" and not (self.llm.endpoint or self.llm.mock_script):
            raise ConfigError("strategy 'llm' needs llm.endpoint or llm.mock_script")
        try:
            self.search_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        """Hash of everything except the output directory."""
        d = self.to_dict()
        d.pop("out", None)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    kwargs = {}
    for key, value in data.items():
        sub = _NESTED.get((cls, key))
        if sub is not None and value is not None:
            value = _build(sub, value, f"{where}.{key}")
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


_NESTED = {
    (RunConfig, "data"): DataConfig,
    (RunConfig, "search"): SearchSection,
    (RunConfig, "als"): AlsOptions,
    (RunConfig, "llm"): LlmConfig,
    (RunConfig, "smbo"): SmboConfig,
    (DataConfig, "synth"): SynthConfig,
}


def config_from_dict(data: dict) -> RunConfig:
    return _build(RunConfig, data, "config")


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    cfg = config_from_dict(data)
    # relative data/script paths are taken relative to the config file
    base = path.parent
    if cfg.data.path and not Path(cfg.data.path).is_absolute():
        cfg.data.path = str(base / cfg.data.path)
    if cfg.llm.mock_script and not Path(cfg.llm.mock_script).is_absolute():
        cfg.llm.mock_script = str(base / cfg.llm.mock_script)
    cfg.llm.prompt_overrides = {
        k: (v if Path(v).is_absolute() else str(base / v)) for k, v in cfg.llm.prompt_overrides.items()
    }
    return cfg
