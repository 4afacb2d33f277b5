"""Multi-restart experiments: configuration, execution and aggregation."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..problems import PROBLEM_IDS, get_problem
from ..strategies import (
    STRATEGY_IDS,
    StrategyConfig,
    SurrogateFailure,
    Trajectory,
    run_strategy,
)

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    problem_id: str = "v1"
    strategy_id: str = "random"
    strategy: StrategyConfig = field(default_factory=StrategyConfig)
    restarts: int = 100
    output_dir: Optional[str] = None
    jobs: int = 1

    def __post_init__(self):
        if self.problem_id not in PROBLEM_IDS:
            raise ConfigError(f"unknown problem id {self.problem_id!r}")
        if self.strategy_id not in STRATEGY_IDS:
            raise ConfigError(f"unknown strategy id {self.strategy_id!r}")
        if self.restarts < 1:
            raise ConfigError("restarts must be at least 1")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")

    @property
    def budget(self) -> int:
        return self.strategy.budget

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        """Build from flat keys; ``budget`` sets ``n_iter = budget - n_init``."""
        d = dict(d)
        aliases = {"problem": "problem_id", "strategy": "strategy_id", "out": "output_dir"}
        for short, full in aliases.items():
            if short in d:
                d[full] = d.pop(short)
        strat_names = {f.name for f in fields(StrategyConfig)}
        strat = {k: d.pop(k) for k in list(d) if k in strat_names}
        budget = d.pop("budget", None)
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        if budget is not None:
            n_init = strat.get("n_init", StrategyConfig.n_init)
            if d.get("strategy_id") == "random":
                n_init = min(n_init, int(budget))
                strat["n_init"] = n_init
            strat["n_iter"] = int(budget) - n_init
        try:
            return cls(strategy=StrategyConfig(**strat), **d)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path, overrides: Optional[dict] = None) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("config file must hold a JSON object")
        d.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        d = {
            "problem_id": self.problem_id,
            "strategy_id": self.strategy_id,
            "restarts": self.restarts,
            "output_dir": self.output_dir,
            "jobs": self.jobs,
        }
        d.update(self.strategy.to_dict())
        return d


@dataclass
class AggregateResult:
    """Mean best-feasible trajectory over the restarts that found a feasible point.

    Entries are NaN until every included restart has found one.
    """

    mean_trajectory: np.ndarray
    stderr_trajectory: np.ndarray
    final_mean: float
    final_stderr: float
    n_included: int
    n_excluded: int
    label: str = ""

    @classmethod
    def from_arrays(cls, mean, stderr, n_included, n_excluded, label="") -> "AggregateResult":
        return cls(
            mean_trajectory=np.asarray(mean, dtype=float),
            stderr_trajectory=np.asarray(stderr, dtype=float),
            final_mean=float(mean[-1]) if len(mean) else float("nan"),
            final_stderr=float(stderr[-1]) if len(stderr) else float("nan"),
            n_included=n_included,
            n_excluded=n_excluded,
            label=label,
        )

    @property
    def budget(self) -> int:
        return self.mean_trajectory.size


def aggregate(trajectories: Sequence[Optional[Trajectory]], label: str = "") -> AggregateResult:
    """Average best-feasible trajectories.

    ``None`` entries (failed restarts) and restarts that never found a
    feasible point are excluded and counted in ``n_excluded``.
    """
    if not trajectories:
        raise ValueError("nothing to aggregate")
    included = [t for t in trajectories if t is not None and t.final_best is not None]
    n_excluded = len(trajectories) - len(included)
    budget = max(len(t) for t in trajectories if t is not None) if included else 0
    if not included:
        nan = np.full(budget, np.nan)
        return AggregateResult.from_arrays(nan, nan, 0, n_excluded, label)
    if any(len(t) != budget for t in included):
        raise ValueError("trajectories differ in length")
    B = np.array(
        [[np.nan if v is None else v for v in t.best_feasible] for t in included], dtype=float
    )
    defined = ~np.any(np.isnan(B), axis=0)
    mean = np.full(budget, np.nan)
    se = np.full(budget, np.nan)
    mean[defined] = np.mean(B[:, defined], axis=0)
    n = len(included)
    se[defined] = np.std(B[:, defined], axis=0, ddof=1) / np.sqrt(n) if n > 1 else 0.0
    return AggregateResult.from_arrays(mean, se, n, n_excluded, label)


def _run_restart(problem_id: str, strategy_id: str, strat: dict, restart: int, base_seed: int):
    cfg = StrategyConfig(**{**strat, "seed": base_seed + restart})
    p = get_problem(problem_id)
    try:
        t = run_strategy(p, strategy_id, cfg)
    except SurrogateFailure as exc:
        logger.warning("restart %d abandoned: %s", restart, exc)
        return None, str(exc)
    t.restart = restart
    return t, None


def run_experiment(cfg: ExperimentConfig) -> AggregateResult:
    """Run every restart, write per-restart and aggregate CSVs, and average.

    Restart ``i`` is seeded with ``seed + i``. Nothing is written when
    ``output_dir`` is ``None``.
    """
    from .csvio import write_csv

    out = None
    if cfg.output_dir is not None:
        out = Path(cfg.output_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {out}: {exc}") from exc

    strat = cfg.strategy.to_dict()
    base_seed = strat.pop("seed")
    args = [(cfg.problem_id, cfg.strategy_id, strat, i, base_seed) for i in range(cfg.restarts)]
    if cfg.jobs > 1 and cfg.restarts > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_restart, *zip(*args)))
    else:
        results = [_run_restart(*a) for a in args]

    label = f"{cfg.problem_id}/{cfg.strategy_id}"
    if cfg.strategy_id != "random":
        label += f"/{cfg.strategy.surrogate}"
    agg = aggregate([t for t, _ in results], label=label)

    if out is not None:
        for i, (t, err) in enumerate(results):
            log = {"restart": i, "seed": base_seed + i, "config": cfg.to_dict(), "error": err}
            if t is not None:
                write_csv(t, out / f"restart_{i:03d}.csv")
                log["iterations"] = t.diagnostics
            with open(out / f"restart_{i:03d}.json", "w") as fh:
                json.dump(log, fh, indent=1, sort_keys=True)
        write_csv(agg, out / "aggregate.csv")
    return agg
