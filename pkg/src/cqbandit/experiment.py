"""Experiment configuration and orchestration.

A config is a single ``[experiment]`` INI section; command-line flags
override individual keys.  Replications are split into contiguous seed chunks,
one per worker, and merged back in seed-list order.
"""

from __future__ import annotations

import configparser
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .algorithm import POLICIES, TrajectoryBatch, simulate
from .dual import SCHEDULE_KINDS, Schedule, ScheduleError, tau_prime
from .instances import MAB_DEFAULTS, Instance, mab_instance, random_linear_instance, ward_instance
from .io import load_instance, write_aggregate_csv, write_trajectory_csv
from .metrics import aggregate
from .oracle import require_optimal, solve_baseline

PRESETS = ("mab", "ward", "linear", "linear-cost")

# fixed instance seeds for the random presets
LINEAR_PRESET_SEED = 11
LINEAR_COST_PRESET_SEED = 3


class ConfigError(ValueError):
    pass


def preset_instance(name: str, T: int) -> Instance:
    if name == "mab":
        return mab_instance(**MAB_DEFAULTS, T=T)
    if name == "ward":
        return ward_instance(seed=0, T=T)
    if name == "linear":
        return random_linear_instance(LINEAR_PRESET_SEED, d=4, J=4, n_contexts=5, K=1, T=T)
    if name == "linear-cost":
        return random_linear_instance(LINEAR_COST_PRESET_SEED, d=4, J=4, n_contexts=5, K=1, T=T, linear_cost=True)
    raise ConfigError(f"unknown preset {name!r}; expected one of {PRESETS}")


def resolve_instance(source: str, T: int, base_dir: Optional[Path] = None) -> Instance:
    """A preset name or a path to an instance file."""
    if source in PRESETS:
        return preset_instance(source, T)
    path = Path(source)
    if not path.is_absolute() and base_dir is not None:
        path = base_dir / path
    return load_instance(path, T=T)


@dataclass
class ExperimentConfig:
    instance: str = "mab"
    policy: str = "pessimistic-optimistic"
    schedule: str = "experiment-mab"
    T: int = 10_000
    base_seed: int = 0
    n_replications: int = 20
    seeds: Optional[list[int]] = None
    output_dir: str = "runs"
    delta: Optional[float] = None
    p: Optional[float] = None
    trace_confidence: bool = False
    realized_regret: bool = False
    write_trajectories: bool = True
    workers: int = 0  # 0 = one per available core
    base_dir: Optional[str] = field(default=None, compare=False)

    def seed_list(self) -> list[int]:
        if self.seeds is not None:
            return list(self.seeds)
        return list(range(self.base_seed, self.base_seed + self.n_replications))

    def validate(self) -> None:
        if self.T < 1:
            raise ConfigError("T must be >= 1")
        if self.seeds is None and self.n_replications < 1:
            raise ConfigError("n_replications must be >= 1")
        if self.seeds is not None and (not self.seeds or min(self.seeds) < 0):
            raise ConfigError("seeds must be a nonempty list of nonnegative integers")
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown policy {self.policy!r}; expected one of {POLICIES}")
        if self.schedule not in SCHEDULE_KINDS or self.schedule == "custom":
            raise ConfigError(f"schedule must be one of {SCHEDULE_KINDS[:-1]}")
        if self.delta is not None and not 0 < self.delta <= 1:
            raise ConfigError(f"delta must lie in (0, 1], got {self.delta}")
        if self.p is not None and not 0 < self.p <= 1:
            raise ConfigError("p must lie in (0, 1]")


_BOOL = {"trace_confidence", "realized_regret", "write_trajectories"}
_INT = {"T", "base_seed", "n_replications", "workers"}
_FLOAT = {"delta", "p"}


def config_from_string(text: str, base_dir: Optional[Path] = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    if "experiment" not in cp:
        raise ConfigError("config needs an [experiment] section")
    sec = cp["experiment"]
    known = {f.name for f in fields(ExperimentConfig)} - {"base_dir"}
    unknown = set(sec) - {k.lower() for k in known}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {}
    for name in known:
        key = name.lower()
        if key not in sec or sec[key].strip() == "":
            continue
        raw = sec[key].strip()
        try:
            if name in _BOOL:
                kwargs[name] = sec.getboolean(key)
            elif name in _INT:
                kwargs[name] = int(raw)
            elif name in _FLOAT:
                kwargs[name] = float(raw)
            elif name == "seeds":
                kwargs[name] = [int(s) for s in raw.replace(",", " ").split()]
            else:
                kwargs[name] = raw
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    cfg = ExperimentConfig(**kwargs, base_dir=str(base_dir) if base_dir else None)
    cfg.validate()
    return cfg


def config_to_string(cfg: ExperimentConfig) -> str:
    lines = ["[experiment]"]
    for f in fields(cfg):
        if f.name == "base_dir":
            continue
        v = getattr(cfg, f.name)
        if v is None:
            continue
        if f.name == "seeds":
            v = " ".join(str(s) for s in v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return config_from_string(path.read_text(), base_dir=path.parent)


def build(cfg: ExperimentConfig) -> tuple[Instance, Schedule]:
    """Instance and schedule for a config; raises on any validation failure."""
    cfg.validate()
    base = Path(cfg.base_dir) if cfg.base_dir else None
    inst = resolve_instance(cfg.instance, cfg.T, base)
    if cfg.delta is not None:
        inst = inst.with_delta(cfg.delta)
    schedule = Schedule.for_instance(cfg.schedule, inst)
    return inst, schedule


def _worker(args):
    inst, policy, schedule, seeds, p, trace = args
    return simulate(inst, policy, schedule, seeds, p=p, trace=trace)


def run_replications(
    inst: Instance,
    policy: str,
    schedule: Schedule,
    seeds,
    p: Optional[float] = None,
    trace: bool = False,
    workers: int = 0,
) -> TrajectoryBatch:
    seeds = list(seeds)
    workers = workers or os.cpu_count() or 1
    workers = max(1, min(workers, len(seeds)))
    if workers == 1:
        return simulate(inst, policy, schedule, seeds, p=p, trace=trace)
    chunks = [list(c) for c in np.array_split(np.asarray(seeds), workers) if len(c)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_worker, [(inst, policy, schedule, c, p, trace) for c in chunks]))
    return TrajectoryBatch.stack(parts)


def run_experiment(cfg: ExperimentConfig, out_dir: Optional[Path] = None) -> dict:
    """Run every replication, write CSVs, and return the summary dict."""
    inst, schedule = build(cfg)
    opt = require_optimal(solve_baseline(inst)).objective
    batch = run_replications(inst, cfg.policy, schedule, cfg.seed_list(), cfg.p, cfg.trace_confidence, cfg.workers)
    try:
        t_min = tau_prime(schedule, inst.delta) if inst.delta else 1
    except ScheduleError:
        t_min = 1
    t_min = min(t_min, inst.T + 1)
    agg = aggregate(batch, opt, t_min=t_min, realized=cfg.realized_regret)

    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    if out_dir is None and cfg.base_dir and not out.is_absolute():
        out = Path(cfg.base_dir) / out
    out.mkdir(parents=True, exist_ok=True)
    if cfg.write_trajectories:
        for i in range(batch.n):
            write_trajectory_csv(batch[i], out / f"trajectory_seed{batch.seeds[i]}.csv")
    write_aggregate_csv(agg, out / "aggregate.csv")
    summary = {
        "instance": inst.name,
        "policy": cfg.policy,
        "schedule": cfg.schedule,
        "delta": inst.delta,
        "opt_per_round": opt,
        **agg.summary(t_min=t_min),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def override(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    """Copy of ``cfg`` with every non-None keyword applied."""
    new = replace(cfg, **{k: v for k, v in kw.items() if v is not None})
    new.validate()
    return new
