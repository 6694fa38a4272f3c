"""Experiment orchestration: configuration, multi-seed/multi-policy sweeps in
a worker pool, and the cross-policy comparison report.
"""
from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import engine, metrics
from .policies import DEFAULT_WEIGHTS, POLICY_NAMES
from .seeding import derive_seed
from .topology import Topology, build_generic_topology, generate_as_topology
from .workload import build_single_loop_suite, build_two_loop_suite

SCENARIOS = ("generic", "as")

# per-message CSVs get large; auto-disable them beyond this duration
CSV_AUTO_LIMIT = 100_000


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    scenario: str = "generic"
    policies: list[str] = field(default_factory=lambda: list(POLICY_NAMES))
    durations: list[int] = field(default_factory=lambda: [10_000])
    seed_count: int = 10
    master_seed: int = 1
    seeds: list[int] | None = None  # explicit run seeds override seed_count
    arrival_scale: float = 100.0
    weights: list[float] | None = None
    q_percentile: float = 10.0
    p_percentile: float = 20.0
    v_percentile: float = 100.0
    q_divisor: float = 3.0
    discrimination: float = 0.15
    drr_scope: str = "device-app"
    as_node_count: int = 32
    out_dir: str = "results"
    per_message_csv: bool | None = None  # None: only for durations <= CSV_AUTO_LIMIT
    dump_decisions: bool = False
    dump_events: bool = False
    bucket: float | None = None
    workers: int | None = None
    force: bool = False

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if not self.policies:
            raise ConfigError("policies must be non-empty")
        for policy in self.policies:
            if policy not in POLICY_NAMES:
                raise ConfigError(f"unknown policy {policy!r}")
        if not self.durations or any(d <= 0 for d in self.durations):
            raise ConfigError("durations must be a non-empty list of positive values")
        if self.seeds is not None and not self.seeds:
            raise ConfigError("seeds must be non-empty when given")
        if self.seeds is None and self.seed_count < 1:
            raise ConfigError("seed_count must be >= 1")
        if self.arrival_scale < 1:
            raise ConfigError("arrival_scale must be >= 1")
        if self.weights is not None:
            if len(self.weights) != 5 or any(w <= 0 for w in self.weights):
                raise ConfigError("weights must be 5 positive values")
            if abs(sum(self.weights) - 1.0) > 1e-9:
                raise ConfigError("weights must sum to 1")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        for key in data:
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)

    def run_seeds(self) -> list[int]:
        if self.seeds is not None:
            return list(self.seeds)
        return [derive_seed(self.master_seed, "run", i) for i in range(self.seed_count)]


def build_scenario(config: ExperimentConfig, run_seed: int):
    """Topology + application suite for one run. The AS scenario draws a fresh
    topology per run seed; the generic one is fixed."""
    if config.scenario == "generic":
        topology = build_generic_topology()
        apps, placement = build_single_loop_suite(topology)
    else:
        topology = generate_as_topology(
            derive_seed(run_seed, "topology"), node_count=config.as_node_count
        )
        apps, placement = build_two_loop_suite(topology)
    return topology, apps, placement


def _execute_run(task: dict) -> dict:
    config = ExperimentConfig.from_dict(task["config"])
    policy = task["policy"]
    duration = task["duration"]
    run_seed = task["seed"]
    out_dir = Path(config.out_dir)

    csv_wanted = config.per_message_csv
    if csv_wanted is None:
        csv_wanted = duration <= CSV_AUTO_LIMIT

    rid = f"{config.scenario}-{policy}-d{int(duration)}-s{run_seed}"
    summary_path = out_dir / f"summary__{rid}.json"
    if summary_path.exists() and not config.force:
        return {"run_id": rid, "summary": str(summary_path), "cached": True}

    topology, apps, placement = build_scenario(config, run_seed)
    policy_options: dict = {"drr_scope": config.drr_scope}
    if policy == "electre":
        policy_options.update(
            weights=tuple(config.weights) if config.weights else DEFAULT_WEIGHTS,
            discrimination=config.discrimination,
            q_percentile=config.q_percentile,
            p_percentile=config.p_percentile,
            v_percentile=config.v_percentile,
            q_divisor=config.q_divisor,
        )
    log = engine.run(
        topology,
        apps,
        placement,
        policy,
        duration,
        run_seed,
        arrival_scale=config.arrival_scale,
        collect_records=csv_wanted,
        audit=config.dump_events,
        decision_dump=config.dump_decisions,
        bucket_width=config.bucket,
        scenario=config.scenario,
        policy_options=policy_options,
    )
    paths = metrics.export(log, out_dir, per_message_csv=csv_wanted)
    return {"run_id": rid, "summary": paths["summary"], "csv": paths["csv"], "cached": False}


def run_experiment(config: ExperimentConfig) -> list[dict]:
    """Execute the cartesian product (policy x duration x seed); each run
    writes its own files, so execution order and pooling do not matter."""
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "config.json", "w") as fh:
        json.dump(config.to_dict(), fh, sort_keys=True, indent=1)
        fh.write("\n")

    tasks = [
        {"config": config.to_dict(), "policy": policy, "duration": duration, "seed": seed}
        for duration in config.durations
        for policy in config.policies
        for seed in config.run_seeds()
    ]
    workers = config.workers or os.cpu_count() or 1
    if workers <= 1 or len(tasks) == 1:
        return [_execute_run(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_execute_run, tasks))


# ------------------------------------------------------------- comparison


def _mean_std(values: list[float]) -> dict:
    clean = [v for v in values if v is not None]
    if not clean:
        return {"mean": None, "std": None, "count": 0}
    mean = sum(clean) / len(clean)
    var = sum((v - mean) ** 2 for v in clean) / len(clean)
    return {"mean": mean, "std": var**0.5, "count": len(clean)}


def _policy_stats(summaries: list[dict]) -> dict:
    def overall(s: dict, key: str):
        return s["overall"].get(key)

    utilizations = []
    for s in summaries:
        values = [entry["utilization"] for entry in s["nodes"].values()]
        utilizations.append(sum(values) / len(values) if values else 0.0)
    return {
        "runs": len(summaries),
        "transfer_rate": _mean_std([overall(s, "transfer_rate_mean") for s in summaries]),
        "loop_delay": _mean_std([overall(s, "loop_delay_mean") for s in summaries]),
        "latency": _mean_std(
            [s["overall"]["mean_delays"]["latency"]["mean"] for s in summaries]
        ),
        "waiting": _mean_std(
            [s["overall"]["mean_delays"]["waiting"]["mean"] for s in summaries]
        ),
        "total_response": _mean_std(
            [s["overall"]["mean_delays"]["total_response"]["mean"] for s in summaries]
        ),
        "saturation": _mean_std([float(s["overall"]["link_waiting"]) for s in summaries]),
        "utilization": _mean_std(utilizations),
    }


def compare(summaries_or_dir) -> dict:
    """Per (scenario, duration): policy-level mean +- std over seeds, and the
    relative improvement of each policy over each other on transfer rate."""
    if isinstance(summaries_or_dir, (str, Path)):
        paths = sorted(Path(summaries_or_dir).glob("summary__*.json"))
        summaries = [metrics.read_summary(p) for p in paths]
    else:
        summaries = list(summaries_or_dir)
    if not summaries:
        raise ConfigError("no run summaries to compare")

    groups: dict[tuple, dict[str, list[dict]]] = {}
    for summary in summaries:
        gkey = (summary["scenario"], summary["duration"])
        groups.setdefault(gkey, {}).setdefault(summary["policy"], []).append(summary)

    report = {"groups": []}
    for (scenario, duration), by_policy in sorted(groups.items()):
        stats = {policy: _policy_stats(runs) for policy, runs in sorted(by_policy.items())}
        improvement: dict[str, dict[str, float | None]] = {}
        for a, stat_a in stats.items():
            improvement[a] = {}
            for b, stat_b in stats.items():
                if a == b:
                    continue
                ma, mb = stat_a["transfer_rate"]["mean"], stat_b["transfer_rate"]["mean"]
                improvement[a][b] = None if not mb else (ma - mb) / mb
        report["groups"].append(
            {
                "scenario": scenario,
                "duration": duration,
                "policies": stats,
                "improvement": improvement,
            }
        )
    return report


def render_comparison(report: dict) -> str:
    lines = []
    for group in report["groups"]:
        lines.append(f"scenario={group['scenario']} duration={group['duration']:g}")
        header = (
            f"  {'policy':<10} {'transfer rate':>16} {'loop delay':>14} "
            f"{'latency':>10} {'waiting':>12} {'saturation':>11} {'util':>7}"
        )
        lines.append(header)
        for policy, s in group["policies"].items():
            def fmt(stat, digits=2):
                if stat["mean"] is None:
                    return "-"
                return f"{stat['mean']:.{digits}f}+-{stat['std']:.{digits}f}"

            lines.append(
                f"  {policy:<10} {fmt(s['transfer_rate']):>16} {fmt(s['loop_delay']):>14} "
                f"{fmt(s['latency']):>10} {fmt(s['waiting']):>12} "
                f"{fmt(s['saturation'], 1):>11} {fmt(s['utilization'], 3):>7}"
            )
        lines.append("  transfer-rate improvement (row over column):")
        for a, row in group["improvement"].items():
            cells = ", ".join(
                f"{b}: {100 * pct:+.1f}%" if pct is not None else f"{b}: -"
                for b, pct in row.items()
            )
            lines.append(f"    {a:<10} {cells}")
        lines.append("")
    return "\n".join(lines)
