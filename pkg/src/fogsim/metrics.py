"""Derives every reported quantity from a run's message lifecycle log and
exports machine-readable results (per-message CSV plus a JSON run summary).
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from .engine import COMPONENTS, DONE, STATUS_NAMES, Agg, Message, RunLog

CSV_COLUMNS = [
    "run_id",
    "seed",
    "policy",
    "scenario",
    "msg_id",
    "app",
    "loop",
    "type",
    "src",
    "dst",
    "bytes",
    "instr",
    "created",
    "latency",
    "waiting",
    "service",
    "response",
    "total_response",
]


def latency(record: Message) -> float:
    """Accumulated link wait + transmission + propagation for one message."""
    return record.latency


def delay_components(record: Message) -> tuple[float, float, float, float]:
    """(waiting, service, response, total_response) for a completed message."""
    return (record.waiting, record.service, record.response, record.total_response)


def loop_execution_delay(loop_records: list[Message]) -> float:
    """Sum of total response over the messages composing one loop instance."""
    return sum(r.total_response for r in loop_records)


def loop_transfer_rate(transmitted_bytes: float, mean_execution_delay: float) -> float | None:
    """Bytes moved along a loop per time-step of its mean execution delay."""
    if mean_execution_delay <= 0:
        return None
    return transmitted_bytes / mean_execution_delay


def module_utilization(log: RunLog) -> dict[tuple[int, str, str], float]:
    """Busy-time fraction per (node, app, message type)."""
    return {key: busy / log.duration for key, busy in log.busy_time.items()}


def run_id(log: RunLog) -> str:
    return f"{log.scenario}-{log.policy}-d{int(log.duration)}-s{log.seed}"


def build_summary(log: RunLog) -> dict:
    """Flatten a RunLog into the JSON-able per-run summary consumed by the
    comparison step. All keys are strings so the file round-trips."""
    spec_keys = sorted(set(log.generated) | set(log.completed))
    messages = {}
    delays = {}
    overall = {c: Agg() for c in COMPONENTS}
    for key in spec_keys:
        app, spec = key
        label = f"{app}/{spec}"
        messages[label] = {
            "generated": log.generated.get(key, 0),
            "transmitted": log.transmitted.get(key, 0),
            "completed": log.completed.get(key, 0),
        }
        comps = log.delays.get(key)
        if comps:
            delays[label] = {c: comps[c].to_dict() for c in COMPONENTS}
            for c in COMPONENTS:
                agg = overall[c]
                agg.n += comps[c].n
                agg.total += comps[c].total
                agg.sq += comps[c].sq

    loops = {}
    rates = []
    for (app, loop_idx), agg in sorted(log.loop_delays.items()):
        label = f"{app}/loop{loop_idx}"
        bts = log.loop_bytes.get((app, loop_idx), 0.0)
        rate = loop_transfer_rate(bts, agg.mean) if agg.n else None
        loops[label] = {
            "instances": agg.n,
            "mean_delay": agg.mean,
            "std_delay": agg.std,
            "transmitted_bytes": bts,
            "transfer_rate": rate,
        }
        if rate is not None:
            rates.append(rate)
    # loops with traffic but no completed instance still report their bytes
    for (app, loop_idx), bts in sorted(log.loop_bytes.items()):
        label = f"{app}/loop{loop_idx}"
        if label not in loops:
            loops[label] = {
                "instances": 0,
                "mean_delay": None,
                "std_delay": None,
                "transmitted_bytes": bts,
                "transfer_rate": None,
            }

    nodes: dict[str, dict] = {}
    for (node, app, spec), served in sorted(log.served.items()):
        entry = nodes.setdefault(str(node), {"served": {}, "busy_time": 0.0})
        entry["served"][f"{app}/{spec}"] = served
    for (node, app, spec), busy in sorted(log.busy_time.items()):
        entry = nodes.setdefault(str(node), {"served": {}, "busy_time": 0.0})
        entry["busy_time"] += busy
    for entry in nodes.values():
        entry["utilization"] = entry["busy_time"] / log.duration

    assignments: dict[str, dict[str, int]] = {}
    for (app, dst), count in sorted(log.assignments.items()):
        assignments.setdefault(app, {})[str(dst)] = count

    conservation = {}
    for key in spec_keys:
        app, spec = key
        entry = {
            "generated": log.generated.get(key, 0),
            "completed": log.completed.get(key, 0),
        }
        for status in STATUS_NAMES.values():
            entry[status] = log.pending_end.get((app, spec, status), 0)
        conservation[f"{app}/{spec}"] = entry

    mean_delays = {c: overall[c].to_dict() for c in COMPONENTS}
    loop_delay_means = [
        entry["mean_delay"] for entry in loops.values() if entry["mean_delay"] is not None
    ]
    summary = {
        "run_id": run_id(log),
        "scenario": log.scenario,
        "policy": log.policy,
        "duration": log.duration,
        "seed": log.seed,
        "arrival_scale": log.arrival_scale,
        "messages": messages,
        "delays": delays,
        "loops": loops,
        "nodes": nodes,
        "assignments": assignments,
        "saturation": dict(log.saturation),
        "conservation": conservation,
        "overall": {
            "mean_delays": mean_delays,
            "transfer_rate_mean": sum(rates) / len(rates) if rates else None,
            "loop_delay_mean": (
                sum(loop_delay_means) / len(loop_delay_means) if loop_delay_means else None
            ),
            "completed_messages": overall["latency"].n,
            "link_waiting": log.saturation.get("link_waiting", 0),
        },
    }
    if log.electre_decisions:
        summary["electre"] = {
            "decisions": log.electre_decisions,
            "ties": log.electre_ties,
            "tie_rate": log.electre_ties / log.electre_decisions,
        }
    if log.bucket_width:
        summary["timeseries"] = {
            "bucket_width": log.bucket_width,
            "buckets": [
                {
                    "start": idx * log.bucket_width,
                    "latency": aggs["latency"].to_dict(),
                    "total_response": aggs["total_response"].to_dict(),
                }
                for idx, aggs in sorted(log.buckets.items())
            ],
        }
    return summary


def _csv_row(log: RunLog, rid: str, msg: Message) -> list:
    finished = msg.status == DONE
    return [
        rid,
        log.seed,
        log.policy,
        log.scenario,
        msg.id,
        msg.app,
        msg.ancestor,
        msg.spec.name,
        msg.src,
        msg.dst,
        msg.spec.bytes,
        msg.spec.instructions,
        msg.created,
        msg.latency,
        msg.waiting if finished else "",
        msg.service if finished else "",
        msg.response if finished else "",
        msg.total_response if finished else "",
    ]


def export_csv(log: RunLog, path: str | Path) -> None:
    if log.records is None:
        raise ValueError("run was executed without per-message records")
    rid = run_id(log)
    rows = sorted(log.records, key=lambda m: m.id)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for msg in rows:
            writer.writerow(_csv_row(log, rid, msg))


def export_summary(summary: dict, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=1)
        fh.write("\n")


def export(log: RunLog, out_dir: str | Path, per_message_csv: bool = True) -> dict:
    """Write summary (and optionally the per-message CSV) under out_dir;
    returns {"summary": path, "csv": path | None}."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rid = run_id(log)
    summary = build_summary(log)
    summary_path = out / f"summary__{rid}.json"
    export_summary(summary, summary_path)
    csv_path = None
    if per_message_csv and log.records is not None:
        csv_path = out / f"messages__{rid}.csv"
        export_csv(log, csv_path)
    if log.decision_log is not None:
        with open(out / f"decisions__{rid}.jsonl", "w") as fh:
            for record in log.decision_log:
                fh.write(json.dumps(record, sort_keys=True))
                fh.write("\n")
    if log.audit is not None:
        with open(out / f"events__{rid}.jsonl", "w") as fh:
            for record in log.audit:
                fh.write(json.dumps(record, sort_keys=True))
                fh.write("\n")
    return {"summary": str(summary_path), "csv": str(csv_path) if csv_path else None}


def read_summary(path: str | Path) -> dict:
    with open(path) as fh:
        return json.load(fh)
