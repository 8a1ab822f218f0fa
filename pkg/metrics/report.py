import csv
import json
import logging
from pathlib import Path

import numpy as np

from engine.exceptions import ConfigurationError

from .config import (
    EMPTY_AGGREGATE_MESSAGE,
    FLOW_CSV_HEADER,
    GLOBAL_COUNTERS,
    REPORT_VERSION,
)
from .stats import (
    compute_slowdown_stats,
    link_utilization_report,
    round_durations,
    spine_byte_shares,
    spread_value,
)

logger = logging.getLogger(__name__)


def build_report(
    *,
    config,
    seed,
    records,
    edges,
    network,
    counters,
    window_ns,
    trace_digest,
    flows=(),
    snapshots=None,
    data_bytes=None,
):
    """
    Assemble one run's report. Key order is fixed so two runs of the same
    configuration and seed serialize to identical bytes.
    """
    report = {
        "version": REPORT_VERSION,
        "seed": seed,
        "config": config,
        "trace_digest": trace_digest,
        "load_normalization": "aggregate host-link capacity",
        "bins": list(edges),
        "slowdown": compute_slowdown_stats(records, edges),
        "counters": {name: int(counters.get(name, 0)) for name in GLOBAL_COUNTERS},
        "utilization": link_utilization_report(network, window_ns),
        "spine_bytes": spine_byte_shares(network),
        "rounds": round_durations(flows),
    }
    if data_bytes is not None:
        report["data_bytes"] = data_bytes
    if snapshots:
        report["snapshots"] = snapshots
    return report


def dumps_report(report):
    return json.dumps(report, indent=2) + "\n"


def write_report(report, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_report(report))
    logger.info("wrote %s", path)
    return path


def write_flow_csv(records, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(FLOW_CSV_HEADER)
        for record in sorted(records, key=lambda r: r.flow_id):
            writer.writerow(record.as_row())
    return path


def _mean_std(values):
    values = np.asarray([v for v in values if v is not None], dtype=np.float64)
    if len(values) == 0:
        return None
    if not np.all(np.isfinite(values)):
        # An unbounded sample leaves the dispersion undefined.
        return {"mean": float(np.mean(values)), "stddev": None, "n": len(values)}
    stddev = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    return {"mean": float(np.mean(values)), "stddev": stddev, "n": len(values)}


def aggregate_reports(reports):
    """Mean and sample standard deviation of every statistic across seeds."""
    if not reports:
        raise ConfigurationError(EMPTY_AGGREGATE_MESSAGE)
    labels = []
    for report in reports:
        for label in report["slowdown"]:
            if label not in labels:
                labels.append(label)
    slowdown = {}
    for label in labels:
        present = [r["slowdown"][label] for r in reports if label in r["slowdown"]]
        slowdown[label] = {
            stat: _mean_std(entry[stat] for entry in present) for stat in present[0]
        }
    classes = sorted({name for r in reports for name in r["utilization"]["classes"]})
    utilization = {
        name: _mean_std(
            r["utilization"]["classes"][name]["utilization"]
            for r in reports
            if name in r["utilization"]["classes"]
        )
        for name in classes
    }
    return {
        "version": REPORT_VERSION,
        "seeds": [r["seed"] for r in reports],
        "config": reports[0]["config"],
        "slowdown": slowdown,
        "utilization": utilization,
        "counters": {
            name: _mean_std(r["counters"][name] for r in reports)
            for name in GLOBAL_COUNTERS
        },
        "spine_spread": _mean_std(spread_value(r["spine_bytes"]) for r in reports),
        "rounds_total_ns": _mean_std(r["rounds"]["total_ns"] for r in reports),
    }
