import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from contextlib import ExitStack
from dataclasses import dataclass, field
from pathlib import Path

import django
from django.conf import settings

from metrics.archive import persist_run
from metrics.report import aggregate_reports, write_flow_csv, write_report
from transport.flowlog import FlowLog

from .config import (
    AGGREGATE_FILE,
    AXIS_ALIASES,
    FLOW_CSV_FILE,
    FLOW_LOG_FILE,
    REPORT_FILE,
    SWEEP_FILE,
    SWEEP_HEADER,
    TRACE_FILE,
)
from .simulation import Simulation

logger = logging.getLogger(__name__)


@dataclass
class ScenarioOutcome:
    out_dir: Path
    results: list = field(default_factory=list)
    aggregate: dict = None

    @property
    def reports(self):
        return [r.report for r in self.results]


def output_root(config, out=None):
    if out:
        return Path(out)
    if config["run"]["output_dir"]:
        return Path(config["run"]["output_dir"])
    return Path(settings.HOPSIM_OUTPUT_DIR) / config.name


def run_seed(config, seed, out_dir):
    """Run one seed and write its files; safe to call in a worker process."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    run = config["run"]
    with ExitStack() as stack:
        trace = None
        if run["trace"]:
            trace_path = out_dir / TRACE_FILE.format(seed=seed)
            trace = stack.enter_context(trace_path.open("w"))
        flow_log = None
        if run["flow_log"]:
            log_path = out_dir / FLOW_LOG_FILE.format(seed=seed)
            handle = stack.enter_context(log_path.open("w"))
            flow_log = FlowLog(stream=handle)
        result = Simulation(config, seed, trace_file=trace, flow_log=flow_log).run()
    write_report(result.report, out_dir / REPORT_FILE.format(seed=seed))
    if config["metrics"]["flow_csv"]:
        write_flow_csv(result.records, out_dir / FLOW_CSV_FILE.format(seed=seed))
    return result


def _init_worker():
    django.setup()


def run_scenario(config, out=None, workers=None):
    """Every seed of a config, then the cross-seed aggregate."""
    out_dir = output_root(config, out)
    seeds = config.seeds
    workers = workers or settings.HOPSIM_WORKERS
    if workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(
            max_workers=min(workers, len(seeds)), initializer=_init_worker
        ) as pool:
            jobs = [pool.submit(run_seed, config, seed, out_dir) for seed in seeds]
            results = [job.result() for job in jobs]
    else:
        results = [run_seed(config, seed, out_dir) for seed in seeds]
    aggregate = aggregate_reports([r.report for r in results])
    write_report(aggregate, out_dir / AGGREGATE_FILE)
    if config["run"]["persist"]:
        for result in results:
            persist_run(
                config.name,
                config.scheme_name,
                result.report,
                result.records,
                result.flows_started,
            )
    return ScenarioOutcome(out_dir, results, aggregate)


def sweep_rows(value, aggregate):
    """(value, scheme, bin, avg, p99) rows for one sweep point."""
    scheme = aggregate["config"]["scheme"]["name"]
    rows = []
    for label, stats in aggregate["slowdown"].items():
        avg = stats["avg"]["mean"] if stats.get("avg") else None
        p99 = stats["p99"]["mean"] if stats.get("p99") else None
        rows.append((value, scheme, label, avg, p99))
    return rows


def sweep(config, axis, values, out=None, workers=None):
    root = output_root(config, out)
    key = AXIS_ALIASES.get(axis, axis)
    variants = [(value, config.with_value(axis, value)) for value in values]
    rows = []
    outcomes = []
    for value, variant in variants:
        outcome = run_scenario(variant, root / f"{key}={value}", workers)
        outcomes.append(outcome)
        rows.extend(sweep_rows(value, outcome.aggregate))
    root.mkdir(parents=True, exist_ok=True)
    path = root / SWEEP_FILE
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        for value, scheme, label, avg, p99 in rows:
            writer.writerow(
                (
                    value,
                    scheme,
                    label,
                    "" if avg is None else f"{avg:.6f}",
                    "" if p99 is None else f"{p99:.6f}",
                )
            )
    logger.info(
        "sweep over %s: %d points, %d rows -> %s", axis, len(values), len(rows), path
    )
    return path, rows, outcomes
