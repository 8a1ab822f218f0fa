import json
import tempfile
from io import StringIO
from pathlib import Path
from unittest import skipUnless

from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase, tag

from engine.exceptions import ConfigurationError
from metrics.models import SimulationRun
from transport.flowlog import FlowLog

from .config import AGGREGATE_FILE, REPORT_FILE, SWEEP_FILE, SWEEP_HEADER
from .loader import load_preset, parse_config_text, parse_value, preset_names
from .runner import run_scenario, run_seed, sweep
from .simulation import Simulation

SMALL_POISSON = """
[topology]
preset = "walkthrough"

[scheme]
name = "hopper"

[workload]
mode = "poisson"
cdf = "alicloud"
load = 0.3
duration_ns = 40_000

[run]
name = "small"
seeds = [1]
"""

SINGLE_FLOW = """
[topology]
preset = "acceptance-symmetric"

[scheme]
name = "ecmp"

[workload]
mode = "explicit"

[[workload.flows]]
src = 0
dst = 8
size = 100_000
"""

SMALL_COLLECTIVE = """
[topology]
preset = "walkthrough"

[scheme]
name = "hopper"

[workload]
mode = "collective"
rounds = 3
flows_per_round = 4
flow_size = 200_000
"""


LOSSY_INCAST = """
[topology]
preset = "walkthrough"
queue_capacity = 20_000
ecn_kmin = 5_000
ecn_kmax = 10_000

[scheme]
name = "ecmp"

[workload]
mode = "explicit"
""" + "".join(
    f"\n[[workload.flows]]\nsrc = {src}\ndst = 4\nsize = 200_000\n" for src in range(4)
)


def flow_events(flow_log, flow_id):
    return [(t, event, detail) for t, _, event, detail in flow_log.events(flow_id)]


def trace_marks(text, target):
    """(kind, port) of every decision annotation the trace holds for target."""
    marks = []
    for line in text.splitlines():
        _, seq, kind, where = line.split("\t")
        if seq != "-":
            continue
        name, _, port = where.partition(":port=")
        if name == target:
            marks.append((kind, int(port) if port else None))
    return marks


def detail_value(detail, key):
    for part in detail.split():
        name, _, value = part.partition("=")
        if name == key:
            return int(value)
    return None


class ConfigTest(SimpleTestCase):
    def test_empty_config_gets_defaults(self):
        config = parse_config_text("")
        self.assertEqual(config["topology"]["preset"], "acceptance-symmetric")
        self.assertEqual(config.scheme_name, "hopper")
        self.assertEqual(config["scheme"]["th_probe"], 1.5)
        self.assertEqual(config["scheme"]["th_cong"], 2.5)
        self.assertEqual(config.seeds, [1])
        self.assertEqual(config["switchnet"]["ack_routing"], "reversed-tuple")

    def test_unknown_key_names_line_and_suggestion(self):
        text = '[scheme]\nname = "hopper"\nttl_prob = 4.0\n'
        with self.assertRaises(ConfigurationError) as ctx:
            parse_config_text(text)
        message = str(ctx.exception)
        self.assertIn("scheme.ttl_prob", message)
        self.assertIn("line 3", message)
        self.assertIn("ttl_probe", message)

    def test_unknown_block_suggests_closest(self):
        with self.assertRaises(ConfigurationError) as ctx:
            parse_config_text("[schme]\nname = \"ecmp\"\n")
        self.assertIn("'scheme'", str(ctx.exception))

    def test_threshold_order_rejected(self):
        with self.assertRaises(ConfigurationError):
            parse_config_text("[scheme]\nth_probe = 3.0\nth_cong = 2.0\n")

    def test_load_out_of_range(self):
        with self.assertRaises(ConfigurationError):
            parse_config_text("[workload]\nload = 1.5\n")

    def test_preset_and_shape_conflict(self):
        with self.assertRaises(ConfigurationError):
            parse_config_text(
                '[topology]\npreset = "walkthrough"\n'
                "hosts = 8\nleaves = 2\nspines = 2\n"
            )

    def test_bad_toml(self):
        with self.assertRaises(ConfigurationError):
            parse_config_text("[scheme\n")

    def test_unknown_scheme(self):
        with self.assertRaises(ConfigurationError):
            parse_config_text('[scheme]\nname = "letflow"\n')

    def test_effective_thresholds_scale_with_base_rtt(self):
        config = load_preset("appendix-walkthrough")
        topo = config.build_topology()
        params = config.hopper_params(topo)
        self.assertEqual(topo.base_rtt(), 8_000)
        self.assertEqual(params.th_probe, 12_000)
        self.assertEqual(params.th_cong, 14_000)
        echo = config.echo(topo)
        self.assertEqual(echo["effective"]["base_rtt_ns"], 8_000)
        self.assertEqual(len(echo["workload"]["flows"]), 4)

    def test_shipped_presets_parse(self):
        names = preset_names()
        for name in (
            "paper50",
            "paper80",
            "ml-scaled",
            "testbed-collective",
            "appendix-walkthrough",
            "delay-compensation",
        ):
            self.assertIn(name, names)
        for name in names:
            load_preset(name)

    def test_unknown_preset(self):
        with self.assertRaises(ConfigurationError):
            load_preset("nope")

    def test_collective_preset_fills_unset_values(self):
        config = load_preset("testbed-collective")
        self.assertEqual(config["workload"]["rounds"], 8)
        self.assertEqual(config["workload"]["flows_per_round"], 4)
        self.assertEqual(config["workload"]["flow_size"], 4_000_000)

    def test_with_value(self):
        config = parse_config_text(SMALL_POISSON)
        variant = config.with_value("load", 0.6)
        self.assertEqual(variant["workload"]["load"], 0.6)
        self.assertEqual(config["workload"]["load"], 0.3)
        self.assertEqual(config.with_value("scheme", "rps").scheme_name, "rps")
        for axis in ("run.seeds", "workload.flows", "nonsense", "scheme.nope"):
            with self.assertRaises(ConfigurationError):
                config.with_value(axis, 1)
        with self.assertRaises(ConfigurationError):
            config.with_value("load", 2.0)

    def test_parse_value(self):
        self.assertEqual(parse_value("0.5"), 0.5)
        self.assertEqual(parse_value("4000"), 4000)
        self.assertIs(parse_value("true"), True)
        self.assertEqual(parse_value("ecmp"), "ecmp")
        self.assertEqual(parse_value("[1, 2]"), [1, 2])


class SimulationTest(SimpleTestCase):
    def test_same_seed_same_report_bytes(self):
        config = parse_config_text(SMALL_POISSON)
        with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
            first = run_seed(config, 1, a)
            second = run_seed(config, 1, b)
            name = REPORT_FILE.format(seed=1)
            self.assertEqual(
                (Path(a) / name).read_bytes(), (Path(b) / name).read_bytes()
            )
        self.assertEqual(first.trace_digest, second.trace_digest)
        self.assertGreater(first.flows_started, 0)

    def test_different_seeds_differ(self):
        config = parse_config_text(SMALL_POISSON)
        one = Simulation(config, 1).run()
        two = Simulation(config, 2).run()
        self.assertNotEqual(one.trace_digest, two.trace_digest)

    def test_unloaded_flow_has_unit_slowdown(self):
        result = Simulation(parse_config_text(SINGLE_FLOW), 1).run()
        self.assertEqual(len(result.records), 1)
        slowdown = result.records[0].slowdown
        self.assertGreaterEqual(slowdown, 1 - 1e-9)
        self.assertLess(slowdown, 1.05)

    def test_every_flow_completes_and_bytes_are_conserved(self):
        result = Simulation(parse_config_text(SMALL_POISSON), 3).run()
        counters = result.report["counters"]
        self.assertEqual(counters["flows_completed"], counters["flows_started"])
        self.assertEqual(counters["drops"], 0)
        for record in result.records:
            self.assertGreaterEqual(record.slowdown, 1 - 1e-9)

    def test_run_stops_at_max_time(self):
        config = parse_config_text(SINGLE_FLOW).with_run(max_time_ns=2_000)
        result = Simulation(config, 1).run()
        self.assertEqual(result.records, [])
        self.assertEqual(result.flows_started, 1)
        self.assertEqual(result.report["counters"]["flows_completed"], 0)

    def test_data_bytes_balance_on_lossy_incast(self):
        result = Simulation(parse_config_text(LOSSY_INCAST), 1).run()
        counters = result.report["counters"]
        ledger = result.report["data_bytes"]
        self.assertEqual(counters["flows_completed"], 4)
        self.assertGreater(counters["drops"], 0)
        self.assertGreater(counters["retransmits"], 0)
        self.assertGreater(ledger["dropped"], 0)
        self.assertEqual(ledger["completed_bytes"], 800_000)
        self.assertEqual(
            ledger["delivered"] + ledger["dropped"] + ledger["in_network"],
            ledger["completed_bytes"] + ledger["retransmitted_bytes"],
        )
        self.assertTrue(ledger["balanced"])

    def test_collective_rounds_wait_for_the_barrier(self):
        simulation = Simulation(parse_config_text(SMALL_COLLECTIVE), 1)
        result = simulation.run()
        self.assertEqual(len(result.records), 12)
        by_round = {}
        for flow in simulation.flows:
            by_round.setdefault(flow.round_index, []).append(flow)
        self.assertEqual(sorted(by_round), [0, 1, 2])
        for index in (1, 2):
            previous_end = max(f.end_ns for f in by_round[index - 1])
            for flow in by_round[index]:
                self.assertEqual(flow.start_ns, previous_end)
        rounds = result.report["rounds"]
        self.assertEqual(rounds["rounds"], 3)
        self.assertEqual(rounds["total_ns"], sum(rounds["durations_ns"]))

    def test_report_carries_effective_config(self):
        result = Simulation(parse_config_text(SINGLE_FLOW), 1).run()
        report = result.report
        self.assertEqual(list(report)[:3], ["version", "seed", "config"])
        self.assertEqual(report["config"]["scheme"]["name"], "ecmp")
        effective = report["config"]["effective"]
        self.assertEqual(effective["topology"], "acceptance-symmetric")


class HopperScenarioTest(SimpleTestCase):
    def test_walkthrough_probes_before_switching(self):
        flow_log = FlowLog(keep=True)
        Simulation(load_preset("appendix-walkthrough"), 1, flow_log=flow_log).run()
        events = flow_events(flow_log, 0)
        names = [event for _, event, _ in events]

        th_probe = names.index("th_probe")
        probes = [i for i, name in enumerate(names) if name == "probe"]
        th_cong = names.index("th_cong")
        scheduled = names.index("migrate_scheduled")
        migrate = names.index("migrate")

        self.assertGreaterEqual(len(probes), 2)
        self.assertLess(th_probe, probes[0])
        self.assertLess(probes[1], th_cong)
        first_ports = {detail_value(events[i][2], "port") for i in probes[:2]}
        self.assertEqual(len(first_ports), 2)
        self.assertLess(th_cong, scheduled)
        self.assertLess(scheduled, migrate)

        new_port = detail_value(events[migrate][2], "to")
        later_sends = [
            detail_value(detail, "port")
            for _, event, detail in events[migrate + 1 :]
            if event == "send"
        ]
        self.assertTrue(later_sends)
        self.assertEqual(later_sends[0], new_port)

    def test_walkthrough_trace_shows_switch_sequence(self):
        trace = StringIO()
        Simulation(load_preset("appendix-walkthrough"), 1, trace_file=trace).run()
        marks = trace_marks(trace.getvalue(), "flow:0")
        kinds = [kind for kind, _ in marks]

        th_probe = kinds.index("th_probe")
        probes = [i for i, kind in enumerate(kinds) if kind == "probe_tx"]
        th_cong = kinds.index("th_cong")
        scheduled = kinds.index("migrate_scheduled")
        migrate = kinds.index("migrate")
        sends = [i for i, kind in enumerate(kinds) if kind == "send"]

        self.assertGreaterEqual(len(probes), 2)
        self.assertEqual(len({marks[i][1] for i in probes[:2]}), 2)
        self.assertLess(th_probe, probes[0])
        self.assertLess(probes[1], th_cong)
        self.assertLess(th_cong, scheduled)
        self.assertLess(scheduled, migrate)
        self.assertTrue(sends)
        self.assertLess(migrate, sends[0])
        self.assertEqual(marks[sends[0]][1], marks[migrate][1])

    def test_background_flows_never_move(self):
        flow_log = FlowLog(keep=True)
        Simulation(load_preset("appendix-walkthrough"), 1, flow_log=flow_log).run()
        for flow_id in (1, 2, 3):
            self.assertEqual(flow_log.events(flow_id, "migrate"), [])
            self.assertEqual(flow_log.events(flow_id, "probe"), [])

    def migration_hold(self, delay_compensation):
        config = load_preset("delay-compensation").with_value(
            "delay_compensation", delay_compensation
        )
        flow_log = FlowLog(keep=True)
        Simulation(config, 1, flow_log=flow_log).run()
        scheduled = flow_log.events(0, "migrate_scheduled")
        self.assertTrue(scheduled)
        t, _, _, detail = scheduled[0]
        return detail_value(detail, "at") - t

    def test_delay_compensation_holds_the_switch(self):
        self.assertGreater(self.migration_hold(True), 0)
        self.assertEqual(self.migration_hold(False), 0)


class RunnerTest(TestCase):
    def test_run_scenario_writes_reports_and_aggregate(self):
        config = parse_config_text(SMALL_POISSON).with_run(seeds=[1, 2])
        with tempfile.TemporaryDirectory() as out:
            outcome = run_scenario(config, out=out, workers=1)
            for seed in (1, 2):
                self.assertTrue((Path(out) / REPORT_FILE.format(seed=seed)).is_file())
                self.assertTrue((Path(out) / f"seed{seed}.flows.csv").is_file())
            aggregate = json.loads((Path(out) / AGGREGATE_FILE).read_text())
        self.assertEqual(aggregate["seeds"], [1, 2])
        self.assertEqual(outcome.aggregate["counters"]["flows_started"]["n"], 2)

    def test_persist_archives_each_seed(self):
        config = parse_config_text(SINGLE_FLOW).with_run(persist=True, name="archived")
        with tempfile.TemporaryDirectory() as out:
            run_scenario(config, out=out, workers=1)
        run = SimulationRun.objects.get(name="archived")
        self.assertEqual(run.scheme, "ecmp")
        self.assertEqual(run.flows.count(), 1)

    def test_sweep_writes_one_table(self):
        config = parse_config_text(SINGLE_FLOW)
        with tempfile.TemporaryDirectory() as out:
            path, rows, outcomes = sweep(
                config, "scheme", ["ecmp", "hopper"], out=out, workers=1
            )
            lines = Path(path).read_text().splitlines()
            self.assertEqual(Path(path).name, SWEEP_FILE)
            self.assertTrue((Path(out) / "scheme.name=hopper").is_dir())
        self.assertEqual(lines[0], ",".join(SWEEP_HEADER))
        self.assertEqual(len(outcomes), 2)
        self.assertEqual({row[1] for row in rows}, {"ecmp", "hopper"})


class CommandTest(TestCase):
    def write_config(self, directory, text):
        path = Path(directory) / "run.toml"
        path.write_text(text)
        return str(path)

    def test_run_command(self):
        out = StringIO()
        with tempfile.TemporaryDirectory() as directory:
            path = self.write_config(directory, SINGLE_FLOW)
            call_command(
                "run", "--config", path, "--out", directory, "--flow-log", stdout=out
            )
            self.assertTrue((Path(directory) / "seed1.flows.log").is_file())
        self.assertIn("seed 1: 1/1 flows", out.getvalue())

    def test_run_command_reports_config_errors(self):
        with tempfile.TemporaryDirectory() as directory:
            path = self.write_config(directory, "[scheme]\nttl_prob = 4.0\n")
            with self.assertRaisesMessage(CommandError, "ttl_probe"):
                call_command("run", "--config", path, stdout=StringIO())

    def test_run_command_needs_a_config(self):
        with self.assertRaises(CommandError):
            call_command("run", stdout=StringIO())

    def test_sweep_command(self):
        out = StringIO()
        with tempfile.TemporaryDirectory() as directory:
            path = self.write_config(directory, SINGLE_FLOW)
            call_command(
                "sweep",
                "--config",
                path,
                "--out",
                directory,
                "--axis",
                "scheme",
                "--values",
                "ecmp,rps",
                stdout=out,
            )
        self.assertIn("rps", out.getvalue())

    def test_profile_command(self):
        out = StringIO()
        call_command(
            "profile",
            "--topology",
            "walkthrough",
            "--src",
            "0",
            "--dst",
            "4",
            stdout=out,
        )
        lines = out.getvalue().splitlines()
        self.assertEqual(lines[0], "src,dst,src_port,path_id,links")
        paths = {line.split(",")[3] for line in lines[1:]}
        self.assertEqual(sorted(paths), ["0", "1", "2", "3"])

    def test_baseline_command(self):
        out = StringIO()
        with tempfile.TemporaryDirectory() as directory:
            path = self.write_config(directory, SINGLE_FLOW)
            call_command(
                "baseline", "--config", path, "--sizes", "1000,100000", stdout=out
            )
        lines = out.getvalue().splitlines()
        self.assertEqual(lines[0], "size_bytes,fct_ns")
        small, large = (int(line.split(",")[1]) for line in lines[1:])
        self.assertLess(small, large)


@tag("acceptance")
@skipUnless(settings.HOPSIM_ACCEPTANCE, "set HOPSIM_ACCEPTANCE=1 to run")
class AcceptanceTest(SimpleTestCase):
    """Directional comparisons across schemes; slow and statistical."""

    def outcome(self, config, seeds=(1, 2, 3, 4, 5)):
        config = config.with_run(seeds=list(seeds))
        with tempfile.TemporaryDirectory() as out:
            return run_scenario(config, out=out)

    def per_seed(self, first, second, value):
        return [
            (value(a), value(b)) for a, b in zip(first.reports, second.reports)
        ]

    def test_hopper_beats_flowbender_on_large_training_flows(self):
        for load in (0.5, 0.8):
            config = load_preset("ml-scaled").with_value("load", load)
            hopper = self.outcome(config)
            flowbender = self.outcome(config.with_value("scheme", "flowbender"))
            slowdown = hopper.reports[0]["slowdown"]
            labels = [label for label in slowdown if label != "all"]
            for label in labels[-2:]:
                pairs = self.per_seed(
                    hopper, flowbender, lambda r: r["slowdown"][label]["avg"]
                )
                for ours, theirs in pairs:
                    self.assertLess(ours, theirs)
                ours = sum(p[0] for p in pairs)
                theirs = sum(p[1] for p in pairs)
                self.assertLessEqual(ours, 0.95 * theirs)

    def test_testbed_prefers_fast_links(self):
        config = load_preset("testbed-collective")
        hopper = self.outcome(config)
        flowbender = self.outcome(config.with_value("scheme", "flowbender"))
        slow = self.per_seed(
            hopper,
            flowbender,
            lambda r: r["utilization"]["classes"]["1G"]["utilization"],
        )
        rounds = self.per_seed(hopper, flowbender, lambda r: r["rounds"]["total_ns"])
        for ours, theirs in slow + rounds:
            self.assertLess(ours, theirs)

    def test_delay_compensation_cuts_reordering(self):
        config = load_preset("delay-compensation")
        seeds = range(1, 11)
        on = self.outcome(config, seeds).aggregate
        off = self.outcome(config.with_value("delay_compensation", False), seeds)
        on_ooo = on["counters"]["ooo_buffered"]["mean"]
        off_ooo = off.aggregate["counters"]["ooo_buffered"]["mean"]
        self.assertLessEqual(on_ooo, 0.7 * off_ooo)

    def test_spraying_inflates_tail_on_asymmetric_fabric(self):
        config = load_preset("testbed-collective")
        hopper = self.outcome(config)
        rps = self.outcome(config.with_value("scheme", "rps"))
        for ours, theirs in self.per_seed(
            hopper, rps, lambda r: r["slowdown"]["all"]["p99"]
        ):
            self.assertLess(ours, theirs)

    def test_ecmp_spreads_bytes_less_evenly(self):
        config = load_preset("paper50").with_value("workload.cdf", "hadoop")
        hopper = self.outcome(config).aggregate
        ecmp = self.outcome(config.with_value("scheme", "ecmp")).aggregate
        self.assertGreater(ecmp["spine_spread"]["mean"], hopper["spine_spread"]["mean"])
