import json
import math
import tempfile
from pathlib import Path
from types import SimpleNamespace

from django.test import SimpleTestCase, TestCase

from engine.exceptions import ConfigurationError, SimulationError
from switchnet.network import OutputQueue
from topology.fabric import build_asymmetric_testbed, build_leaf_spine, build_preset
from transport.host import TransportParams
from transport.packets import Flow

from .archive import persist_run
from .baseline import BaselineOracle
from .models import FlowResult, SimulationRun
from .records import FlowRecord
from .report import aggregate_reports, build_report, dumps_report, write_flow_csv
from .stats import (
    bin_index,
    bin_labels,
    compute_slowdown_stats,
    link_utilization_report,
    nearest_rank,
    round_durations,
    spine_byte_shares,
    spread_value,
)


def pipeline_fct(topo, params, size, src, dst):
    """Closed-form unloaded FCT: paced sends, a BDP window and per-packet ACKs."""
    path = topo.best_path(src, dst, params.mtu, params.ack_bytes)
    uplink = topo.host_uplink[src]
    n = -(-size // params.mtu)
    sizes = [params.mtu] * (n - 1) + [size - (n - 1) * params.mtu]
    window = max(params.bdp_bytes, params.mtu)
    sends, acks = [], []
    oldest, inflight = 0, 0
    for i, pkt in enumerate(sizes):
        t = sends[-1] + uplink.serialization_ns(sizes[i - 1]) if i else 0
        while inflight + pkt > window:
            t = max(t, acks[oldest])
            inflight -= sizes[oldest]
            oldest += 1
        sends.append(t)
        acks.append(t + topo.unloaded_rtt(src, dst, path, pkt, params.ack_bytes))
        inflight += pkt
    return acks[-1]


def fake_network(topo, bytes_by_link=None):
    queues = [OutputQueue(link) for link in topo.links]
    for link_id, sent in (bytes_by_link or {}).items():
        queues[link_id].bytes_sent = sent
    return SimpleNamespace(topo=topo, queues=queues)


def record(flow_id, size, fct, baseline=8_000, **kwargs):
    return FlowRecord(flow_id, size, 1_000, 1_000 + fct, baseline, **kwargs)


class BaselineTest(SimpleTestCase):
    def setUp(self):
        self.topo = build_preset("paper-symmetric")
        self.params = TransportParams(
            bdp_bytes=self.topo.bdp_bytes(), base_rtt_ns=self.topo.base_rtt()
        )
        self.oracle = BaselineOracle(self.topo, self.params)

    def test_matches_pipeline_formula(self):
        sizes = [
            1_000,
            1_500,
            4_000,
            10_000,
            64_000,
            100_000,
            250_000,
            1_000_000,
            4_000_000,
            10_000_000,
        ]
        serialization = self.topo.host_uplink[0].serialization_ns(self.params.mtu)
        for size in sizes:
            with self.subTest(size=size):
                expected = pipeline_fct(self.topo, self.params, size, 0, 127)
                error = abs(self.oracle.fct(size, 0, 127) - expected)
                self.assertLessEqual(error, serialization)

    def test_single_packet_is_one_rtt(self):
        rtt = self.topo.unloaded_rtt(0, 127, 0, 1_000, 64)
        self.assertEqual(self.oracle.fct(1_000, 0, 127), rtt)

    def test_hundred_kb_scale(self):
        fct = self.oracle.fct(100_000, 0, 127)
        self.assertGreater(fct, 16_000)
        self.assertLess(fct, 18_000)

    def test_memoized_per_pair_class(self):
        first = self.oracle.fct(50_000, 0, 127)
        again = self.oracle.fct(50_000, 3, 64)
        self.assertEqual(first, again)
        self.assertEqual(self.oracle.simulations, 1)
        self.oracle.fct(50_000, 0, 1)
        self.assertEqual(self.oracle.simulations, 2)

    def test_testbed_baseline_uses_fast_path(self):
        topo = build_asymmetric_testbed()
        params = TransportParams(
            bdp_bytes=topo.bdp_bytes(), base_rtt_ns=topo.base_rtt()
        )
        oracle = BaselineOracle(topo, params)
        self.assertEqual(oracle.fct(1_000, 0, 4), topo.unloaded_rtt(0, 4, 0, 1_000, 64))


class SlowdownTest(SimpleTestCase):
    def test_slowdown_definition(self):
        self.assertEqual(record(1, 100, 16_000).slowdown, 2.0)

    def test_invalid_records(self):
        with self.assertRaises(SimulationError):
            FlowRecord(1, 100, 5_000, 4_000, 8_000)
        with self.assertRaises(SimulationError):
            FlowRecord(1, 100, 0, 4_000, 0)
        with self.assertRaises(SimulationError):
            FlowRecord.from_flow(Flow(1, 0, 2, 100, 0), 8_000)

    def test_nearest_rank(self):
        values = list(range(1, 101))
        self.assertEqual(nearest_rank(values, 95), 95)
        self.assertEqual(nearest_rank(values, 99), 99)
        self.assertEqual(nearest_rank(values, 50), 50)
        self.assertEqual(nearest_rank([7.0], 99), 7.0)

    def test_datacenter_bins(self):
        edges = (2_000, 49_000, 1_000_000)
        self.assertEqual(
            bin_labels(edges), ["0-2000", "2000-49000", "49000-1000000", ">1000000"]
        )
        self.assertEqual(bin_index(2_000, edges), 0)
        self.assertEqual(bin_index(2_001, edges), 1)
        self.assertEqual(bin_index(50_000, edges), 2)
        self.assertEqual(bin_index(5_000_000, edges), 3)

    def test_empty_bin_absent(self):
        edges = (2_000, 49_000)
        records = [record(1, 1_000, 8_000), record(2, 100_000, 24_000)]
        stats = compute_slowdown_stats(records, edges)
        self.assertIn("0-2000", stats)
        self.assertNotIn("2000-49000", stats)
        self.assertEqual(stats[">49000"]["avg"], 3.0)
        self.assertEqual(stats["all"]["count"], 2)

    def test_percentile_order(self):
        records = [
            record(i, 1_000, 8_000 + 37 * (i * 7919 % 1000)) for i in range(1_000)
        ]
        summary = compute_slowdown_stats(records, (2_000,))["0-2000"]
        self.assertGreaterEqual(summary["p99"], summary["p95"])
        self.assertGreaterEqual(summary["p95"], summary["p50"])

    def test_no_records(self):
        self.assertEqual(compute_slowdown_stats([], (2_000,)), {})


class UtilizationTest(SimpleTestCase):
    def setUp(self):
        self.topo = build_leaf_spine(4, 2, 2)

    def test_idle_links(self):
        report = link_utilization_report(fake_network(self.topo), 1_000_000)
        self.assertTrue(all(link["utilization"] == 0 for link in report["links"]))

    def test_saturated_link(self):
        link = self.topo.leaf_uplinks[0][1]
        window = 1_000_000
        full = link.bandwidth * window // (8 * 10**9)
        network = fake_network(self.topo, {link.link_id: full})
        report = link_utilization_report(network, window)
        utilization = report["links"][link.link_id]["utilization"]
        self.assertAlmostEqual(utilization, 1.0, delta=0.01)

    def test_classes_cover_fabric_links(self):
        topo = build_asymmetric_testbed()
        slow = topo.leaf_uplinks[0][5]
        network = fake_network(topo, {slow.link_id: 125_000})
        report = link_utilization_report(network, 1_000_000)
        self.assertEqual(set(report["classes"]), {"1G", "10G"})
        self.assertGreater(report["classes"]["1G"]["utilization"], 0)
        self.assertEqual(report["classes"]["10G"]["utilization"], 0)

    def test_window_must_be_positive(self):
        with self.assertRaises(ConfigurationError):
            link_utilization_report(fake_network(self.topo), 0)

    def test_spine_spread(self):
        a, b = self.topo.leaf_uplinks[0]
        network = fake_network(self.topo, {a.link_id: 3_000, b.link_id: 1_000})
        shares = spine_byte_shares(network)
        self.assertEqual(shares["bytes"], [3_000, 1_000])
        self.assertEqual(shares["spread"], 3.0)
        self.assertEqual(shares["idle_spines"], 0)
        empty = spine_byte_shares(fake_network(self.topo))
        self.assertIsNone(empty["spread"])
        self.assertEqual(empty["idle_spines"], 0)

    def test_idle_spine_makes_spread_unbounded(self):
        a, _ = self.topo.leaf_uplinks[0]
        shares = spine_byte_shares(fake_network(self.topo, {a.link_id: 5_000}))
        self.assertEqual(shares["idle_spines"], 1)
        self.assertIsNone(shares["spread"])
        self.assertEqual(spread_value(shares), math.inf)

    def test_round_durations(self):
        flows = [
            Flow(0, 0, 2, 10, 0, round_index=0, end_ns=500),
            Flow(1, 1, 3, 10, 0, round_index=0, end_ns=800),
            Flow(2, 2, 0, 10, 800, round_index=1, end_ns=1_100),
        ]
        rounds = round_durations(flows)
        self.assertEqual(rounds["durations_ns"], [800, 300])
        self.assertEqual(rounds["total_ns"], 1_100)


def sample_report(seed=1, fct=16_000):
    return build_report(
        config={"scheme": {"name": "hopper"}},
        seed=seed,
        records=[record(1, 1_000, fct)],
        edges=(2_000,),
        network=fake_network(build_leaf_spine(4, 2, 2)),
        counters={"flows_completed": 1},
        window_ns=10_000,
        trace_digest="0" * 64,
    )


class ReportTest(SimpleTestCase):
    def test_serialization_is_stable(self):
        self.assertEqual(dumps_report(sample_report()), dumps_report(sample_report()))
        keys = list(json.loads(dumps_report(sample_report())))
        self.assertEqual(keys[:3], ["version", "seed", "config"])

    def test_aggregate(self):
        merged = aggregate_reports([sample_report(1, 8_000), sample_report(2, 24_000)])
        avg = merged["slowdown"]["0-2000"]["avg"]
        self.assertEqual(merged["seeds"], [1, 2])
        self.assertAlmostEqual(avg["mean"], 2.0)
        self.assertAlmostEqual(avg["stddev"], math.sqrt(2))
        self.assertEqual(merged["counters"]["flows_completed"]["mean"], 1.0)

    def test_aggregate_keeps_seed_with_idle_spine(self):
        topo = build_leaf_spine(4, 2, 2)
        a, b = topo.leaf_uplinks[0]
        even, skewed = sample_report(1), sample_report(2)
        even["spine_bytes"] = spine_byte_shares(
            fake_network(topo, {a.link_id: 3_000, b.link_id: 1_000})
        )
        skewed["spine_bytes"] = spine_byte_shares(
            fake_network(topo, {a.link_id: 3_000})
        )
        spread = aggregate_reports([even, skewed])["spine_spread"]
        self.assertEqual(spread["n"], 2)
        self.assertEqual(spread["mean"], math.inf)
        self.assertIsNone(spread["stddev"])

    def test_aggregate_needs_reports(self):
        with self.assertRaises(ConfigurationError):
            aggregate_reports([])

    def test_flow_csv(self):
        with tempfile.TemporaryDirectory() as tmp:
            records = [record(2, 500, 8_000), record(1, 1_000, 16_000)]
            path = write_flow_csv(records, Path(tmp) / "f.csv")
            lines = path.read_text().splitlines()
        self.assertEqual(
            lines[0], "flow_id,size,start_ns,end_ns,baseline_ns,slowdown,switches,retx"
        )
        self.assertEqual(lines[1], "1,1000,1000,17000,8000,2.000000,0,0")


class ArchiveTest(TestCase):
    def test_persist_run(self):
        report = sample_report()
        records = [record(1, 1_000, 16_000, switches=2), record(2, 5_000, 8_000)]
        run = persist_run("unit", "hopper", report, records, flows_started=3)
        self.assertEqual(SimulationRun.objects.count(), 1)
        self.assertEqual(run.flows.count(), 2)
        self.assertEqual(FlowResult.objects.get(flow_id=1).switches, 2)
        self.assertEqual(run.overall_slowdown(), 2.0)
        self.assertEqual(len(run.report_digest), 64)
