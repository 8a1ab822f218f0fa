import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from engine.exceptions import ConfigurationError
from engine.rng import RngStream
from topology.fabric import build_asymmetric_testbed, build_leaf_spine

from .cdf import SizeCdf, load_cdf, read_cdf, sample_flow_size
from .config import COLLECTIVE_PRESETS, MODE_COLLECTIVE, MODE_EXPLICIT
from .generators import (
    WorkloadSpec,
    arrival_rate,
    build_schedule,
    collective_pairs,
    generate_collective_rounds,
    generate_poisson_arrivals,
)


class SizeCdfTest(SimpleTestCase):
    def test_degenerate_cdf(self):
        cdf = SizeCdf("one", [(1_000_000, 1.0)])
        rng = RngStream(1, "workload")
        draws = {sample_flow_size(cdf, rng) for _ in range(1_000)}
        self.assertEqual(draws, {1_000_000})
        self.assertEqual(cdf.mean(), 1_000_000)

    def test_two_point_split(self):
        cdf = SizeCdf("two", [(1_000, 0.5), (1_000_000, 1.0)])
        rng = RngStream(2, "workload")
        draws = [sample_flow_size(cdf, rng) for _ in range(100_000)]
        self.assertAlmostEqual(draws.count(1_000) / len(draws), 0.5, delta=0.02)

    def test_sample_mean_matches_analytic_mean(self):
        cdf = load_cdf("ml-train")
        rng = RngStream(3, "workload")
        # Vectorised draw through the same inverse-CDF rule.
        u = np.array([rng.random() for _ in range(1_000_000)])
        sizes = cdf.sizes[np.searchsorted(cdf.probs, u, side="left")]
        self.assertAlmostEqual(sizes.mean() / cdf.mean(), 1.0, delta=0.01)

    def test_rejects_unordered_points(self):
        with self.assertRaises(ConfigurationError):
            SizeCdf("bad", [(1_000, 0.5), (500, 1.0)])
        with self.assertRaises(ConfigurationError):
            SizeCdf("bad", [(1_000, 0.5), (2_000, 0.5), (3_000, 1.0)])

    def test_rejects_short_tail(self):
        with self.assertRaisesMessage(ConfigurationError, "must end at 1.0"):
            SizeCdf("bad", [(1_000, 0.5), (2_000, 0.9)])

    def test_shipped_distributions(self):
        hadoop = load_cdf("hadoop")
        self.assertEqual(hadoop.sizes[-1], 20_000_000)
        above = 1 - hadoop.probs[hadoop.sizes <= 266_000][-1]
        self.assertLess(above, 0.05 + 1e-9)
        ml = load_cdf("ml-train")
        self.assertEqual((ml.sizes[0], ml.sizes[-1]), (1_000_000, 128_000_000))
        self.assertGreater(len(load_cdf("alicloud")), 2)

    def test_csv_round_trip(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "custom.csv"
            path.write_text("size_bytes,cum_prob\n100,0.25\n4000,1.0\n")
            cdf = read_cdf(path)
        self.assertEqual(cdf.name, "custom")
        self.assertEqual(cdf.points, [(100, 0.25), (4000, 1.0)])

    def test_unknown_name(self):
        with self.assertRaisesMessage(ConfigurationError, "websearch"):
            load_cdf("websearch")

    def test_scaling_keeps_shape(self):
        cdf = load_cdf("ml-train").scaled(1 / 16)
        self.assertEqual(cdf.sizes[-1], 8_000_000)
        self.assertAlmostEqual(cdf.probs[0], 0.15)


class PoissonTest(SimpleTestCase):
    def setUp(self):
        self.topo = build_leaf_spine(32, 4, 4)

    def test_arrival_rate(self):
        spec = WorkloadSpec(cdf=SizeCdf("fixed", [(1_000_000, 1.0)]), target_load=0.5)
        self.assertAlmostEqual(arrival_rate(spec, self.topo), 200_000)

    def test_load_out_of_range(self):
        cdf = SizeCdf("fixed", [(1_000, 1.0)])
        for load in (0, 1, 1.2, -0.1):
            with self.assertRaises(ConfigurationError):
                WorkloadSpec(cdf=cdf, target_load=load)

    def test_tiny_load_gives_empty_schedule(self):
        spec = WorkloadSpec(
            cdf=SizeCdf("fixed", [(1_000_000, 1.0)]),
            target_load=1e-9,
            duration_ns=1_000_000,
        )
        schedule = generate_poisson_arrivals(spec, self.topo, RngStream(1, "workload"))
        self.assertEqual(len(schedule), 0)

    def test_offered_load_tracks_target(self):
        topo = build_leaf_spine(4, 2, 2)
        cdf = SizeCdf("small", [(1_000, 0.5), (10_000, 1.0)])
        spec = WorkloadSpec(cdf=cdf, target_load=0.5, duration_ns=20_000_000)
        schedule = generate_poisson_arrivals(spec, topo, RngStream(4, "workload"))
        capacity_bytes = (
            len(topo.hosts) * topo.host_bandwidth() / 8 * spec.duration_ns / 1e9
        )
        self.assertAlmostEqual(schedule.total_bytes / capacity_bytes, 0.5, delta=0.025)

    def test_pairs_distinct_and_ordered(self):
        spec = WorkloadSpec(
            cdf=load_cdf("alicloud"), target_load=0.5, duration_ns=200_000
        )
        schedule = generate_poisson_arrivals(spec, self.topo, RngStream(5, "workload"))
        self.assertGreater(len(schedule), 0)
        starts = [f.start_ns for f in schedule.flows]
        self.assertEqual(starts, sorted(starts))
        self.assertTrue(all(f.src != f.dst for f in schedule.flows))
        ids = [f.flow_id for f in schedule.flows]
        self.assertEqual(ids, list(range(len(schedule))))

    def test_cross_leaf_only(self):
        spec = WorkloadSpec(
            cdf=load_cdf("alicloud"),
            target_load=0.5,
            duration_ns=200_000,
            cross_leaf_only=True,
        )
        schedule = generate_poisson_arrivals(spec, self.topo, RngStream(6, "workload"))
        self.assertFalse(any(self.topo.same_leaf(f.src, f.dst) for f in schedule.flows))

    def test_reproducible(self):
        spec = WorkloadSpec(
            cdf=load_cdf("hadoop"), target_load=0.8, duration_ns=500_000
        )
        first = generate_poisson_arrivals(spec, self.topo, RngStream(7, "workload"))
        second = generate_poisson_arrivals(spec, self.topo, RngStream(7, "workload"))
        self.assertEqual(first.flows, second.flows)


class CollectiveTest(SimpleTestCase):
    def test_gpt3_preset_emits_204_flows(self):
        preset = COLLECTIVE_PRESETS["gpt3-collective"]
        spec = WorkloadSpec(mode=MODE_COLLECTIVE, **preset)
        schedule = generate_collective_rounds(spec, build_asymmetric_testbed())
        self.assertEqual(len(schedule), 204)
        self.assertEqual(len(schedule.rounds), 51)
        self.assertTrue(all(f.chunk_bytes == 1_000_000 for f in schedule.flows))

    def test_pairs_cross_first_and_last_leaf(self):
        topo = build_asymmetric_testbed()
        self.assertEqual(collective_pairs(topo), [(0, 4), (1, 5), (2, 6), (3, 7)])
        spec = WorkloadSpec(
            mode=MODE_COLLECTIVE, rounds=2, flows_per_round=4, flow_size=10_000
        )
        first, second = generate_collective_rounds(spec, topo).rounds
        self.assertEqual({f.src for f in first}, {0, 1, 2, 3})
        self.assertEqual({f.src for f in second}, {4, 5, 6, 7})
        self.assertEqual({f.round_index for f in second}, {1})

    def test_single_round_single_flow(self):
        spec = WorkloadSpec(
            mode=MODE_COLLECTIVE, rounds=1, flows_per_round=1, flow_size=5_000
        )
        schedule = generate_collective_rounds(spec, build_leaf_spine(4, 2, 2))
        self.assertEqual(len(schedule.rounds), 1)
        self.assertEqual(len(schedule), 1)

    def test_round_sizes_cycle(self):
        spec = WorkloadSpec(
            mode=MODE_COLLECTIVE,
            rounds=5,
            flows_per_round=1,
            flow_size=1_000,
            round_sizes=(2_000, 3_000),
        )
        schedule = generate_collective_rounds(spec, build_leaf_spine(4, 2, 2))
        sizes = [f.size for f in schedule.flows]
        self.assertEqual(sizes, [2_000, 3_000, 2_000, 3_000, 2_000])

    def test_empty_collective_rejected(self):
        with self.assertRaises(ConfigurationError):
            WorkloadSpec(
                mode=MODE_COLLECTIVE, rounds=0, flows_per_round=4, flow_size=1_000
            )
        with self.assertRaises(ConfigurationError):
            WorkloadSpec(
                mode=MODE_COLLECTIVE, rounds=3, flows_per_round=0, flow_size=1_000
            )

    def test_chunk_larger_than_flow_rejected(self):
        with self.assertRaisesMessage(ConfigurationError, "exceeds flow size"):
            WorkloadSpec(
                mode=MODE_COLLECTIVE,
                rounds=1,
                flows_per_round=1,
                flow_size=1_000_000,
                chunk_bytes=10_000_000,
            )


class ExplicitTest(SimpleTestCase):
    def test_sorted_by_start(self):
        spec = WorkloadSpec(
            mode=MODE_EXPLICIT,
            flows=[
                {"src": 0, "dst": 2, "size": 5_000, "start_ns": 900},
                {"src": 1, "dst": 3, "size": 5_000, "start_ns": 100, "initial_path": 1},
            ],
        )
        topo = build_leaf_spine(4, 2, 2)
        schedule = build_schedule(spec, topo, RngStream(1, "workload"))
        self.assertEqual([f.start_ns for f in schedule.flows], [100, 900])
        self.assertEqual(schedule.flows[0].initial_path, 1)
        flow = schedule.flows[0].to_flow()
        self.assertEqual((flow.src, flow.dst, flow.size), (1, 3, 5_000))

    def test_bad_pair(self):
        spec = WorkloadSpec(
            mode=MODE_EXPLICIT, flows=[{"src": 0, "dst": 0, "size": 10}]
        )
        with self.assertRaises(ConfigurationError):
            build_schedule(spec, build_leaf_spine(4, 2, 2), RngStream(1, "workload"))

    def test_empty_list(self):
        with self.assertRaises(ConfigurationError):
            WorkloadSpec(mode=MODE_EXPLICIT)
