from collections import Counter

from django.test import SimpleTestCase

from engine.exceptions import ConfigurationError
from engine.rng import RngStream
from topology.fabric import build_asymmetric_testbed, build_leaf_spine
from topology.profiling import PathProfile

from .balancers import check_scheme
from .hopper import (
    HopperState,
    ProbeRecord,
    compute_switch_delay,
    eligible_probe_ports,
    estimate_inflight_rtt,
    flowbender_on_congestion,
    on_epoch_boundary,
    probe_paths,
    rps_assign,
    select_and_switch,
    update_rtt_estimate,
)
from .params import HopperParams

PARAMS = HopperParams.from_base_rtt(8_000)


def eight_path_entry():
    return PathProfile(build_leaf_spine(128, 8, 8)).entry(0, 127)


def least_squares_prediction(samples, inflight):
    n = len(samples)
    mean_x = sum(x for x, _ in samples) / n
    mean_y = sum(y for _, y in samples) / n
    sxx = sum((x - mean_x) ** 2 for x, _ in samples)
    sxy = sum((x - mean_x) * (y - mean_y) for x, y in samples)
    slope = sxy / sxx
    if slope < 0:
        return samples[-1][1]
    intercept = mean_y - slope * mean_x
    return intercept + slope * (samples[-1][0] + inflight)


class HopperParamsTest(SimpleTestCase):
    def test_defaults_scale_with_base_rtt(self):
        self.assertEqual(PARAMS.th_probe, 12_000)
        self.assertEqual(PARAMS.th_cong, 20_000)
        self.assertEqual(PARAMS.ttl_probe, 32_000)
        self.assertEqual(PARAMS.delta_rtt, 0.8)
        self.assertEqual(PARAMS.alpha, 1.0)

    def test_threshold_order_enforced(self):
        with self.assertRaisesMessage(ConfigurationError, "must be below th_cong"):
            HopperParams.from_base_rtt(8_000, th_probe=2.5, th_cong=2.5)

    def test_ranges_enforced(self):
        with self.assertRaises(ConfigurationError):
            HopperParams.from_base_rtt(8_000, alpha=0)
        with self.assertRaises(ConfigurationError):
            HopperParams.from_base_rtt(8_000, delta_rtt=1.5)
        with self.assertRaises(ConfigurationError):
            HopperParams.from_base_rtt(8_000, ttl_probe=0)

    def test_unknown_scheme(self):
        self.assertEqual(check_scheme("hopper"), "hopper")
        with self.assertRaises(ConfigurationError):
            check_scheme("conga")


class EstimatorTest(SimpleTestCase):
    def test_ewma(self):
        s = HopperState(avg_rtt=3_000.0)
        self.assertEqual(update_rtt_estimate(s, 11_000, 1.0), 11_000)
        s = HopperState(avg_rtt=10_000.0)
        self.assertEqual(update_rtt_estimate(s, 20_000, 0.5), 15_000)
        s = HopperState(avg_rtt=8_000.0)
        self.assertEqual(update_rtt_estimate(s, 8_000, 0.5), 8_000)
        self.assertEqual(s.samples, [(0, 8_000)])

    def test_first_sample_seeds_average(self):
        s = HopperState()
        self.assertEqual(update_rtt_estimate(s, 8_000, 0.5), 8_000)
        self.assertEqual(update_rtt_estimate(s, 12_000, 0.5), 10_000)

    def test_linear_extrapolation(self):
        samples = [(0, 10_000), (1, 12_000), (2, 14_000)]
        s = HopperState(samples=samples, inflight_count=3)
        self.assertAlmostEqual(estimate_inflight_rtt(s), 20_000, delta=1)

    def test_flat_series(self):
        s = HopperState(samples=[(i, 10_000) for i in range(6)], inflight_count=40)
        self.assertAlmostEqual(estimate_inflight_rtt(s), 10_000, delta=1)

    def test_single_sample_falls_back_to_average(self):
        s = HopperState(avg_rtt=9_000.0, samples=[(0, 15_000)], inflight_count=10)
        self.assertEqual(estimate_inflight_rtt(s), 9_000)

    def test_falling_series_clamps_to_last_sample(self):
        samples = [(0, 14_000), (1, 12_000), (2, 11_000)]
        s = HopperState(samples=samples, inflight_count=5)
        self.assertEqual(estimate_inflight_rtt(s), 11_000)

    def test_matches_brute_force_least_squares(self):
        rng = RngStream(2024, "estimator-oracle")
        for trial in range(1_000):
            n = 2 + rng.integers(40)
            shape = trial % 3
            base = 8_000 + rng.integers(20_000)
            step = 201 + rng.integers(500)
            samples = []
            for i in range(n):
                noise = rng.integers(200)
                if shape == 0:
                    rtt = base
                elif shape == 1:
                    rtt = base + step * i + noise
                else:
                    rtt = base + 500 * n - step * i + noise
                samples.append((i, rtt))
            inflight = rng.integers(100)
            s = HopperState(
                samples=list(samples),
                inflight_count=inflight,
                avg_rtt=float(samples[-1][1]),
            )
            expected = least_squares_prediction(samples, inflight)
            self.assertAlmostEqual(estimate_inflight_rtt(s), expected, delta=1)

    def test_switch_delay(self):
        self.assertEqual(compute_switch_delay(20_000, 10_000), 5_000)
        self.assertEqual(compute_switch_delay(10_000, 12_000), 0)
        self.assertEqual(compute_switch_delay(14_000, 8_000), 3_000)


class EpochTest(SimpleTestCase):
    def test_boundary_rearms_flags_and_purges(self):
        s = HopperState(probe_allowed=False, switch_allowed=False, avg_rtt=13_000.0)
        s.samples.append((0, 13_000))
        s.probe_records[5] = ProbeRecord(port=5, rtt=9_000, probed_at=0)
        s.probe_records[6] = ProbeRecord(port=6, rtt=9_000, probed_at=30_000)
        dropped = on_epoch_boundary(s, 40_000, PARAMS.ttl_probe)
        self.assertTrue(s.probe_allowed and s.switch_allowed)
        self.assertEqual(dropped, [5])
        self.assertEqual(set(s.probe_records), {6})
        self.assertEqual(s.samples, [])
        self.assertEqual(s.avg_rtt, 13_000)
        self.assertEqual(s.epoch_start, 40_000)

    def test_probe_record_rejects_nonpositive_rtt(self):
        with self.assertRaises(ConfigurationError):
            ProbeRecord(port=1, rtt=0, probed_at=0)


class ProbeTest(SimpleTestCase):
    def setUp(self):
        self.entry = eight_path_entry()
        self.rng = RngStream(1, "probe-selection")

    def state(self, avg):
        return HopperState(avg_rtt=float(avg), current_path=1)

    def test_two_distinct_alternatives(self):
        s = self.state(13_000)
        ports = probe_paths(s, self.entry, PARAMS, self.rng, 0)
        self.assertEqual(len(set(ports)), 2)
        self.assertNotIn(1, {self.entry.path_of(p) for p in ports})
        self.assertFalse(s.probe_allowed)

    def test_one_probe_round_per_epoch(self):
        s = self.state(13_000)
        rounds = [
            probe_paths(s, self.entry, PARAMS, self.rng, now)
            for now in range(0, 5_000, 500)
        ]
        self.assertEqual(sum(1 for r in rounds if r), 1)

    def test_below_threshold_never_probes(self):
        s = self.state(11_000)
        self.assertEqual(probe_paths(s, self.entry, PARAMS, self.rng, 0), [])
        self.assertTrue(s.probe_allowed)

    def test_recently_probed_paths_skipped(self):
        s = self.state(13_000)
        for port in self.entry.ports:
            if self.entry.path_of(port) != 1:
                record = ProbeRecord(port=port, rtt=15_000, probed_at=1_000)
                s.probe_records[port] = record
        self.assertEqual(probe_paths(s, self.entry, PARAMS, self.rng, 2_000), [])

    def test_ttl_dedup(self):
        s = self.state(13_000)
        picked = probe_paths(s, self.entry, PARAMS, self.rng, 0)
        for port in picked:
            s.pending_probes.pop(port)
            s.probe_records[port] = ProbeRecord(port=port, rtt=15_000, probed_at=0)
        ttl = PARAMS.ttl_probe
        eligible = eligible_probe_ports(s, self.entry, ttl, ttl)
        self.assertTrue(set(picked).isdisjoint(eligible))
        later = eligible_probe_ports(s, self.entry, ttl + 1, ttl)
        self.assertTrue(set(picked) <= set(later))
        self.assertEqual(len(later), 7)

    def test_pending_probes_count_as_explored(self):
        s = self.state(13_000)
        first = probe_paths(s, self.entry, PARAMS, self.rng, 0)
        eligible = eligible_probe_ports(s, self.entry, 100, PARAMS.ttl_probe)
        self.assertEqual(len(eligible), 5)
        self.assertTrue(set(first).isdisjoint(eligible))


class SwitchTest(SimpleTestCase):
    def state(self, avg, records):
        s = HopperState(avg_rtt=float(avg), current_path=1)
        for port, rtt in records:
            s.probe_records[port] = ProbeRecord(port=port, rtt=rtt, probed_at=0)
        return s

    def test_switches_past_margin(self):
        s = self.state(20_100, [(10, 10_000), (11, 18_000)])
        decision = select_and_switch(s, PARAMS, 1_000)
        self.assertEqual(decision.port, 10)
        self.assertLess(decision.probed_rtt, PARAMS.delta_rtt * s.avg_rtt)
        self.assertEqual(decision.delay, compute_switch_delay(20_100, 10_000))
        self.assertFalse(s.switch_allowed)

    def test_stays_within_margin(self):
        s = self.state(20_100, [(10, 17_000), (11, 18_000)])
        self.assertIsNone(select_and_switch(s, PARAMS, 1_000))
        self.assertFalse(s.switch_allowed)
        self.assertEqual(set(s.probe_records), {10, 11})

    def test_below_th_cong_not_evaluated(self):
        s = self.state(19_000, [(10, 10_000)])
        self.assertIsNone(select_and_switch(s, PARAMS, 1_000))
        self.assertTrue(s.switch_allowed)

    def test_no_records_waits(self):
        s = self.state(25_000, [])
        self.assertIsNone(select_and_switch(s, PARAMS, 1_000))
        self.assertFalse(s.switch_allowed)

    def test_expired_records_ignored(self):
        s = self.state(25_000, [(10, 10_000)])
        self.assertIsNone(select_and_switch(s, PARAMS, PARAMS.ttl_probe + 1))

    def test_delay_uses_inflight_estimate(self):
        s = self.state(20_100, [(10, 10_000)])
        s.samples = [(0, 10_000), (1, 12_000), (2, 14_000)]
        s.inflight_count = 3
        decision = select_and_switch(s, PARAMS, 1_000)
        self.assertEqual(decision.delay, 5_000)

    def test_delay_compensation_off(self):
        params = HopperParams.from_base_rtt(8_000, delay_compensation=False)
        s = self.state(20_100, [(10, 10_000)])
        s.samples = [(0, 10_000), (1, 12_000), (2, 14_000)]
        self.assertEqual(select_and_switch(s, params, 1_000).delay, 0)


class BaselinePolicyTest(SimpleTestCase):
    def test_flowbender_uniform_over_other_paths(self):
        entry = eight_path_entry()
        rng = RngStream(5, "flowbender-reroute")
        census = Counter()
        for _ in range(10_000):
            s = HopperState(avg_rtt=25_000.0, current_path=1)
            census[entry.path_of(flowbender_on_congestion(s, entry, PARAMS, rng))] += 1
        self.assertNotIn(1, census)
        self.assertEqual(len(census), 7)
        expected = 10_000 / 7
        chi2 = sum((n - expected) ** 2 / expected for n in census.values())
        self.assertLess(chi2, 22.46)

    def test_flowbender_once_per_epoch_and_gated(self):
        entry = eight_path_entry()
        rng = RngStream(5, "flowbender-reroute")
        s = HopperState(avg_rtt=25_000.0, current_path=1)
        self.assertIsNotNone(flowbender_on_congestion(s, entry, PARAMS, rng))
        self.assertIsNone(flowbender_on_congestion(s, entry, PARAMS, rng))
        quiet = HopperState(avg_rtt=15_000.0, current_path=1)
        self.assertIsNone(flowbender_on_congestion(quiet, entry, PARAMS, rng))

    def test_flowbender_single_path_noop(self):
        entry = PathProfile(build_leaf_spine(4, 2, 2)).entry(0, 1)
        s = HopperState(avg_rtt=25_000.0, current_path=0)
        self.assertIsNone(flowbender_on_congestion(s, entry, PARAMS, RngStream(1, "x")))

    def test_rps_spreads_evenly(self):
        entry = eight_path_entry()
        rng = RngStream(9, "rps")
        census = Counter(entry.path_of(rps_assign(entry, rng)) for _ in range(100_000))
        for count in census.values():
            self.assertAlmostEqual(count / 100_000, 0.125, delta=0.005)

    def test_rps_single_path(self):
        entry = PathProfile(build_leaf_spine(4, 2, 2)).entry(0, 1)
        rng = RngStream(9, "rps")
        self.assertEqual({rps_assign(entry, rng) for _ in range(100)}, {entry.ports[0]})

    def test_rps_loads_slow_testbed_paths(self):
        entry = PathProfile(build_asymmetric_testbed()).entry(0, 4)
        rng = RngStream(9, "rps")
        census = Counter(entry.path_of(rps_assign(entry, rng)) for _ in range(60_000))
        slow_share = (census[4] + census[5]) / 60_000
        self.assertAlmostEqual(slow_share, 2 / 6, delta=0.01)
