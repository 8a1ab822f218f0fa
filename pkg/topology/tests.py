from django.test import SimpleTestCase

from engine.exceptions import ConfigurationError

from .config import GBPS, PORT_SPACE
from .fabric import (
    LinkTemplate,
    build_asymmetric_testbed,
    build_leaf_spine,
    build_preset,
)
from .profiling import PathProfile, path_for_port, profile_source_ports


class LeafSpineTest(SimpleTestCase):
    def test_symmetric_fabric_base_rtt(self):
        topo = build_leaf_spine(128, 8, 8)
        self.assertEqual(topo.base_rtt(), 8_000)
        self.assertEqual(topo.bdp_bytes(), 100_000)
        self.assertEqual(len(topo.links), 2 * 128 + 2 * 8 * 8)

    def test_small_fabric_has_two_paths(self):
        topo = build_leaf_spine(4, 2, 2)
        self.assertEqual(topo.path_count(0, 2), 2)
        self.assertEqual(topo.path_count(0, 1), 1)
        self.assertEqual(topo.path_count(1, 1), 0)

    def test_acceptance_fabric_paths_are_distinct(self):
        topo = build_leaf_spine(32, 4, 4)
        routes = {topo.path_links(0, 31, p) for p in range(topo.path_count(0, 31))}
        self.assertEqual(len(routes), 4)
        for route in routes:
            nodes = [route[0].src] + [link.dst for link in route]
            self.assertEqual(len(nodes), len(set(nodes)))
            for a, b in zip(route, route[1:]):
                self.assertEqual(a.dst, b.src)

    def test_indivisible_hosts_rejected(self):
        with self.assertRaises(ConfigurationError):
            build_leaf_spine(10, 4, 2)

    def test_symmetric_paths_share_unloaded_rtt(self):
        topo = build_leaf_spine(32, 4, 4)
        rtts = {topo.unloaded_rtt(0, 20, p, 1_000, 64) for p in range(4)}
        self.assertEqual(len(rtts), 1)

    def test_bad_link_rejected(self):
        with self.assertRaises(ConfigurationError):
            build_leaf_spine(
                4, 2, 2, link=LinkTemplate(ecn_kmin=500_000, ecn_kmax=100_000)
            )
        with self.assertRaises(ConfigurationError):
            build_leaf_spine(4, 2, 2, link=LinkTemplate(latency_ns=0))

    def test_two_path_preset_has_a_slow_detour(self):
        topo = build_preset("two-path")
        self.assertEqual(topo.base_rtt(), 8_000)
        slow = 2 * sum(l.latency_ns for l in topo.path_links(0, 2, 0))
        self.assertEqual(slow, 20_000)
        self.assertEqual(topo.best_path(0, 2, 1_000, 64), 1)

    def test_unknown_preset(self):
        with self.assertRaises(ConfigurationError):
            build_preset("fat-tree")


class TestbedTest(SimpleTestCase):
    def setUp(self):
        self.topo = build_asymmetric_testbed()

    def test_shape(self):
        self.assertEqual(len(self.topo.hosts), 8)
        self.assertEqual(len(self.topo.leaves), 2)
        self.assertEqual(len(self.topo.spines), 6)
        self.assertEqual(self.topo.host_bandwidth(), 25 * GBPS)
        classes = sorted(link.link_class for link in self.topo.leaf_uplinks[0])
        self.assertEqual(classes, ["10G", "10G", "10G", "10G", "1G", "1G"])

    def test_fast_path_beats_slow_path_for_probe(self):
        fast = self.topo.unloaded_rtt(0, 4, 0, 10_000, 64)
        slow = self.topo.unloaded_rtt(0, 4, 5, 10_000, 64)
        self.assertLess(fast, slow)

    def test_every_path_reachable_by_some_port(self):
        entry = profile_source_ports(self.topo, 0, 4, 6)
        self.assertEqual(sorted(entry.port_to_path.values()), list(range(6)))


class ProfilingTest(SimpleTestCase):
    def test_eight_distinct_paths(self):
        topo = build_leaf_spine(128, 8, 8)
        entry = profile_source_ports(topo, 0, 127, 8)
        self.assertEqual(len(entry), 8)
        self.assertEqual(len(set(entry.port_to_path.values())), 8)
        for port in entry.ports:
            self.assertEqual(path_for_port(topo, 0, 127, port), entry.path_of(port))

    def test_first_port_per_path(self):
        topo = build_leaf_spine(4, 2, 2)
        entry = profile_source_ports(topo, 0, 2, 2)
        for port in entry.ports:
            path = entry.path_of(port)
            earlier = [p for p in range(port) if path_for_port(topo, 0, 2, p) == path]
            self.assertEqual(earlier, [])

    def test_same_leaf_single_path(self):
        topo = build_leaf_spine(4, 2, 2)
        entry = profile_source_ports(topo, 0, 1, 1)
        self.assertEqual(entry.ports, (0,))
        self.assertEqual(path_for_port(topo, 0, 1, PORT_SPACE - 1), 0)

    def test_zero_paths(self):
        topo = build_leaf_spine(4, 2, 2)
        self.assertEqual(len(profile_source_ports(topo, 0, 2, 0)), 0)

    def test_too_many_paths_names_achievable_count(self):
        topo = build_leaf_spine(4, 2, 2)
        with self.assertRaisesMessage(ConfigurationError, "only 2 are reachable"):
            profile_source_ports(topo, 0, 2, 3)

    def test_profile_cache_and_rows(self):
        topo = build_leaf_spine(4, 2, 2)
        profile = PathProfile(topo)
        self.assertIs(profile.entry(0, 2), profile.entry(0, 2))
        rows = profile.as_rows(0, 2)
        self.assertEqual(len(rows), 2)
        self.assertTrue(rows[0]["links"].startswith("h0->leaf0"))
