from collections import Counter

from django.test import SimpleTestCase

from engine.exceptions import SimulationError
from engine.kernel import Simulator
from topology.config import GBPS, ROCE_DST_PORT
from topology.fabric import LinkTemplate, build_leaf_spine
from topology.profiling import PathProfile
from transport.packets import Packet, PacketKind

from .config import ACK_ROUTING_SYMMETRIC
from .hashing import ecmp_bucket
from .network import OutputQueue, SwitchNetwork, ecn_probability


class Sink:
    def __init__(self, sim):
        self.sim = sim
        self.arrivals = []

    def receive(self, pkt):
        self.arrivals.append((self.sim.now, pkt))


def data_packet(src, dst, port, size=1_000, seq=0):
    return Packet(
        1,
        0,
        seq,
        size,
        src,
        dst,
        port,
        ROCE_DST_PORT,
        PacketKind.DATA,
        ecn_capable=True,
    )


def wire(topo, seed=1, **kwargs):
    sim = Simulator(seed)
    network = SwitchNetwork(sim, topo, sim.fork_rng("ecn"), **kwargs)
    sinks = {}
    for host in topo.hosts:
        sinks[host] = Sink(sim)
        network.attach(host, sinks[host])
    return sim, network, sinks


class EcmpTest(SimpleTestCase):
    def test_same_tuple_same_uplink(self):
        picks = {ecmp_bucket(8, 1, 2, 5_000, ROCE_DST_PORT) for _ in range(10_000)}
        self.assertEqual(len(picks), 1)

    def test_port_sweep_is_balanced(self):
        census = Counter(
            ecmp_bucket(8, 0x0A000000, 0x0A070001, port, ROCE_DST_PORT)
            for port in range(4096)
        )
        self.assertEqual(set(census), set(range(8)))
        self.assertLess(max(census.values()) / min(census.values()), 1.3)

    def test_forwarding_follows_profile(self):
        topo = build_leaf_spine(32, 4, 4)
        sim, network, sinks = wire(topo)
        entry = PathProfile(topo).entry(0, 31)
        for port in entry.ports:
            network.send(data_packet(0, 31, port))
        sim.run()
        seen = {pkt.src_port: pkt.uplink for _, pkt in sinks[31].arrivals}
        self.assertEqual(seen, dict(entry.port_to_path))


class QueueTest(SimpleTestCase):
    def setUp(self):
        self.link = build_leaf_spine(4, 2, 2).links[0]
        self.sim = Simulator(3)
        self.rng = self.sim.fork_rng("ecn")

    def test_marking_curve(self):
        self.assertEqual(ecn_probability(0, 100_000, 400_000, 0.05), 0.0)
        self.assertEqual(ecn_probability(400_000, 100_000, 400_000, 0.05), 1.0)
        self.assertAlmostEqual(ecn_probability(250_000, 100_000, 400_000, 0.05), 0.025)

    def test_empty_queue_never_marks(self):
        q = OutputQueue(self.link)
        for seq in range(500):
            q.occupancy = 0
            q.fifo.clear()
            accepted = q.enqueue(data_packet(0, 2, 1, seq=seq), 0, self.rng)
            self.assertEqual(accepted, (True, False))

    def test_full_marking_above_kmax(self):
        q = OutputQueue(self.link)
        q.occupancy = self.link.ecn_kmax
        self.assertEqual(q.enqueue(data_packet(0, 2, 1), 0, self.rng), (True, True))

    def test_midpoint_mark_rate(self):
        q = OutputQueue(self.link)
        mid = (self.link.ecn_kmin + self.link.ecn_kmax) // 2
        marked = 0
        trials = 100_000
        for _ in range(trials):
            q.occupancy = mid
            q.fifo.clear()
            marked += q.enqueue(data_packet(0, 2, 1), 0, self.rng)[1]
        self.assertAlmostEqual(marked / trials, 0.025, delta=0.005)

    def test_drop_tail(self):
        q = OutputQueue(self.link)
        q.occupancy = self.link.queue_capacity - 500
        self.assertEqual(q.enqueue(data_packet(0, 2, 1), 0, self.rng), (False, False))
        self.assertEqual(q.drops, 1)
        self.assertEqual(len(q), 0)


class DrainTest(SimpleTestCase):
    def test_serialization_times(self):
        self.assertEqual(LinkTemplate().bandwidth, 100 * GBPS)
        topo = build_leaf_spine(4, 2, 2)
        self.assertEqual(topo.links[0].serialization_ns(1_500), 120)
        slow = build_leaf_spine(4, 2, 2, link=LinkTemplate(bandwidth=GBPS))
        self.assertEqual(slow.links[0].serialization_ns(1_500), 12_000)

    def test_back_to_back_packets(self):
        topo = build_leaf_spine(4, 2, 2)
        sim, network, sinks = wire(topo)
        network.send(data_packet(0, 1, 7, seq=0))
        network.send(data_packet(0, 1, 7, seq=1))
        sim.run()
        (t0, p0), (t1, p1) = sinks[1].arrivals
        self.assertEqual((p0.seq, p1.seq), (0, 1))
        self.assertEqual(t0, 2 * (80 + 1_000))
        self.assertEqual(t1 - t0, 80)
        network.check_conservation()
        self.assertEqual(network.delivered, 2)

    def test_data_bytes_ledger(self):
        template = LinkTemplate(queue_capacity=2_050, ecn_kmin=2_000, ecn_kmax=2_050)
        topo = build_leaf_spine(4, 2, 2, link=template)
        sim, network, sinks = wire(topo)
        for seq in range(3):
            network.send(data_packet(0, 1, 7, seq=seq))
        network.send(Packet(1, 0, 0, 64, 0, 1, 7, ROCE_DST_PORT, PacketKind.ACK))
        network.send(data_packet(0, 1, 7, seq=3))
        self.assertEqual(network.dropped, 2)
        self.assertEqual(network.data_bytes_dropped, 1_000)
        self.assertEqual(network.data_bytes_in_network(), 3_000)
        sim.run()
        self.assertEqual(network.data_bytes_in_network(), 0)
        self.assertEqual(network.data_bytes_delivered(), 3_000)
        downlink = topo.host_downlink[1]
        self.assertEqual(network.queues[downlink.link_id].data_bytes_delivered, 3_000)
        network.check_conservation()

    def test_symmetric_ack_retraces_spine(self):
        topo = build_leaf_spine(4, 2, 2)
        sim, network, sinks = wire(topo, ack_routing=ACK_ROUTING_SYMMETRIC)
        self.assertTrue(network.symmetric_acks)
        ack = Packet(1, 0, 0, 64, 2, 0, ROCE_DST_PORT, 11, PacketKind.ACK)
        ack.pinned_uplink = 1
        network.send(ack)
        sim.run()
        self.assertEqual(sinks[0].arrivals[0][1].uplink, 1)

    def test_unattached_host_is_fatal(self):
        topo = build_leaf_spine(4, 2, 2)
        sim = Simulator(1)
        network = SwitchNetwork(sim, topo, sim.fork_rng("ecn"))
        network.send(data_packet(0, 1, 7))
        with self.assertRaises(SimulationError):
            sim.run()
