from django.test import SimpleTestCase

from engine.config import RNG_ECMP, RNG_ECN
from engine.exceptions import ConfigurationError
from engine.kernel import EventKind, Simulator
from loadbalancer.balancers import build_balancers
from loadbalancer.params import HopperParams
from switchnet.network import SwitchNetwork
from topology.config import ROCE_DST_PORT
from topology.fabric import build_leaf_spine
from topology.profiling import PathProfile

from .dcqcn import DcqcnParams, RateState
from .flowlog import FlowLog
from .host import Transport, TransportParams
from .packets import Flow, Packet, PacketKind, packet_sizes
from .receiver import ReceiverState


class LossyNetwork(SwitchNetwork):
    """Drops every packet for which `should_drop(q, pkt)` is true."""

    should_drop = None

    def enqueue_packet(self, q, pkt):
        if self.should_drop is not None and self.should_drop(q, pkt):
            self.dropped += 1
            q.drops += 1
            return False
        return super().enqueue_packet(q, pkt)


def build_stack(
    scheme="ecmp", seed=1, topo=None, network_class=SwitchNetwork, **overrides
):
    topo = topo or build_leaf_spine(4, 2, 2)
    sim = Simulator(seed)
    network = network_class(sim, topo, sim.fork_rng(RNG_ECN))
    params = TransportParams(
        bdp_bytes=topo.bdp_bytes(), base_rtt_ns=topo.base_rtt(), **overrides
    )
    hopper = HopperParams.from_base_rtt(topo.base_rtt())
    transport = Transport(
        sim,
        network,
        PathProfile(topo),
        params,
        build_balancers(hopper, sim),
        scheme,
        sim.fork_rng(RNG_ECMP),
        FlowLog(keep=True),
    )
    return sim, topo, network, transport


def sends(transport, flow_id=1, event="send"):
    records = transport.flow_log.events(flow_id, event)
    rows = []
    for t, _, _, detail in records:
        seq, port = detail.split()
        rows.append((t, int(seq[4:]), int(port[5:])))
    return rows


class ReceiverTest(SimpleTestCase):
    def setUp(self):
        self.rx = ReceiverState(1)
        self.rx.expected = 5

    def test_in_order(self):
        fb = self.rx.on_data(5)
        self.assertEqual((fb.kind, fb.cum), (PacketKind.ACK, 6))
        self.assertEqual(self.rx.expected, 6)

    def test_gap_within_threshold_is_buffered(self):
        fb = self.rx.on_data(20)
        self.assertEqual((fb.kind, fb.cum, fb.sack), (PacketKind.ACK, 5, 20))
        self.assertEqual(self.rx.buffer, {20})
        self.assertEqual(self.rx.ooo_buffered, 1)

    def test_gap_beyond_threshold_nacks(self):
        fb = self.rx.on_data(40)
        self.assertEqual((fb.kind, fb.cum, fb.sack), (PacketKind.NACK, 5, 40))
        self.assertEqual(self.rx.buffer, set())
        self.assertEqual(self.rx.nacks, 1)

    def test_threshold_edge(self):
        self.assertEqual(self.rx.on_data(35).kind, PacketKind.ACK)
        self.assertEqual(self.rx.on_data(36).kind, PacketKind.NACK)

    def test_gap_fill_drains_buffer_once(self):
        self.rx.on_data(6)
        self.rx.on_data(7)
        fb = self.rx.on_data(5)
        self.assertEqual((fb.cum, fb.delivered), (8, 3))
        self.assertEqual(self.rx.buffer, set())
        self.rx.on_data(6)
        self.assertEqual(self.rx.duplicates, 1)
        self.assertEqual(self.rx.delivered, 3)

    def test_recovered_packets_delivered_once(self):
        self.rx.on_data(40)
        for seq in range(5, 40):
            self.rx.on_data(seq)
        self.assertEqual(self.rx.expected, 41)
        self.assertEqual(self.rx.delivered, 36)
        self.assertEqual(self.rx.recovery, set())


class RateStateTest(SimpleTestCase):
    line = 100_000_000_000

    def test_ecn_cuts_rate(self):
        rate = RateState(self.line, DcqcnParams())
        self.assertTrue(rate.on_ecn(1_000))
        self.assertEqual(rate.rate, self.line / 2)
        self.assertLessEqual(rate.alpha, 1.0)

    def test_every_echo_cuts_rate(self):
        rate = RateState(self.line, DcqcnParams())
        self.assertTrue(rate.on_ecn(0))
        cut = rate.rate
        self.assertTrue(rate.on_ecn(10_000))
        self.assertLess(rate.rate, cut)
        self.assertEqual(rate.decreases, 2)

    def test_configured_interval_coalesces_echoes(self):
        rate = RateState(self.line, DcqcnParams(cnp_interval_ns=50_000))
        rate.on_ecn(0)
        cut = rate.rate
        self.assertFalse(rate.on_ecn(10_000))
        self.assertEqual(rate.rate, cut)
        self.assertTrue(rate.on_ecn(60_000))
        self.assertLess(rate.rate, cut)

    def test_quiet_period_recovers(self):
        rate = RateState(self.line, DcqcnParams())
        rate.on_ecn(0)
        cut = rate.rate
        rate.advance(55_000)
        self.assertGreater(rate.rate, cut)
        rate.advance(100_000_000)
        self.assertEqual(rate.rate, self.line)
        self.assertLess(rate.alpha, 0.01)

    def test_persistent_marking_stays_below_line_rate(self):
        rate = RateState(self.line, DcqcnParams())
        for now in range(0, 5_000_000, 50_000):
            rate.on_ecn(now)
            self.assertGreater(rate.rate, 0)
            self.assertTrue(0.0 <= rate.alpha <= 1.0)
        self.assertLess(rate.rate, self.line)

    def test_pacing_gap(self):
        rate = RateState(self.line, DcqcnParams())
        self.assertEqual(rate.gap_ns(1_000), 80)


class FlowTest(SimpleTestCase):
    def test_empty_flow_rejected(self):
        with self.assertRaises(ConfigurationError):
            Flow(flow_id=1, src=0, dst=2, size=0, start_ns=0)

    def test_packet_sizes(self):
        self.assertEqual(packet_sizes(2_500, 1_000), [1_000, 1_000, 500])
        self.assertEqual(len(packet_sizes(100_000, 1_000)), 100)


class SenderTest(SimpleTestCase):
    def test_one_bdp_leaves_in_first_rtt(self):
        sim, topo, network, transport = build_stack()
        flow = Flow(flow_id=1, src=0, dst=2, size=100_000, start_ns=0)
        transport.start_flow(flow)
        sim.run()
        sent = sends(transport)
        self.assertEqual(len(sent), 100)
        self.assertLess(max(t for t, _, _ in sent), topo.base_rtt())
        self.assertTrue(flow.completed)
        self.assertEqual(flow.retransmits, 0)

    def test_single_packet_fct_is_unloaded_rtt(self):
        sim, topo, network, transport = build_stack()
        flow = Flow(flow_id=1, src=0, dst=2, size=1_000, start_ns=0)
        transport.start_flow(flow)
        sim.run()
        self.assertEqual(flow.fct, topo.unloaded_rtt(0, 2, 0, 1_000, 64))
        self.assertEqual(flow.fct, 8_344)
        network.check_conservation()

    def test_inflight_never_exceeds_bdp(self):
        sim, topo, network, transport = build_stack()
        peaks = []

        def check():
            peaks.extend(s.inflight_bytes for s in transport.senders.values())

        for t in range(0, 300_000, 250):
            sim.schedule(t, EventKind.TIMER, "check", check)
        transport.start_flow(Flow(flow_id=1, src=0, dst=2, size=1_000_000, start_ns=0))
        transport.start_flow(Flow(flow_id=2, src=1, dst=2, size=1_000_000, start_ns=0))
        sim.run()
        self.assertTrue(peaks)
        self.assertLessEqual(max(peaks), topo.bdp_bytes())
        self.assertEqual(len(transport.completed), 2)

    def test_exactly_once_under_random_drops(self):
        sim, topo, network, transport = build_stack(network_class=LossyNetwork)
        loss = sim.fork_rng("test-loss")
        network.should_drop = (
            lambda q, pkt: pkt.kind is PacketKind.DATA and loss.random() < 0.01
        )
        flow = Flow(flow_id=1, src=0, dst=2, size=500_000, start_ns=0)
        transport.start_flow(flow)
        sim.run()
        self.assertTrue(flow.completed)
        rx = transport.receivers[1]
        self.assertEqual(rx.delivered, 500)
        self.assertEqual(rx.expected, 500)
        self.assertGreater(flow.retransmits, 0)
        network.check_conservation()

    def test_tail_drop_recovered_by_timeout(self):
        sim, topo, network, transport = build_stack(network_class=LossyNetwork)
        dropped = set()

        def drop_last_once(q, pkt):
            if pkt.kind is PacketKind.DATA and pkt.seq == 9 and 9 not in dropped:
                dropped.add(9)
                return True
            return False

        network.should_drop = drop_last_once
        flow = Flow(flow_id=1, src=0, dst=2, size=10_000, start_ns=0)
        transport.start_flow(flow)
        sim.run()
        self.assertTrue(flow.completed)
        self.assertGreaterEqual(flow.fct, transport.params.rto_min_ns)
        self.assertEqual(len(transport.flow_log.events(1, "timeout")), 1)
        self.assertEqual(flow.retransmits, 1)


class NackTest(SimpleTestCase):
    def setUp(self):
        self.sim, self.topo, self.network, self.transport = build_stack()
        self.flow = Flow(flow_id=1, src=0, dst=2, size=100_000, start_ns=0)
        self.sender = self.transport.start_flow(self.flow)

    def nack(self, cum, sack):
        return Packet(
            1,
            0,
            sack,
            64,
            2,
            0,
            ROCE_DST_PORT,
            0,
            PacketKind.NACK,
            cum_ack=cum,
            sack=sack,
        )

    def test_retransmits_unsacked_gap_only(self):
        sender = self.sender
        sender.cum = 5
        sender.outstanding = {seq: sender.port for seq in range(5, 41)}
        self.assertEqual(self.transport.on_nack(sender, self.nack(5, 40)), 35)
        self.assertEqual(list(sender.retx_queue), list(range(5, 40)))

    def test_duplicate_nack_is_noop(self):
        sender = self.sender
        sender.cum = 5
        sender.outstanding = {seq: sender.port for seq in range(5, 41)}
        self.transport.on_nack(sender, self.nack(5, 40))
        self.assertEqual(self.transport.on_nack(sender, self.nack(5, 40)), 0)

    def test_retransmissions_after_switch_use_new_port(self):
        sim, transport, sender = self.sim, self.transport, self.sender
        sim.run_until(500)
        new = (sender.port + 1) % 65536
        self.assertTrue(transport.migrate_flow(sender, new, sim.now))
        self.assertEqual(sender.port, new)
        transport.on_nack(sender, self.nack(0, 5))
        sim.run()
        retx = sends(transport, event="retx")
        self.assertTrue(retx)
        self.assertEqual({port for _, _, port in retx}, {new})
        self.assertTrue(self.flow.completed)


class MigrationTest(SimpleTestCase):
    def setUp(self):
        self.sim, self.topo, self.network, self.transport = build_stack()
        self.flow = Flow(flow_id=1, src=0, dst=2, size=1_000_000, start_ns=0)
        self.sender = self.transport.start_flow(self.flow)
        self.sim.run_until(20_000)

    def test_delayed_switch_holds_transmissions(self):
        sim, transport, sender = self.sim, self.transport, self.sender
        old_qp = sender.qp
        start = sim.now
        before = len(sends(transport))
        new = (sender.port + 1) % 65536
        transport.migrate_flow(sender, new, start + 5_000)
        sim.run()
        after = [(t, port) for t, _, port in sends(transport)[before:]]
        self.assertTrue(after)
        self.assertTrue(all(t >= start + 5_000 for t, _ in after))
        self.assertEqual({port for _, port in after}, {new})
        self.assertEqual(self.flow.switches, 1)
        self.assertIsNotNone(old_qp.released_at)

    def test_latest_migration_wins(self):
        sim, transport, sender = self.sim, self.transport, self.sender
        old = sender.port
        first, second = (old + 1) % 65536, (old + 2) % 65536
        transport.migrate_flow(sender, first, sim.now + 5_000)
        transport.migrate_flow(sender, second, sim.now + 3_000)
        sim.run()
        self.assertEqual(self.flow.switches, 1)
        migrated = transport.flow_log.events(1, "migrate")
        self.assertEqual(migrated[0][3], f"from={old} to={second}")

    def test_migrating_to_current_port_is_noop(self):
        moved = self.transport.migrate_flow(self.sender, self.sender.port, self.sim.now)
        self.assertFalse(moved)
        self.sim.run()
        self.assertEqual(self.flow.switches, 0)


class PendingMigrationTest(SimpleTestCase):
    def setUp(self):
        self.sim, self.topo, self.network, self.transport = build_stack("hopper")
        self.flow = Flow(
            flow_id=1, src=0, dst=2, size=1_000_000, start_ns=0, chunk_bytes=100_000
        )
        self.sender = self.transport.start_flow(self.flow)
        self.sim.run_until(20_000)
        self.old = self.sender.port
        self.new = self.transport.profile.entry(0, 2).ports[1]
        if self.new == self.old:
            self.new = self.transport.profile.entry(0, 2).ports[0]

    def test_chunked_switch_waits_for_boundary(self):
        moved = self.transport.migrate_flow(self.sender, self.new, self.sim.now)
        self.assertTrue(moved)
        self.assertEqual(self.sender.pending_port, self.new)
        self.assertEqual(self.sender.port, self.old)
        self.assertTrue(self.sender.migrating)

    def test_no_probes_or_decisions_while_pending(self):
        sender = self.sender
        self.transport.migrate_flow(sender, self.new, self.sim.now)
        congested = 10 * self.topo.base_rtt()
        sender.balancer.on_rtt_sample(self.transport, sender, congested, self.sim.now)
        self.assertEqual(self.flow.probes, 0)
        self.assertEqual(sender.probe_qps, {})
        self.assertEqual(sender.pending_port, self.new)

    def test_recovered_rtt_cancels_deferred_switch(self):
        sender = self.sender
        self.transport.migrate_flow(sender, self.new, self.sim.now)
        sender.balancer.on_rtt_sample(
            self.transport, sender, self.topo.base_rtt(), self.sim.now
        )
        self.assertIsNone(sender.pending_port)
        self.assertFalse(sender.migrating)
        self.sim.run()
        self.assertTrue(self.flow.completed)
        self.assertEqual(self.flow.switches, 0)
        cancelled = self.transport.flow_log.events(1, "migrate_cancelled")
        self.assertEqual(len(cancelled), 1)

    def test_cancel_without_pending_is_noop(self):
        self.assertFalse(self.transport.cancel_migration(self.sender))


class ProbeTest(SimpleTestCase):
    def test_probe_rtt_reaches_balancer(self):
        sim, topo, network, transport = build_stack(scheme="hopper")
        flow = Flow(flow_id=1, src=0, dst=2, size=100_000, start_ns=0)
        sender = transport.start_flow(flow)
        entry = transport.profile.entry(0, 2)
        port = entry.ports[1]
        path = entry.path_of(port)
        transport.send_probe(sender, port)
        sim.run()
        record = flow.lb_state.probe_records[port]
        self.assertGreaterEqual(record.rtt, topo.unloaded_rtt(0, 2, path, 1_000, 64))
        self.assertEqual(record.probed_at, 0)
        self.assertEqual(flow.probes, 1)
