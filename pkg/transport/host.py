import logging
from collections import Counter, deque
from dataclasses import dataclass, field

from engine.kernel import EventKind
from topology.config import ROCE_DST_PORT

from .config import (
    ACK_BYTES,
    MTU_BYTES,
    OOO_THRESHOLD,
    PROBE_BYTES,
    PURPOSE_DATA,
    PURPOSE_PROBE,
    RTO_MIN_NS,
    RTO_MULTIPLIER,
    SRTT_GAIN,
)
from .dcqcn import DcqcnParams, RateState
from .flowlog import NULL_LOG
from .packets import Packet, PacketKind, QueuePair
from .receiver import ReceiverState

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TransportParams:
    mtu: int = MTU_BYTES
    ack_bytes: int = ACK_BYTES
    probe_bytes: int = PROBE_BYTES
    ooo_threshold: int = OOO_THRESHOLD
    bdp_bytes: int = 100_000
    base_rtt_ns: int = 8_000
    rto_multiplier: int = RTO_MULTIPLIER
    rto_min_ns: int = RTO_MIN_NS
    dcqcn_enabled: bool = True
    dcqcn: DcqcnParams = field(default_factory=DcqcnParams)


class FlowSender:
    """Send-side state of one flow: window, pacing, recovery and its QPs."""

    def __init__(self, flow, params, line_rate, balancer, now):
        self.flow = flow
        self.params = params
        self.balancer = balancer
        mtu = params.mtu
        self.n_packets = -(-flow.size // mtu)
        self.last_size = flow.size - (self.n_packets - 1) * mtu
        if flow.chunk_bytes:
            self.chunk_packets = max(1, flow.chunk_bytes // mtu)
        else:
            self.chunk_packets = self.n_packets
        self.chunk_end = min(self.n_packets, self.chunk_packets)
        self.next_seq = 0
        self.cum = 0
        self.outstanding = {}
        self.inflight_bytes = 0
        self.sacked = set()
        self.retx_queue = deque()
        self.retx_set = set()
        self.port = None
        self.qp = None
        self.port_outstanding = Counter()
        self.draining_qps = {}
        self.probe_qps = {}
        self.rate = RateState(line_rate, params.dcqcn, now)
        self.next_send_at = now
        self.wakeup = None
        self.pending_migration = None
        self.pending_port = None
        self.announce_port = False
        self.srtt = float(params.base_rtt_ns)
        self.last_progress = now
        self.rto_event = None
        self.timeouts = 0
        self.stale_acks = 0
        self.done = False

    @property
    def inflight_packets(self):
        return len(self.outstanding)

    @property
    def migrating(self):
        return self.pending_migration is not None or self.pending_port is not None

    @property
    def rto_ns(self):
        return max(int(self.params.rto_multiplier * self.srtt), self.params.rto_min_ns)

    def size_of(self, seq):
        return self.last_size if seq == self.n_packets - 1 else self.params.mtu


class Transport:
    """
    RoCE-style host stack for every host of the fabric.

    Data flows are paced by DCQCN, capped at one BDP in flight and recovered
    selectively through cumulative ACKs, SACKs and NACKs. Path choice is
    delegated to the flow's balancer, which sees every RTT sample and may
    probe or migrate the flow through `send_probe` and `migrate_flow`.
    """

    def __init__(
        self,
        sim,
        network,
        profile,
        params,
        balancers,
        default_scheme,
        port_rng,
        flow_log=NULL_LOG,
    ):
        self.sim = sim
        self.network = network
        self.topo = network.topo
        self.profile = profile
        self.params = params
        self.balancers = balancers
        self.default_scheme = default_scheme
        self.port_rng = port_rng
        self.flow_log = flow_log
        self.senders = {}
        self.receivers = {}
        self.completed = []
        self.listeners = []
        self.stale_feedback = 0
        self.timeouts = 0
        self._next_qp = 0
        for host in self.topo.hosts:
            network.attach(host, self)

    def add_listener(self, callback):
        """callback(flow) runs when a flow's last packet is acknowledged."""
        self.listeners.append(callback)

    def log_flow(self, flow_id, event, detail=""):
        if self.flow_log.enabled:
            self.flow_log.write(self.sim.now, flow_id, event, detail)

    def _new_qp(self, flow, port, purpose):
        qp = QueuePair(self._next_qp, flow.src, flow.dst, port, purpose, self.sim.now)
        self._next_qp += 1
        return qp

    def start_flow(self, flow):
        now = self.sim.now
        scheme = flow.scheme or self.default_scheme
        flow.scheme = scheme
        balancer = self.balancers[scheme]
        line_rate = self.topo.host_uplink[flow.src].bandwidth
        sender = FlowSender(flow, self.params, line_rate, balancer, now)
        port = balancer.initial_port(self, sender)
        sender.port = port
        sender.qp = self._new_qp(flow, port, PURPOSE_DATA)
        self.senders[flow.flow_id] = sender
        balancer.on_flow_start(self, sender, now)
        self.log_flow(flow.flow_id, "start", f"size={flow.size} port={port}")
        self.pump(sender)
        return sender

    # Send side

    def pump(self, sender):
        if sender.done or sender.pending_migration is not None:
            return
        now = self.sim.now
        if sender.next_send_at > now:
            self._wake(sender, sender.next_send_at)
            return
        seq, retransmit = self._next_packet(sender)
        if seq is None:
            return
        size = self._transmit(sender, seq, retransmit)
        if self.params.dcqcn_enabled:
            sender.rate.advance(now)
        sender.next_send_at = now + sender.rate.gap_ns(size)
        self._wake(sender, sender.next_send_at)

    def _wake(self, sender, at):
        current = sender.wakeup
        if current is not None and not (current.done or current.cancelled):
            if current.fire_at <= at:
                return
            self.sim.cancel(current)
        sender.wakeup = self.sim.schedule(
            at, EventKind.TIMER, sender.flow.target, self._on_wake, sender
        )

    def _on_wake(self, sender):
        sender.wakeup = None
        self.pump(sender)

    def _next_packet(self, sender):
        while sender.retx_queue:
            seq = sender.retx_queue.popleft()
            if seq in sender.outstanding:
                return seq, True
        seq = sender.next_seq
        if seq < sender.chunk_end:
            bdp = max(self.params.bdp_bytes, self.params.mtu)
            if sender.inflight_bytes + sender.size_of(seq) <= bdp:
                sender.next_seq += 1
                return seq, False
        return None, False

    def _transmit(self, sender, seq, retransmit):
        flow = sender.flow
        now = self.sim.now
        size = sender.size_of(seq)
        port = sender.balancer.data_port(self, sender)
        if retransmit:
            previous = sender.outstanding[seq]
            sender.port_outstanding[previous] -= 1
            flow.retransmits += 1
            flow.retransmitted_bytes += size
            self._release_if_drained(sender, previous)
        else:
            sender.inflight_bytes += size
        sender.outstanding[seq] = port
        sender.port_outstanding[port] += 1
        pkt = Packet(
            flow.flow_id,
            sender.qp.qp_id,
            seq,
            size,
            flow.src,
            flow.dst,
            port,
            ROCE_DST_PORT,
            PacketKind.DATA,
            sent_at=now,
            ecn_capable=True,
        )
        self.network.send(pkt)
        if sender.announce_port and port == sender.port:
            sender.announce_port = False
            self.sim.annotate("send", f"{flow.target}:port={port}")
        if self.params.dcqcn_enabled:
            sender.rate.on_bytes_sent(size)
        if sender.rto_event is None:
            self._arm_rto(sender)
        event = "retx" if retransmit else "send"
        self.log_flow(flow.flow_id, event, f"seq={seq} port={port}")
        return size

    def _resolve(self, sender, seq):
        port = sender.outstanding.pop(seq, None)
        if port is None:
            return False
        sender.inflight_bytes -= sender.size_of(seq)
        sender.port_outstanding[port] -= 1
        sender.retx_set.discard(seq)
        self._release_if_drained(sender, port)
        return True

    def _release_if_drained(self, sender, port):
        if sender.port_outstanding[port] <= 0 and port in sender.draining_qps:
            sender.draining_qps.pop(port).released_at = self.sim.now
            self.log_flow(sender.flow.flow_id, "qp_release", f"port={port}")

    # Feedback

    def _on_feedback(self, pkt):
        sender = self.senders.get(pkt.flow_id)
        if sender is None or sender.done:
            self.stale_feedback += 1
            return
        now = self.sim.now
        flow = sender.flow
        progress = False
        if pkt.cum_ack > sender.cum:
            for seq in range(sender.cum, pkt.cum_ack):
                self._resolve(sender, seq)
                sender.sacked.discard(seq)
            sender.cum = pkt.cum_ack
            progress = True
        sack = pkt.sack
        if sack is not None and sack >= sender.cum and self._resolve(sender, sack):
            sender.sacked.add(sack)
            progress = True

        if pkt.kind is PacketKind.NACK:
            self.on_nack(sender, pkt)
        elif not progress:
            sender.stale_acks += 1
            return
        if progress:
            sender.last_progress = now
            self.on_ack(sender, pkt)
        if sender.done:
            return

        if sender.cum >= sender.n_packets:
            self._complete(sender)
            return
        while sender.cum >= sender.chunk_end < sender.n_packets:
            sender.chunk_end = min(
                sender.n_packets, sender.chunk_end + sender.chunk_packets
            )
            self.log_flow(flow.flow_id, "chunk", f"end={sender.chunk_end}")
            if sender.pending_port is not None:
                self._apply_migration(sender, sender.pending_port)
        self.pump(sender)

    def on_ack(self, sender, pkt):
        """RTT sample, rate update and balancer notification for one ACK."""
        now = self.sim.now
        rtt = now - pkt.echo_sent_at
        sender.srtt += SRTT_GAIN * (rtt - sender.srtt)
        if pkt.echo_ecn and self.params.dcqcn_enabled:
            if sender.rate.on_ecn(now):
                rate = int(sender.rate.rate)
                self.log_flow(sender.flow.flow_id, "rate_cut", f"rate={rate}")
        balancer = sender.balancer
        if rtt > 0 and (pkt.echo_port == sender.port or balancer.any_port_samples):
            balancer.on_rtt_sample(self, sender, rtt, now)

    def on_nack(self, sender, pkt):
        """Queue the un-SACKed gap below the NACKed sequence; returns how many."""
        self.log_flow(sender.flow.flow_id, "nack", f"cum={pkt.cum_ack} sack={pkt.sack}")
        queued = 0
        for seq in range(sender.cum, pkt.sack):
            if seq in sender.outstanding and seq not in sender.retx_set:
                sender.retx_set.add(seq)
                sender.retx_queue.append(seq)
                queued += 1
        return queued

    def _complete(self, sender):
        now = self.sim.now
        flow = sender.flow
        sender.done = True
        flow.end_ns = now
        self.sim.cancel(sender.wakeup)
        self.sim.cancel(sender.rto_event)
        self.sim.cancel(sender.pending_migration)
        sender.pending_migration = None
        sender.qp.released_at = now
        for qp in list(sender.draining_qps.values()) + list(sender.probe_qps.values()):
            qp.released_at = now
        sender.draining_qps.clear()
        sender.probe_qps.clear()
        sender.balancer.on_flow_done(self, sender, now)
        del self.senders[flow.flow_id]
        self.completed.append(flow)
        self.log_flow(flow.flow_id, "done", f"fct={flow.fct}")
        for callback in self.listeners:
            callback(flow)

    # Retransmission timeout

    def _arm_rto(self, sender):
        sender.rto_event = self.sim.schedule(
            self.sim.now + sender.rto_ns,
            EventKind.TIMER,
            sender.flow.target,
            self._on_rto,
            sender,
        )

    def _on_rto(self, sender):
        sender.rto_event = None
        if sender.done or not sender.outstanding:
            return
        now = self.sim.now
        deadline = sender.last_progress + sender.rto_ns
        if now < deadline:
            sender.rto_event = self.sim.schedule(
                deadline, EventKind.TIMER, sender.flow.target, self._on_rto, sender
            )
            return
        sender.timeouts += 1
        self.timeouts += 1
        sender.retx_queue.clear()
        sender.retx_set.clear()
        for seq in sorted(sender.outstanding):
            sender.retx_set.add(seq)
            sender.retx_queue.append(seq)
        sender.last_progress = now
        outstanding = len(sender.outstanding)
        logger.debug(
            "flow %d timed out with %d outstanding", sender.flow.flow_id, outstanding
        )
        self.log_flow(sender.flow.flow_id, "timeout", f"outstanding={outstanding}")
        self._arm_rto(sender)
        self.pump(sender)

    # Probing and migration

    def send_probe(self, sender, port):
        flow = sender.flow
        qp = self._new_qp(flow, port, PURPOSE_PROBE)
        sender.probe_qps[port] = qp
        pkt = Packet(
            flow.flow_id,
            qp.qp_id,
            -1,
            self.params.probe_bytes,
            flow.src,
            flow.dst,
            port,
            ROCE_DST_PORT,
            PacketKind.PROBE,
            sent_at=self.sim.now,
        )
        self.network.send(pkt)
        flow.probes += 1
        self.sim.annotate("probe_tx", f"{flow.target}:port={port}")
        self.log_flow(flow.flow_id, "probe", f"port={port}")
        return qp

    def release_probe(self, sender, port):
        qp = sender.probe_qps.pop(port, None)
        if qp is not None:
            qp.released_at = self.sim.now

    def cancel_migration(self, sender):
        """Drop a migration that has not taken effect yet."""
        if not sender.migrating:
            return False
        if sender.pending_migration is not None:
            self.sim.cancel(sender.pending_migration)
            sender.pending_migration = None
        port = sender.pending_port
        sender.pending_port = None
        self.log_flow(sender.flow.flow_id, "migrate_cancelled", f"port={port}")
        self.pump(sender)
        return True

    def migrate_flow(self, sender, port, effective_at):
        """
        Move the flow's new transmissions to `port` from effective_at on.

        No data leaves the flow while a migration is pending, and a newer
        call replaces an older pending one. Chunked flows switch at their
        next chunk boundary instead.
        """
        now = self.sim.now
        if sender.pending_migration is not None:
            self.sim.cancel(sender.pending_migration)
            sender.pending_migration = None
        sender.pending_port = None
        if sender.done or port == sender.port:
            self.pump(sender)
            return False
        flow = sender.flow
        self.log_flow(
            flow.flow_id, "migrate_scheduled", f"port={port} at={effective_at}"
        )
        if flow.chunk_bytes and sender.chunk_end < sender.n_packets:
            sender.pending_port = port
            return True
        if effective_at <= now:
            self._apply_migration(sender, port)
        else:
            sender.pending_migration = self.sim.schedule(
                effective_at,
                EventKind.MIGRATE,
                flow.target,
                self._apply_migration,
                sender,
                port,
            )
        return True

    def _apply_migration(self, sender, port):
        sender.pending_migration = None
        sender.pending_port = None
        if sender.done or port == sender.port:
            return
        flow = sender.flow
        old_port, old_qp = sender.port, sender.qp
        qp = (
            sender.probe_qps.pop(port, None)
            or sender.draining_qps.pop(port, None)
            or self._new_qp(flow, port, PURPOSE_DATA)
        )
        qp.purpose = PURPOSE_DATA
        sender.port, sender.qp = port, qp
        if sender.port_outstanding[old_port] > 0:
            sender.draining_qps[old_port] = old_qp
        else:
            old_qp.released_at = self.sim.now
        flow.switches += 1
        sender.announce_port = True
        self.sim.annotate("migrate", f"{flow.target}:port={port}")
        self.log_flow(flow.flow_id, "migrate", f"from={old_port} to={port}")
        sender.balancer.on_migrated(self, sender, old_port, self.sim.now)
        self.pump(sender)

    # Receive side

    def receive(self, pkt):
        kind = pkt.kind
        if kind is PacketKind.DATA:
            self._on_data(pkt)
        elif kind is PacketKind.PROBE:
            self._reply(pkt, PacketKind.PROBE_ACK, 0, None)
        elif kind is PacketKind.PROBE_ACK:
            self._on_probe_ack(pkt)
        else:
            self._on_feedback(pkt)

    def _on_data(self, pkt):
        rx = self.receivers.get(pkt.flow_id)
        if rx is None:
            rx = self.receivers[pkt.flow_id] = ReceiverState(
                pkt.flow_id, self.params.ooo_threshold
            )
        feedback = rx.on_data(pkt.seq)
        self._reply(pkt, feedback.kind, feedback.cum, feedback.sack)

    def _reply(self, pkt, kind, cum, sack):
        ack = Packet(
            pkt.flow_id,
            pkt.qp_id,
            pkt.seq,
            self.params.ack_bytes,
            pkt.dst,
            pkt.src,
            pkt.dst_port,
            pkt.src_port,
            kind,
            sent_at=self.sim.now,
            cum_ack=cum,
            sack=sack,
            echo_sent_at=pkt.sent_at,
            echo_ecn=pkt.ecn,
            echo_port=pkt.src_port,
        )
        if self.network.symmetric_acks:
            ack.pinned_uplink = pkt.uplink
        self.network.send(ack)

    def _on_probe_ack(self, pkt):
        sender = self.senders.get(pkt.flow_id)
        if sender is None or sender.done:
            self.stale_feedback += 1
            return
        now = self.sim.now
        rtt = now - pkt.echo_sent_at
        self.log_flow(pkt.flow_id, "probe_ack", f"port={pkt.echo_port} rtt={rtt}")
        sender.balancer.on_probe_ack(self, sender, pkt.echo_port, rtt, now)

    # Aggregates

    def receiver_totals(self):
        totals = Counter()
        for rx in self.receivers.values():
            totals["ooo_arrivals"] += rx.ooo_arrivals
            totals["ooo_buffered"] += rx.ooo_buffered
            totals["nacks"] += rx.nacks
            totals["duplicates"] += rx.duplicates
            totals["delivered_packets"] += rx.delivered
        return dict(totals)
