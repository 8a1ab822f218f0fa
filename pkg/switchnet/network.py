import logging
from collections import deque

from engine.exceptions import SimulationError
from engine.kernel import EventKind
from transport.packets import PacketKind

from .config import (
    ACK_ROUTING_REVERSED,
    ACK_ROUTING_SYMMETRIC,
    CONSERVATION_MESSAGE,
    NO_ROUTE_MESSAGE,
    UNATTACHED_HOST_MESSAGE,
)
from .hashing import ecmp_bucket

logger = logging.getLogger(__name__)

_HOST, _LEAF, _SPINE = 0, 1, 2


def ecn_probability(occupancy, kmin, kmax, pmax):
    if occupancy >= kmax:
        return 1.0
    if occupancy < kmin:
        return 0.0
    return pmax * (occupancy - kmin) / (kmax - kmin)


class OutputQueue:
    """Drop-tail FIFO in front of one link, marking ECN on enqueue."""

    __slots__ = (
        "link",
        "occupancy",
        "fifo",
        "busy_until",
        "drain_pending",
        "bytes_sent",
        "packets_sent",
        "drops",
        "ecn_marks",
        "data_bytes_delivered",
    )

    def __init__(self, link):
        self.link = link
        self.occupancy = 0
        self.fifo = deque()
        self.busy_until = 0
        self.drain_pending = False
        self.bytes_sent = 0
        self.packets_sent = 0
        self.drops = 0
        self.ecn_marks = 0
        self.data_bytes_delivered = 0

    def __len__(self):
        return len(self.fifo)

    def enqueue(self, pkt, now, rng):
        """Returns (enqueued, ecn_marked)."""
        link = self.link
        if self.occupancy + pkt.size > link.queue_capacity:
            self.drops += 1
            return False, False
        marked = False
        if pkt.ecn_capable:
            p = ecn_probability(
                self.occupancy, link.ecn_kmin, link.ecn_kmax, link.ecn_pmax
            )
            if p >= 1.0 or (p > 0.0 and rng.random() < p):
                marked = True
                self.ecn_marks += 1
        self.fifo.append(pkt)
        self.occupancy += pkt.size
        return True, marked

    def pop(self):
        pkt = self.fifo.popleft()
        self.occupancy -= pkt.size
        return pkt


class SwitchNetwork:
    """
    Packet forwarding over a Topology.

    Hosts hand packets to `send`; the network walks them hop by hop through
    output queues and finally calls `receive(pkt)` on the endpoint attached
    to the destination host.
    """

    def __init__(self, sim, topo, ecn_rng, ack_routing=ACK_ROUTING_REVERSED):
        self.sim = sim
        self.topo = topo
        self.ecn_rng = ecn_rng
        self.ack_routing = ack_routing
        self.queues = [OutputQueue(link) for link in topo.links]
        self.endpoints = {}
        self.injected = 0
        self.delivered = 0
        self.dropped = 0
        self.on_wire = 0
        self.data_bytes_dropped = 0
        self.data_bytes_on_wire = 0
        self._addresses = {host: topo.address(host) for host in topo.hosts}
        self._node_kind = {}
        for host in topo.hosts:
            self._node_kind[f"h{host}"] = (_HOST, host)
        for index, leaf in enumerate(topo.leaves):
            self._node_kind[leaf] = (_LEAF, index)
        for index, spine in enumerate(topo.spines):
            self._node_kind[spine] = (_SPINE, index)

    @property
    def symmetric_acks(self):
        return self.ack_routing == ACK_ROUTING_SYMMETRIC

    def attach(self, host, endpoint):
        self.endpoints[host] = endpoint

    def queue_for(self, link):
        return self.queues[link.link_id]

    def send(self, pkt):
        """Inject a packet at its source host's NIC."""
        self.injected += 1
        pkt.uplink = None
        self.enqueue_packet(self.queues[self.topo.host_uplink[pkt.src].link_id], pkt)

    def ecmp_select_port(self, leaf, pkt):
        n_uplinks = len(self.topo.leaf_uplinks[leaf])
        if n_uplinks == 0:
            raise SimulationError(
                NO_ROUTE_MESSAGE.format(switch=self.topo.leaves[leaf], dst=pkt.dst)
            )
        return ecmp_bucket(
            n_uplinks,
            self._addresses[pkt.src],
            self._addresses[pkt.dst],
            pkt.src_port,
            pkt.dst_port,
        )

    def enqueue_packet(self, q, pkt):
        now = self.sim.now
        enqueued, marked = q.enqueue(pkt, now, self.ecn_rng)
        if not enqueued:
            self.dropped += 1
            if pkt.kind is PacketKind.DATA:
                self.data_bytes_dropped += pkt.size
            logger.debug("drop on %s->%s at %d ns", q.link.src, q.link.dst, now)
            return False
        if marked:
            pkt.ecn = True
        if not q.drain_pending:
            if q.busy_until <= now:
                self.drain_link(q)
            else:
                q.drain_pending = True
                self.sim.schedule(
                    q.busy_until, EventKind.DRAIN, q.link.src, self._on_drain, q
                )
        return True

    def drain_link(self, q):
        """Put the head packet on the wire and schedule its far-end arrival."""
        now = self.sim.now
        pkt = q.pop()
        link = q.link
        tx = link.serialization_ns(pkt.size)
        q.busy_until = now + tx
        q.bytes_sent += pkt.size
        q.packets_sent += 1
        self.on_wire += 1
        if pkt.kind is PacketKind.DATA:
            self.data_bytes_on_wire += pkt.size
        self.sim.schedule(
            now + tx + link.latency_ns,
            EventKind.ARRIVAL,
            link.dst,
            self._on_arrival,
            link,
            pkt,
        )
        if q.fifo:
            q.drain_pending = True
            self.sim.schedule(
                q.busy_until, EventKind.DRAIN, link.src, self._on_drain, q
            )

    def _on_drain(self, q):
        q.drain_pending = False
        if q.fifo:
            self.drain_link(q)

    def _on_arrival(self, link, pkt):
        self.on_wire -= 1
        if pkt.kind is PacketKind.DATA:
            self.data_bytes_on_wire -= pkt.size
        kind, index = self._node_kind[link.dst]
        topo = self.topo
        if kind == _HOST:
            endpoint = self.endpoints.get(index)
            if endpoint is None:
                raise SimulationError(UNATTACHED_HOST_MESSAGE.format(host=index))
            self.delivered += 1
            if pkt.kind is PacketKind.DATA:
                self.queues[link.link_id].data_bytes_delivered += pkt.size
            endpoint.receive(pkt)
            return
        dst_leaf = topo.host_to_leaf[pkt.dst]
        if kind == _LEAF:
            if dst_leaf == index:
                out = topo.host_downlink[pkt.dst]
            else:
                uplink = pkt.pinned_uplink
                if uplink is None:
                    uplink = self.ecmp_select_port(index, pkt)
                pkt.uplink = uplink
                out = topo.leaf_uplinks[index][uplink]
        else:
            out = topo.spine_downlinks[index][dst_leaf]
        self.enqueue_packet(self.queues[out.link_id], pkt)

    def queued_packets(self):
        return sum(len(q) for q in self.queues)

    def data_bytes_in_network(self):
        """DATA bytes still queued or on a wire."""
        queued = sum(
            pkt.size
            for q in self.queues
            for pkt in q.fifo
            if pkt.kind is PacketKind.DATA
        )
        return queued + self.data_bytes_on_wire

    def data_bytes_delivered(self):
        return sum(q.data_bytes_delivered for q in self.queues)

    def check_conservation(self):
        queued = self.queued_packets()
        in_flight = self.on_wire
        if self.injected != self.delivered + self.dropped + queued + in_flight:
            raise SimulationError(
                CONSERVATION_MESSAGE.format(
                    injected=self.injected,
                    delivered=self.delivered,
                    dropped=self.dropped,
                    queued=queued + in_flight,
                )
            )


def reverse_tuple(pkt):
    """Source/destination ports for a reply that reverses pkt's 5-tuple."""
    return pkt.dst_port, pkt.src_port
