import logging
from dataclasses import dataclass, replace

from engine.exceptions import ConfigurationError

from .config import (
    BAD_LINK_MESSAGE,
    DEFAULT_BANDWIDTH,
    DEFAULT_ECN_KMAX,
    DEFAULT_ECN_KMIN,
    DEFAULT_ECN_PMAX,
    DEFAULT_LATENCY_NS,
    DEFAULT_QUEUE_CAPACITY,
    GBPS,
    INDIVISIBLE_HOSTS_MESSAGE,
    LINK_TIER_FABRIC,
    LINK_TIER_HOST,
    PRESETS,
    TESTBED_FAST_BANDWIDTH,
    TESTBED_FAST_SPINES,
    TESTBED_HOST_BANDWIDTH,
    TESTBED_HOSTS,
    TESTBED_LEAVES,
    TESTBED_SLOW_BANDWIDTH,
    TESTBED_SLOW_SPINES,
    TIER_LEAF,
    TIER_SPINE,
    UNKNOWN_PRESET_MESSAGE,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class LinkTemplate:
    bandwidth: int = DEFAULT_BANDWIDTH
    latency_ns: int = DEFAULT_LATENCY_NS
    queue_capacity: int = DEFAULT_QUEUE_CAPACITY
    ecn_kmin: int = DEFAULT_ECN_KMIN
    ecn_kmax: int = DEFAULT_ECN_KMAX
    ecn_pmax: float = DEFAULT_ECN_PMAX


@dataclass(frozen=True, slots=True)
class Link:
    """One direction of a cable; the output queue lives at `src`."""

    link_id: int
    src: str
    dst: str
    bandwidth: int
    latency_ns: int
    queue_capacity: int
    ecn_kmin: int
    ecn_kmax: int
    ecn_pmax: float
    tier: str

    def __post_init__(self):
        if self.bandwidth <= 0:
            reason = "bandwidth must be positive"
        elif self.latency_ns <= 0:
            reason = "latency must be positive"
        elif not self.ecn_kmin <= self.ecn_kmax <= self.queue_capacity:
            reason = "ECN thresholds must satisfy kmin <= kmax <= queue capacity"
        elif not 0.0 <= self.ecn_pmax <= 1.0:
            reason = "ECN pmax must be a probability"
        else:
            return
        raise ConfigurationError(
            BAD_LINK_MESSAGE.format(src=self.src, dst=self.dst, reason=reason)
        )

    @property
    def endpoints(self):
        return (self.src, self.dst)

    @property
    def link_class(self):
        if self.bandwidth % GBPS == 0:
            return f"{self.bandwidth // GBPS}G"
        return f"{self.bandwidth / GBPS:g}G"

    def serialization_ns(self, size):
        return -(-size * 8 * 1_000_000_000 // self.bandwidth)


def host_node(host):
    return f"h{host}"


def leaf_node(index):
    return f"leaf{index}"


def spine_node(index):
    return f"spine{index}"


class Topology:
    """
    Two-tier leaf-spine fabric.

    Hosts are integers; switches and host endpoints are addressed by node
    names (`h3`, `leaf1`, `spine0`) in links and traces. Leaf uplinks are
    ordered by spine index, which is also the path id of a cross-leaf route.
    """

    def __init__(self, name, n_hosts, n_leaves, n_spines):
        self.name = name
        self.hosts = list(range(n_hosts))
        self.leaves = [leaf_node(i) for i in range(n_leaves)]
        self.spines = [spine_node(i) for i in range(n_spines)]
        self.links = []
        self.host_to_leaf = {}
        self.host_uplink = {}
        self.host_downlink = {}
        self.leaf_uplinks = [[None] * n_spines for _ in range(n_leaves)]
        self.spine_downlinks = [[None] * n_leaves for _ in range(n_spines)]

    def __repr__(self):
        return (
            f"Topology({self.name!r}, hosts={len(self.hosts)}, "
            f"leaves={len(self.leaves)}, spines={len(self.spines)})"
        )

    @property
    def switches(self):
        return [(leaf, TIER_LEAF) for leaf in self.leaves] + [
            (spine, TIER_SPINE) for spine in self.spines
        ]

    def _add_link(self, src, dst, template, tier):
        link = Link(
            link_id=len(self.links),
            src=src,
            dst=dst,
            bandwidth=template.bandwidth,
            latency_ns=template.latency_ns,
            queue_capacity=template.queue_capacity,
            ecn_kmin=template.ecn_kmin,
            ecn_kmax=template.ecn_kmax,
            ecn_pmax=template.ecn_pmax,
            tier=tier,
        )
        self.links.append(link)
        return link

    def attach_host(self, host, leaf, template):
        self.host_to_leaf[host] = leaf
        self.host_uplink[host] = self._add_link(
            host_node(host), leaf_node(leaf), template, LINK_TIER_HOST
        )
        self.host_downlink[host] = self._add_link(
            leaf_node(leaf), host_node(host), template, LINK_TIER_HOST
        )

    def connect(self, leaf, spine, template):
        self.leaf_uplinks[leaf][spine] = self._add_link(
            leaf_node(leaf), spine_node(spine), template, LINK_TIER_FABRIC
        )
        self.spine_downlinks[spine][leaf] = self._add_link(
            spine_node(spine), leaf_node(leaf), template, LINK_TIER_FABRIC
        )

    def leaf_of(self, host):
        return self.host_to_leaf[host]

    def address(self, host):
        """IPv4-style address 10.<leaf>.<host high>.<host low>."""
        return (10 << 24) | (self.leaf_of(host) << 16) | (host & 0xFFFF)

    def same_leaf(self, src, dst):
        return self.leaf_of(src) == self.leaf_of(dst)

    def path_count(self, src, dst):
        if src == dst:
            return 0
        if self.same_leaf(src, dst):
            return 1
        return len(self.spines)

    def path_links(self, src, dst, path_id):
        """Ordered link list of a route; path_id is the spine index."""
        if self.same_leaf(src, dst):
            return (self.host_uplink[src], self.host_downlink[dst])
        return (
            self.host_uplink[src],
            self.leaf_uplinks[self.leaf_of(src)][path_id],
            self.spine_downlinks[path_id][self.leaf_of(dst)],
            self.host_downlink[dst],
        )

    def unloaded_rtt(self, src, dst, path_id, data_size, ack_size):
        """Propagation plus one serialization per hop in each direction."""
        links = self.path_links(src, dst, path_id)
        forward = sum(l.latency_ns + l.serialization_ns(data_size) for l in links)
        reverse = sum(l.latency_ns + l.serialization_ns(ack_size) for l in links)
        return forward + reverse

    def base_rtt(self):
        """Smallest cross-leaf round-trip propagation delay, in ns."""
        if len(self.leaves) < 2:
            host = self.hosts[0]
            one_way = (
                self.host_uplink[host].latency_ns + self.host_downlink[host].latency_ns
            )
            return 2 * one_way
        src = self.hosts[0]
        dst = next(h for h in self.hosts if not self.same_leaf(src, h))
        return min(
            2 * sum(l.latency_ns for l in self.path_links(src, dst, spine))
            for spine in range(len(self.spines))
        )

    def host_bandwidth(self):
        return min(link.bandwidth for link in self.host_uplink.values())

    def bdp_bytes(self):
        return self.host_bandwidth() * self.base_rtt() // (8 * 1_000_000_000)

    def best_path(self, src, dst, data_size, ack_size):
        """Path id with the smallest unloaded RTT (lowest id on ties)."""
        if self.same_leaf(src, dst):
            return 0
        return min(
            range(len(self.spines)),
            key=lambda p: (self.unloaded_rtt(src, dst, p, data_size, ack_size), p),
        )


def build_leaf_spine(
    n_hosts, n_leaf, n_spine, link=None, spine_latency_ns=None, name=None
):
    if n_leaf <= 0 or n_spine <= 0 or n_hosts <= 0 or n_hosts % n_leaf:
        raise ConfigurationError(
            INDIVISIBLE_HOSTS_MESSAGE.format(hosts=n_hosts, leaves=n_leaf)
        )
    if spine_latency_ns is not None and len(spine_latency_ns) != n_spine:
        raise ConfigurationError(
            f"spine_latency_ns lists {len(spine_latency_ns)} values "
            f"for {n_spine} spines"
        )
    link = link or LinkTemplate()
    name = name or f"leaf-spine-{n_hosts}x{n_leaf}x{n_spine}"
    topo = Topology(name, n_hosts, n_leaf, n_spine)
    per_leaf = n_hosts // n_leaf
    for host in topo.hosts:
        topo.attach_host(host, host // per_leaf, link)
    for leaf in range(n_leaf):
        for spine in range(n_spine):
            template = link
            if spine_latency_ns is not None:
                template = replace(link, latency_ns=spine_latency_ns[spine])
            topo.connect(leaf, spine, template)
    logger.debug("built %r", topo)
    return topo


def build_asymmetric_testbed(link=None):
    """
    Two leaves, six spines, four hosts per leaf on 25 Gbps ports; each leaf
    reaches four spines at 10 Gbps and the other two at 1 Gbps.
    """
    link = link or LinkTemplate()
    n_spines = TESTBED_FAST_SPINES + TESTBED_SLOW_SPINES
    topo = Topology("paper-testbed", TESTBED_HOSTS, TESTBED_LEAVES, n_spines)
    per_leaf = TESTBED_HOSTS // TESTBED_LEAVES
    host_link = replace(link, bandwidth=TESTBED_HOST_BANDWIDTH)
    for host in topo.hosts:
        topo.attach_host(host, host // per_leaf, host_link)
    for leaf in range(TESTBED_LEAVES):
        for spine in range(n_spines):
            if spine < TESTBED_FAST_SPINES:
                bandwidth = TESTBED_FAST_BANDWIDTH
            else:
                bandwidth = TESTBED_SLOW_BANDWIDTH
            topo.connect(leaf, spine, replace(link, bandwidth=bandwidth))
    return topo


def build_preset(name, link=None):
    try:
        preset = dict(PRESETS[name])
    except KeyError:
        raise ConfigurationError(UNKNOWN_PRESET_MESSAGE.format(name=name))
    if preset.pop("kind") == "testbed":
        return build_asymmetric_testbed(link)
    return build_leaf_spine(
        preset["hosts"],
        preset["leaves"],
        preset["spines"],
        link=link,
        spine_latency_ns=preset.get("spine_latency_ns"),
        name=name,
    )
