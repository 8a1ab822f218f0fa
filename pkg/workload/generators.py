import logging
from dataclasses import dataclass, field

from engine.config import NS_PER_SEC
from engine.exceptions import ConfigurationError
from transport.packets import Flow

from .cdf import sample_flow_size
from .config import (
    BAD_PAIR_MESSAGE,
    CHUNK_SIZE_MESSAGE,
    EMPTY_COLLECTIVE_MESSAGE,
    LOAD_RANGE_MESSAGE,
    MODE_COLLECTIVE,
    MODE_EXPLICIT,
    MODE_POISSON,
    NO_FLOWS_MESSAGE,
    NO_PAIRS_MESSAGE,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FlowSpec:
    flow_id: int
    src: int
    dst: int
    size: int
    start_ns: int = 0
    chunk_bytes: int = None
    initial_path: int = None
    scheme: str = None
    round_index: int = None

    def to_flow(self, start_ns=None):
        return Flow(
            flow_id=self.flow_id,
            src=self.src,
            dst=self.dst,
            size=self.size,
            start_ns=self.start_ns if start_ns is None else start_ns,
            chunk_bytes=self.chunk_bytes,
            initial_path=self.initial_path,
            scheme=self.scheme,
            round_index=self.round_index,
        )


@dataclass
class WorkloadSpec:
    mode: str = MODE_POISSON
    cdf: object = None
    target_load: float = 0.5
    duration_ns: int = 1_000_000
    rounds: int = 0
    flows_per_round: int = 0
    flow_size: int = 0
    chunk_bytes: int = None
    round_sizes: tuple = ()
    cross_leaf_only: bool = False
    flows: list = field(default_factory=list)

    def __post_init__(self):
        if self.mode == MODE_POISSON and not 0 < self.target_load < 1:
            raise ConfigurationError(LOAD_RANGE_MESSAGE.format(value=self.target_load))
        if self.mode == MODE_COLLECTIVE:
            if self.rounds <= 0 or self.flows_per_round <= 0:
                raise ConfigurationError(EMPTY_COLLECTIVE_MESSAGE)
            for size in (self.flow_size, *self.round_sizes):
                if size <= 0:
                    raise ConfigurationError(EMPTY_COLLECTIVE_MESSAGE)
                if self.chunk_bytes and self.chunk_bytes > size:
                    raise ConfigurationError(
                        CHUNK_SIZE_MESSAGE.format(chunk=self.chunk_bytes, size=size)
                    )
        if self.mode == MODE_EXPLICIT and not self.flows:
            raise ConfigurationError(NO_FLOWS_MESSAGE)

    def round_size(self, index):
        if self.round_sizes:
            return self.round_sizes[index % len(self.round_sizes)]
        return self.flow_size


@dataclass
class Schedule:
    """
    Flows to inject into one run.

    Timed modes fill `flows` with absolute start times. Collective mode fills
    `rounds`; a round's flows start together once the previous round is done,
    so their start_ns is only a placeholder.
    """

    mode: str
    flows: list = field(default_factory=list)
    rounds: list = field(default_factory=list)

    def __len__(self):
        return len(self.flows)

    @property
    def total_bytes(self):
        return sum(f.size for f in self.flows)


def arrival_rate(spec, topo):
    """Poisson arrival rate in flows per second for the whole fabric."""
    capacity = len(topo.hosts) * topo.host_bandwidth()
    return spec.target_load * capacity / (8 * spec.cdf.mean())


def _draw_pair(topo, rng, cross_leaf_only):
    hosts = topo.hosts
    while True:
        src = rng.choice(hosts)
        dst = hosts[rng.integers(len(hosts) - 1)]
        if dst >= src:
            dst = hosts[hosts.index(dst) + 1]
        if not cross_leaf_only or not topo.same_leaf(src, dst):
            return src, dst


def generate_poisson_arrivals(spec, topo, rng):
    if spec.mode != MODE_POISSON:
        raise ConfigurationError(f"expected a {MODE_POISSON} workload, got {spec.mode}")
    if len(topo.hosts) < 2 or (spec.cross_leaf_only and len(topo.leaves) < 2):
        raise ConfigurationError(NO_PAIRS_MESSAGE.format(name=topo.name))
    mean_gap_ns = NS_PER_SEC / arrival_rate(spec, topo)
    flows = []
    now = rng.exponential(mean_gap_ns)
    while now < spec.duration_ns:
        src, dst = _draw_pair(topo, rng, spec.cross_leaf_only)
        size = sample_flow_size(spec.cdf, rng)
        chunk = min(spec.chunk_bytes, size) if spec.chunk_bytes else None
        flows.append(FlowSpec(len(flows), src, dst, size, int(now), chunk_bytes=chunk))
        now += rng.exponential(mean_gap_ns)
    logger.info(
        "poisson workload: %d flows over %d ns at load %.2f",
        len(flows),
        spec.duration_ns,
        spec.target_load,
    )
    return Schedule(MODE_POISSON, flows=flows)


def collective_pairs(topo):
    """First-leaf hosts paired with the hosts in the same slots of the last leaf."""
    by_leaf = {}
    for host in topo.hosts:
        by_leaf.setdefault(topo.leaf_of(host), []).append(host)
    first = by_leaf[min(by_leaf)]
    last = by_leaf[max(by_leaf)]
    if first is last:
        last = first[1:] + first[:1]
    pairs = [(a, b) for a, b in zip(first, last) if a != b]
    if not pairs:
        raise ConfigurationError(NO_PAIRS_MESSAGE.format(name=topo.name))
    return pairs


def generate_collective_rounds(spec, topo):
    """
    Barrier-synchronized rounds. Even rounds push from the first leaf to the
    last, odd rounds send the reduced data back.
    """
    if spec.mode != MODE_COLLECTIVE:
        raise ConfigurationError(
            f"expected a {MODE_COLLECTIVE} workload, got {spec.mode}"
        )
    pairs = collective_pairs(topo)
    rounds = []
    flow_id = 0
    for index in range(spec.rounds):
        size = spec.round_size(index)
        members = []
        for slot in range(spec.flows_per_round):
            src, dst = pairs[slot % len(pairs)]
            if index % 2:
                src, dst = dst, src
            members.append(
                FlowSpec(
                    flow_id,
                    src,
                    dst,
                    size,
                    chunk_bytes=spec.chunk_bytes,
                    round_index=index,
                )
            )
            flow_id += 1
        rounds.append(members)
    flows = [f for members in rounds for f in members]
    logger.info("collective workload: %d rounds, %d flows", len(rounds), len(flows))
    return Schedule(MODE_COLLECTIVE, flows=flows, rounds=rounds)


def explicit_flows(spec, topo):
    flows = []
    for flow_id, entry in enumerate(spec.flows):
        src, dst = entry["src"], entry["dst"]
        if src == dst or src not in topo.host_to_leaf or dst not in topo.host_to_leaf:
            raise ConfigurationError(
                BAD_PAIR_MESSAGE.format(flow_id=flow_id, src=src, dst=dst)
            )
        chunk = entry.get("chunk_bytes")
        if chunk and chunk > entry["size"]:
            raise ConfigurationError(
                CHUNK_SIZE_MESSAGE.format(chunk=chunk, size=entry["size"])
            )
        flows.append(
            FlowSpec(
                flow_id,
                src,
                dst,
                entry["size"],
                entry.get("start_ns", 0),
                chunk_bytes=chunk,
                initial_path=entry.get("initial_path"),
                scheme=entry.get("scheme"),
            )
        )
    flows.sort(key=lambda f: (f.start_ns, f.flow_id))
    return Schedule(MODE_EXPLICIT, flows=flows)


def build_schedule(spec, topo, rng):
    if spec.mode == MODE_POISSON:
        return generate_poisson_arrivals(spec, topo, rng)
    if spec.mode == MODE_COLLECTIVE:
        return generate_collective_rounds(spec, topo)
    if spec.mode == MODE_EXPLICIT:
        return explicit_flows(spec, topo)
    raise ConfigurationError(f"unknown workload mode '{spec.mode}'")
