from dataclasses import dataclass, field
from enum import Enum

from engine.exceptions import ConfigurationError

from .config import EMPTY_FLOW_MESSAGE, PURPOSE_DATA


class PacketKind(Enum):
    DATA = "data"
    ACK = "ack"
    NACK = "nack"
    PROBE = "probe"
    PROBE_ACK = "probe_ack"


@dataclass(slots=True, eq=False)
class Packet:
    flow_id: int
    qp_id: int
    seq: int
    size: int
    src: int
    dst: int
    src_port: int
    dst_port: int
    kind: PacketKind
    sent_at: int = 0
    ecn_capable: bool = False
    ecn: bool = False
    uplink: int = None
    pinned_uplink: int = None
    # Feedback fields, filled on ACK/NACK/PROBE_ACK only.
    cum_ack: int = 0
    sack: int = None
    echo_sent_at: int = 0
    echo_ecn: bool = False
    echo_port: int = 0


@dataclass(slots=True, eq=False)
class QueuePair:
    qp_id: int
    src: int
    dst: int
    src_port: int
    purpose: str = PURPOSE_DATA
    created_at: int = 0
    released_at: int = None

    @property
    def alive(self):
        return self.released_at is None


@dataclass(eq=False)
class Flow:
    """A sender-to-receiver transfer and its completion record."""

    flow_id: int
    src: int
    dst: int
    size: int
    start_ns: int
    chunk_bytes: int = None
    initial_path: int = None
    scheme: str = None
    round_index: int = None
    end_ns: int = None
    switches: int = 0
    retransmits: int = 0
    retransmitted_bytes: int = 0
    probes: int = 0
    lb_state: object = field(default=None, repr=False)

    def __post_init__(self):
        if self.size <= 0:
            raise ConfigurationError(EMPTY_FLOW_MESSAGE.format(flow_id=self.flow_id))

    @property
    def completed(self):
        return self.end_ns is not None

    @property
    def fct(self):
        if self.end_ns is None:
            return None
        return self.end_ns - self.start_ns

    @property
    def target(self):
        return f"flow:{self.flow_id}"


def packet_sizes(size, mtu):
    """Wire size of every packet of a size-byte message."""
    full, rest = divmod(size, mtu)
    sizes = [mtu] * full
    if rest:
        sizes.append(rest)
    return sizes
