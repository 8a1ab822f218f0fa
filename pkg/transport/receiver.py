from dataclasses import dataclass

from .config import OOO_THRESHOLD
from .packets import PacketKind


@dataclass(frozen=True, slots=True)
class Feedback:
    """What the receiver answers to one data packet."""

    kind: PacketKind
    cum: int
    sack: int = None
    delivered: int = 0


class ReceiverState:
    """
    Selective-repeat receive side of one flow.

    Packets up to `threshold` past the expected sequence are buffered and
    acknowledged normally. Anything further out is kept for recovery, SACKed
    and answered with a NACK so the sender repairs the gap.
    """

    def __init__(self, flow_id, threshold=OOO_THRESHOLD):
        self.flow_id = flow_id
        self.threshold = threshold
        self.expected = 0
        self.buffer = set()
        self.recovery = set()
        self.delivered = 0
        self.ooo_arrivals = 0
        self.ooo_buffered = 0
        self.nacks = 0
        self.duplicates = 0

    @property
    def cumulative_ack(self):
        return self.expected

    def holds(self, seq):
        return seq < self.expected or seq in self.buffer or seq in self.recovery

    def on_data(self, seq):
        if self.holds(seq):
            self.duplicates += 1
            return Feedback(PacketKind.ACK, self.expected, seq)

        if seq == self.expected:
            count = 1
            self.expected += 1
            while True:
                if self.expected in self.buffer:
                    self.buffer.remove(self.expected)
                elif self.expected in self.recovery:
                    self.recovery.remove(self.expected)
                else:
                    break
                self.expected += 1
                count += 1
            self.delivered += count
            return Feedback(PacketKind.ACK, self.expected, None, count)

        self.ooo_arrivals += 1
        if seq - self.expected <= self.threshold:
            self.buffer.add(seq)
            self.ooo_buffered += 1
            return Feedback(PacketKind.ACK, self.expected, seq)

        self.recovery.add(seq)
        self.nacks += 1
        return Feedback(PacketKind.NACK, self.expected, seq)
