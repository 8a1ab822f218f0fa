import hashlib
import heapq
import logging
from collections import deque
from dataclasses import dataclass
from enum import Enum

from .config import (
    DUPLICATE_STREAM_MESSAGE,
    PAST_SCHEDULE_MESSAGE,
    RUN_BACKWARDS_MESSAGE,
    TRACE_TAIL_LENGTH,
)
from .exceptions import ConfigurationError, SimulationError
from .rng import RngStream

logger = logging.getLogger(__name__)


class EventKind(Enum):
    ARRIVAL = "arrival"
    DRAIN = "drain"
    TIMER = "timer"
    FLOW_START = "flow_start"
    EPOCH = "epoch"
    MIGRATE = "migrate"
    ROUND = "round"
    SNAPSHOT = "snapshot"


@dataclass(slots=True, eq=False)
class Event:
    fire_at: int
    seq: int
    kind: EventKind
    target: str
    action: object
    args: tuple = ()
    cancelled: bool = False
    done: bool = False


class Simulator:
    """
    Single-threaded discrete-event kernel with an integer nanosecond clock.

    Events with the same fire time are dispatched in the order they were
    scheduled. Every dispatched event is folded into a SHA-256 digest so two
    runs can be compared without keeping the whole trace around.
    """

    def __init__(self, seed, trace_file=None, record_trace=True):
        self.seed = seed
        self.now = 0
        self.dispatched = 0
        self._queue = []
        self._next_seq = 0
        self._live = 0
        self._streams = {}
        self._stopped = False
        self._record = record_trace or trace_file is not None
        self._trace_file = trace_file
        self._digest = hashlib.sha256()
        self._tail = deque(maxlen=TRACE_TAIL_LENGTH)

    def __len__(self):
        return self._live

    @property
    def trace_digest(self):
        return self._digest.hexdigest()

    @property
    def trace_tail(self):
        return list(self._tail)

    def schedule(self, fire_at, kind, target, action, *args):
        if fire_at < self.now:
            raise SimulationError(
                PAST_SCHEDULE_MESSAGE.format(
                    kind=kind.value, target=target, fire_at=fire_at, now=self.now
                ),
                self._tail,
            )
        event = Event(fire_at, self._next_seq, kind, target, action, args)
        self._next_seq += 1
        self._live += 1
        heapq.heappush(self._queue, (fire_at, event.seq, event))
        return event

    def schedule_in(self, delay, kind, target, action, *args):
        return self.schedule(self.now + delay, kind, target, action, *args)

    def cancel(self, event):
        if event is None or event.cancelled or event.done:
            return
        event.cancelled = True
        self._live -= 1

    def stop(self):
        self._stopped = True

    def run_until(self, t_end):
        """Dispatch every event due at or before t_end; returns how many ran."""
        if t_end < self.now:
            raise SimulationError(
                RUN_BACKWARDS_MESSAGE.format(t_end=t_end, now=self.now), self._tail
            )
        count = self._dispatch(t_end)
        if count == 0 and not self._stopped:
            self.now = t_end
        return count

    def run(self):
        """Dispatch until the queue is exhausted or stop() is called."""
        return self._dispatch(None)

    def _dispatch(self, t_end):
        queue = self._queue
        count = 0
        self._stopped = False
        try:
            while queue and not self._stopped:
                if t_end is not None and queue[0][0] > t_end:
                    break
                fire_at, seq, event = heapq.heappop(queue)
                if event.cancelled:
                    continue
                self.now = fire_at
                event.done = True
                self._live -= 1
                if self._record:
                    self._write(f"{fire_at}\t{seq}\t{event.kind.value}\t{event.target}")
                event.action(*event.args)
                count += 1
        except SimulationError as exc:
            if not exc.trace_tail:
                exc.trace_tail = list(self._tail)
            logger.error("simulation aborted at %d ns: %s", self.now, exc)
            raise
        self.dispatched += count
        return count

    def annotate(self, kind, target):
        """Record a decision in the trace without dispatching anything."""
        if self._record:
            self._write(f"{self.now}\t-\t{kind}\t{target}")

    def _write(self, line):
        self._digest.update(line.encode("ascii"))
        self._digest.update(b"\n")
        self._tail.append(line)
        if self._trace_file is not None:
            self._trace_file.write(line)
            self._trace_file.write("\n")

    def fork_rng(self, label):
        if label in self._streams:
            raise ConfigurationError(DUPLICATE_STREAM_MESSAGE.format(label=label))
        stream = RngStream(self.seed, label)
        self._streams[label] = stream
        return stream
