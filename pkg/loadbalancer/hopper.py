from dataclasses import dataclass, field

import numpy as np

from engine.exceptions import ConfigurationError

from .config import PROBE_RTT_MESSAGE


@dataclass(frozen=True, slots=True)
class ProbeRecord:
    port: int
    rtt: int
    probed_at: int
    path: int = None

    def __post_init__(self):
        if self.rtt <= 0:
            raise ConfigurationError(PROBE_RTT_MESSAGE.format(value=self.rtt))

    def expired(self, now, ttl):
        return self.probed_at + ttl < now


@dataclass
class HopperState:
    """Per-flow detector, probe memory and epoch flags."""

    epoch_start: int = 0
    avg_rtt: float = 0.0
    probe_allowed: bool = True
    switch_allowed: bool = True
    probe_records: dict = field(default_factory=dict)
    pending_probes: dict = field(default_factory=dict)
    samples: list = field(default_factory=list)
    ack_index: int = 0
    inflight_count: int = 0
    current_port: int = None
    current_path: int = None
    above_probe: bool = False
    above_cong: bool = False
    epochs: int = 0
    last_decision: object = None


@dataclass(frozen=True, slots=True)
class SwitchDecision:
    port: int
    probed_rtt: int
    predicted_rtt: float
    delay: int


def update_rtt_estimate(s, new_rtt, alpha):
    if s.avg_rtt > 0:
        s.avg_rtt = alpha * new_rtt + (1.0 - alpha) * s.avg_rtt
    else:
        # First sample of the flow.
        s.avg_rtt = float(new_rtt)
    s.samples.append((s.ack_index, new_rtt))
    s.ack_index += 1
    return s.avg_rtt


def epoch_due(s, now, base_rtt):
    length = s.avg_rtt if s.avg_rtt > 0 else base_rtt
    return now - s.epoch_start >= length


def on_epoch_boundary(s, now, ttl):
    """Re-arm both one-shot flags and forget what the last epoch measured."""
    s.probe_allowed = True
    s.switch_allowed = True
    s.samples.clear()
    s.ack_index = 0
    s.epoch_start = now
    s.epochs += 1
    return purge_expired(s, now, ttl)


def purge_expired(s, now, ttl):
    """Drop stale probe records and lost probes; returns the dropped ports."""
    dropped = [p for p, r in s.probe_records.items() if r.expired(now, ttl)]
    for port in dropped:
        del s.probe_records[port]
    lost = [p for p, sent_at in s.pending_probes.items() if sent_at + ttl < now]
    for port in lost:
        del s.pending_probes[port]
    return dropped + lost


def eligible_probe_ports(s, entry, now, ttl):
    """Profiled ports off the current path not probed within ttl."""
    recent = {
        entry.path_of(port)
        for port, record in s.probe_records.items()
        if not record.expired(now, ttl)
    }
    recent.update(entry.path_of(port) for port in s.pending_probes)
    return [
        port
        for port in entry.ports
        if entry.path_of(port) != s.current_path and entry.path_of(port) not in recent
    ]


def probe_paths(s, entry, params, rng, now):
    """Power-of-two-choices: pick up to probe_fanout unexplored ports."""
    if not (s.avg_rtt > params.th_probe and s.probe_allowed):
        return []
    s.probe_allowed = False
    chosen = rng.sample(
        eligible_probe_ports(s, entry, now, params.ttl_probe), params.probe_fanout
    )
    for port in chosen:
        s.pending_probes[port] = now
    return chosen


def record_probe(s, port, rtt, now, path=None):
    sent_at = s.pending_probes.pop(port, now - rtt)
    record = ProbeRecord(port=port, rtt=rtt, probed_at=sent_at, path=path)
    s.probe_records[port] = record
    return record


def estimate_inflight_rtt(s):
    """
    Extrapolate this epoch's RTT trend to the last packet still in flight.

    RTT is regressed on the ACK index; the prediction is taken at the index
    the newest in-flight packet will be acknowledged with. A falling trend
    is never extrapolated and yields the latest measurement instead.
    """
    if len(s.samples) < 2:
        return float(s.avg_rtt)
    x = np.array([index for index, _ in s.samples], dtype=float)
    y = np.array([rtt for _, rtt in s.samples], dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    if slope < 0:
        return float(y[-1])
    return float(intercept + slope * (x[-1] + s.inflight_count))


def compute_switch_delay(predicted_old, probed_new):
    return max(0, round((predicted_old - probed_new) / 2))


def best_record(s, now, ttl):
    live = [r for r in s.probe_records.values() if not r.expired(now, ttl)]
    if not live:
        return None
    return min(live, key=lambda r: (r.rtt, r.port))


def select_and_switch(s, params, now):
    """Decide a migration once per epoch; None keeps the current path."""
    if not (s.avg_rtt > params.th_cong and s.switch_allowed):
        return None
    s.switch_allowed = False
    best = best_record(s, now, params.ttl_probe)
    if best is None or best.rtt >= params.delta_rtt * s.avg_rtt:
        s.last_decision = None
        return None
    predicted = estimate_inflight_rtt(s)
    delay = 0
    if params.delay_compensation:
        delay = compute_switch_delay(predicted, best.rtt)
    s.last_decision = SwitchDecision(best.port, best.rtt, predicted, delay)
    return s.last_decision


def flowbender_on_congestion(s, entry, params, rng):
    """Random reroute to another profiled path, once per epoch."""
    if not (s.avg_rtt > params.th_cong and s.switch_allowed):
        return None
    s.switch_allowed = False
    others = [port for port in entry.ports if entry.path_of(port) != s.current_path]
    if not others:
        return None
    return rng.choice(others)


def rps_assign(entry, rng):
    if len(entry.ports) == 1:
        return entry.ports[0]
    return rng.choice(entry.ports)
