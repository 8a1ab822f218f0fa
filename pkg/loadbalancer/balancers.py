import logging
from abc import ABC

from engine.config import RNG_FLOWBENDER, RNG_PROBE, RNG_RPS
from engine.exceptions import ConfigurationError
from topology.config import PORT_SPACE
from topology.profiling import path_for_port

from .config import (
    MARK_MIGRATE_SCHEDULED,
    MARK_TH_CONG,
    MARK_TH_PROBE,
    SCHEME_ECMP,
    SCHEME_FLOWBENDER,
    SCHEME_HOPPER,
    SCHEME_RPS,
    SCHEMES,
    UNKNOWN_SCHEME_MESSAGE,
)
from .hopper import (
    HopperState,
    epoch_due,
    flowbender_on_congestion,
    on_epoch_boundary,
    probe_paths,
    record_probe,
    rps_assign,
    select_and_switch,
    update_rtt_estimate,
)

logger = logging.getLogger(__name__)


class Balancer(ABC):
    """
    Path policy hooks called by the transport.

    The default is static ECMP: a random source port at flow start and no
    reaction afterwards.
    """

    name = SCHEME_ECMP
    any_port_samples = False

    def initial_port(self, transport, sender):
        flow = sender.flow
        if flow.initial_path is not None:
            entry = transport.profile.entry(flow.src, flow.dst)
            port = entry.port_for_path(flow.initial_path)
            if port is not None:
                return port
        return transport.port_rng.integers(PORT_SPACE)

    def data_port(self, transport, sender):
        return sender.port

    def on_flow_start(self, transport, sender, now):
        pass

    def on_rtt_sample(self, transport, sender, rtt, now):
        pass

    def on_probe_ack(self, transport, sender, port, rtt, now):
        pass

    def on_migrated(self, transport, sender, old_port, now):
        pass

    def on_flow_done(self, transport, sender, now):
        pass


class EcmpBalancer(Balancer):
    pass


class RpsBalancer(Balancer):
    name = SCHEME_RPS
    any_port_samples = True

    def __init__(self, rng):
        self.rng = rng

    def initial_port(self, transport, sender):
        flow = sender.flow
        return transport.profile.entry(flow.src, flow.dst).ports[0]

    def data_port(self, transport, sender):
        flow = sender.flow
        return rps_assign(transport.profile.entry(flow.src, flow.dst), self.rng)


class RttDetectorBalancer(Balancer):
    """Shared RTT detector: EWMA, one-RTT epochs and threshold annotations."""

    def __init__(self, params):
        self.params = params

    def on_flow_start(self, transport, sender, now):
        flow = sender.flow
        state = HopperState(epoch_start=now, current_port=sender.port)
        state.current_path = path_for_port(
            transport.topo, flow.src, flow.dst, sender.port
        )
        flow.lb_state = state

    def observe(self, transport, sender, rtt, now):
        s = sender.flow.lb_state
        params = self.params
        if epoch_due(s, now, params.base_rtt):
            for port in on_epoch_boundary(s, now, params.ttl_probe):
                transport.release_probe(sender, port)
        s.inflight_count = sender.inflight_packets
        avg = update_rtt_estimate(s, rtt, params.alpha)
        target = sender.flow.target
        if avg > params.th_probe and not s.above_probe:
            transport.sim.annotate(MARK_TH_PROBE, target)
            transport.log_flow(sender.flow.flow_id, MARK_TH_PROBE, f"avg={avg:.0f}")
        if avg > params.th_cong and not s.above_cong:
            transport.sim.annotate(MARK_TH_CONG, target)
            transport.log_flow(sender.flow.flow_id, MARK_TH_CONG, f"avg={avg:.0f}")
        s.above_probe = avg > params.th_probe
        s.above_cong = avg > params.th_cong
        if sender.pending_port is not None and avg <= params.th_probe:
            transport.cancel_migration(sender)
        return s

    def on_migrated(self, transport, sender, old_port, now):
        s = sender.flow.lb_state
        flow = sender.flow
        s.current_port = sender.port
        s.current_path = path_for_port(transport.topo, flow.src, flow.dst, sender.port)
        s.samples.clear()
        s.ack_index = 0


class FlowBenderBalancer(RttDetectorBalancer):
    name = SCHEME_FLOWBENDER

    def __init__(self, params, rng):
        super().__init__(params)
        self.rng = rng

    def on_rtt_sample(self, transport, sender, rtt, now):
        s = self.observe(transport, sender, rtt, now)
        if sender.migrating:
            return
        flow = sender.flow
        port = flowbender_on_congestion(
            s, transport.profile.entry(flow.src, flow.dst), self.params, self.rng
        )
        if port is not None:
            transport.sim.annotate(MARK_MIGRATE_SCHEDULED, f"{flow.target}:port={port}")
            transport.migrate_flow(sender, port, now)


class HopperBalancer(RttDetectorBalancer):
    """Probe two alternatives past th_probe, switch past th_cong with a delay."""

    name = SCHEME_HOPPER

    def __init__(self, params, rng):
        super().__init__(params)
        self.rng = rng

    def on_rtt_sample(self, transport, sender, rtt, now):
        s = self.observe(transport, sender, rtt, now)
        if sender.migrating:
            return
        flow = sender.flow
        entry = transport.profile.entry(flow.src, flow.dst)
        for port in probe_paths(s, entry, self.params, self.rng, now):
            transport.send_probe(sender, port)
        evaluated = s.avg_rtt > self.params.th_cong and s.switch_allowed
        decision = select_and_switch(s, self.params, now)
        if not evaluated:
            return
        if decision is None:
            for port in list(sender.probe_qps):
                if port not in s.pending_probes:
                    transport.release_probe(sender, port)
            return
        for port in list(sender.probe_qps):
            if port != decision.port and port not in s.pending_probes:
                transport.release_probe(sender, port)
        logger.debug(
            "flow %d switching to port %d in %d ns (predicted %.0f, probed %d)",
            flow.flow_id,
            decision.port,
            decision.delay,
            decision.predicted_rtt,
            decision.probed_rtt,
        )
        transport.sim.annotate(
            MARK_MIGRATE_SCHEDULED, f"{flow.target}:port={decision.port}"
        )
        transport.migrate_flow(sender, decision.port, now + decision.delay)

    def on_probe_ack(self, transport, sender, port, rtt, now):
        flow = sender.flow
        s = flow.lb_state
        if s is None or rtt <= 0:
            return
        path = transport.profile.entry(flow.src, flow.dst).path_of(port)
        record_probe(s, port, rtt, now, path)

    def on_migrated(self, transport, sender, old_port, now):
        super().on_migrated(transport, sender, old_port, now)
        s = sender.flow.lb_state
        record = s.probe_records.get(sender.port)
        if record is not None:
            s.avg_rtt = float(record.rtt)


def build_balancers(hopper_params, sim):
    """One balancer per scheme, each with its own RNG stream."""
    return {
        SCHEME_ECMP: EcmpBalancer(),
        SCHEME_RPS: RpsBalancer(sim.fork_rng(RNG_RPS)),
        SCHEME_FLOWBENDER: FlowBenderBalancer(
            hopper_params, sim.fork_rng(RNG_FLOWBENDER)
        ),
        SCHEME_HOPPER: HopperBalancer(hopper_params, sim.fork_rng(RNG_PROBE)),
    }


def check_scheme(scheme):
    if scheme not in SCHEMES:
        raise ConfigurationError(
            UNKNOWN_SCHEME_MESSAGE.format(scheme=scheme, choices=", ".join(SCHEMES))
        )
    return scheme
