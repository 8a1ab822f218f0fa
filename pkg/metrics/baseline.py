import logging

from engine.config import RNG_ECMP, RNG_ECN
from engine.exceptions import SimulationError
from engine.kernel import Simulator
from loadbalancer.balancers import EcmpBalancer
from loadbalancer.config import SCHEME_ECMP
from switchnet.config import ACK_ROUTING_SYMMETRIC
from switchnet.network import SwitchNetwork
from topology.profiling import PathProfile
from transport.host import Transport
from transport.packets import Flow

logger = logging.getLogger(__name__)


class BaselineOracle:
    """
    Unloaded completion times, measured by running each flow alone on an
    empty copy of the fabric.

    The flow is pinned to the pair's fastest path and its ACKs retrace that
    path. Results are memoized per (size, chunk, pair class) where the pair
    class is the same-leaf bit plus the best path's unloaded RTT, so every
    pair that looks alike to the fabric shares one simulation.
    """

    def __init__(self, topo, params):
        self.topo = topo
        self.params = params
        self.profile = PathProfile(topo)
        self._cache = {}
        self.simulations = 0

    def pair_class(self, src, dst):
        topo = self.topo
        path = topo.best_path(src, dst, self.params.mtu, self.params.ack_bytes)
        rtt = topo.unloaded_rtt(src, dst, path, self.params.mtu, self.params.ack_bytes)
        return topo.same_leaf(src, dst), rtt

    def fct(self, size, src, dst, chunk_bytes=None):
        key = (size, chunk_bytes, self.pair_class(src, dst))
        if key not in self._cache:
            self._cache[key] = self._simulate(size, src, dst, chunk_bytes)
        return self._cache[key]

    def _simulate(self, size, src, dst, chunk_bytes):
        sim = Simulator(0, record_trace=False)
        network = SwitchNetwork(
            sim, self.topo, sim.fork_rng(RNG_ECN), ack_routing=ACK_ROUTING_SYMMETRIC
        )
        transport = Transport(
            sim,
            network,
            self.profile,
            self.params,
            {SCHEME_ECMP: EcmpBalancer()},
            SCHEME_ECMP,
            sim.fork_rng(RNG_ECMP),
        )
        path = self.topo.best_path(src, dst, self.params.mtu, self.params.ack_bytes)
        flow = Flow(0, src, dst, size, 0, chunk_bytes=chunk_bytes, initial_path=path)
        transport.start_flow(flow)
        sim.run()
        if flow.end_ns is None:
            raise SimulationError(
                f"baseline flow {src}->{dst} of {size} bytes never completed"
            )
        self.simulations += 1
        logger.debug("baseline %d bytes %d->%d: %d ns", size, src, dst, flow.fct)
        return flow.fct

    def table(self, sizes, src, dst):
        return [(size, self.fct(size, src, dst)) for size in sizes]
