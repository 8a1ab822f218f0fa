import logging
from dataclasses import dataclass

from engine.config import RNG_ECMP, RNG_ECN, RNG_WORKLOAD
from engine.kernel import EventKind, Simulator
from loadbalancer.balancers import build_balancers
from metrics.baseline import BaselineOracle
from metrics.records import FlowRecord
from metrics.report import build_report
from metrics.stats import data_byte_balance
from switchnet.network import SwitchNetwork
from topology.profiling import PathProfile
from transport.flowlog import NULL_LOG
from transport.host import Transport
from workload.config import MODE_COLLECTIVE
from workload.generators import build_schedule

logger = logging.getLogger(__name__)


@dataclass
class RunResult:
    seed: int
    report: dict
    records: list
    flows_started: int = 0
    trace_digest: str = ""


class Simulation:
    """
    One seeded run: fabric, hosts, balancers and workload wired onto a
    single event kernel.

    Timed workloads start each flow with a FLOW_START event. Collective
    workloads start round k+1 from the completion callback of the last
    flow of round k. The run ends once every flow has completed or at
    `run.max_time_ns`, whichever comes first.
    """

    def __init__(self, config, seed, trace_file=None, flow_log=None, oracle=None):
        self.config = config
        self.seed = seed
        self.topo = config.build_topology()
        self.sim = Simulator(seed, trace_file=trace_file)
        workload_rng = self.sim.fork_rng(RNG_WORKLOAD)
        self.network = SwitchNetwork(
            self.sim,
            self.topo,
            self.sim.fork_rng(RNG_ECN),
            ack_routing=config["switchnet"]["ack_routing"],
        )
        self.params = config.transport_params(self.topo)
        self.transport = Transport(
            self.sim,
            self.network,
            PathProfile(self.topo),
            self.params,
            build_balancers(config.hopper_params(self.topo), self.sim),
            config.scheme_name,
            self.sim.fork_rng(RNG_ECMP),
            flow_log or NULL_LOG,
        )
        self.transport.add_listener(self._on_flow_done)
        self.schedule = build_schedule(config.workload_spec(), self.topo, workload_rng)
        self.oracle = oracle or BaselineOracle(self.topo, self.params)
        self.flows = []
        self.snapshots = []
        self._round_left = 0
        self._round = 0

    # Workload injection

    def _start(self, spec):
        flow = spec.to_flow(self.sim.now)
        self.flows.append(flow)
        self.transport.start_flow(flow)

    def _start_round(self, index):
        members = self.schedule.rounds[index]
        self._round = index
        self._round_left = len(members)
        logger.debug("round %d starts at %d ns", index, self.sim.now)
        for spec in members:
            self._start(spec)

    def _on_flow_done(self, flow):
        if self.schedule.mode == MODE_COLLECTIVE and flow.round_index == self._round:
            self._round_left -= 1
            if self._round_left == 0 and self._round + 1 < len(self.schedule.rounds):
                nxt = self._round + 1
                self.sim.schedule(
                    self.sim.now,
                    EventKind.ROUND,
                    f"round:{nxt}",
                    self._start_round,
                    nxt,
                )
        if len(self.transport.completed) == len(self.schedule):
            self.sim.stop()

    def _snapshot(self, interval):
        classes = {}
        for q in self.network.queues:
            name = q.link.link_class
            classes[name] = classes.get(name, 0) + q.bytes_sent
        self.snapshots.append({"t_ns": self.sim.now, "bytes_by_class": classes})
        self.sim.schedule_in(
            interval, EventKind.SNAPSHOT, "metrics", self._snapshot, interval
        )

    # Execution

    def run(self):
        cfg = self.config
        if self.schedule.mode == MODE_COLLECTIVE:
            self.sim.schedule(0, EventKind.ROUND, "round:0", self._start_round, 0)
        else:
            for spec in self.schedule.flows:
                self.sim.schedule(
                    spec.start_ns,
                    EventKind.FLOW_START,
                    f"flow:{spec.flow_id}",
                    self._start,
                    spec,
                )
        interval = cfg["metrics"]["report_interval_ns"]
        if interval:
            self.sim.schedule(
                interval, EventKind.SNAPSHOT, "metrics", self._snapshot, interval
            )
        logger.info(
            "%s seed %d: %s on %s, %d flows",
            cfg.name,
            self.seed,
            cfg.scheme_name,
            self.topo.name,
            len(self.schedule),
        )
        if len(self.schedule):
            self.sim.run_until(cfg["run"]["max_time_ns"])
        self.network.check_conservation()
        return self._result()

    def _records(self):
        return [
            FlowRecord.from_flow(
                flow, self.oracle.fct(flow.size, flow.src, flow.dst, flow.chunk_bytes)
            )
            for flow in sorted(self.transport.completed, key=lambda f: f.flow_id)
        ]

    def counters(self):
        totals = self.transport.receiver_totals()
        totals.update(
            flows_started=len(self.flows),
            flows_completed=len(self.transport.completed),
            retransmits=sum(f.retransmits for f in self.flows),
            timeouts=self.transport.timeouts,
            switches=sum(f.switches for f in self.flows),
            probes=sum(f.probes for f in self.flows),
            drops=self.network.dropped,
            ecn_marks=sum(q.ecn_marks for q in self.network.queues),
        )
        return totals

    def _result(self):
        records = self._records()
        report = build_report(
            config=self.config.echo(self.topo),
            seed=self.seed,
            records=records,
            edges=self.config.bin_edges(),
            network=self.network,
            counters=self.counters(),
            window_ns=max(self.sim.now, 1),
            trace_digest=self.sim.trace_digest,
            flows=self.flows,
            snapshots=self.snapshots,
            data_bytes=data_byte_balance(self.network, self.flows),
        )
        incomplete = len(self.flows) - len(records)
        logger.info(
            "%s seed %d finished at %d ns: %d/%d flows complete",
            self.config.name,
            self.seed,
            self.sim.now,
            len(records),
            len(self.flows),
        )
        if incomplete:
            logger.info("%d flows still running at the end of the run", incomplete)
        return RunResult(
            self.seed, report, records, len(self.flows), self.sim.trace_digest
        )
