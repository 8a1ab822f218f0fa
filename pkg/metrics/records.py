from dataclasses import dataclass

from engine.exceptions import SimulationError

from .config import BAD_RECORD_MESSAGE, INCOMPLETE_RECORD_MESSAGE


@dataclass(frozen=True)
class FlowRecord:
    flow_id: int
    size: int
    start_ns: int
    end_ns: int
    baseline_ns: int
    switches: int = 0
    retransmits: int = 0
    probes: int = 0
    scheme: str = None
    round_index: int = None

    def __post_init__(self):
        if self.end_ns < self.start_ns or self.baseline_ns <= 0:
            raise SimulationError(
                BAD_RECORD_MESSAGE.format(
                    flow_id=self.flow_id,
                    end=self.end_ns,
                    start=self.start_ns,
                    baseline=self.baseline_ns,
                )
            )

    @property
    def fct(self):
        return self.end_ns - self.start_ns

    @property
    def slowdown(self):
        return self.fct / self.baseline_ns

    @classmethod
    def from_flow(cls, flow, baseline_ns):
        if flow.end_ns is None:
            raise SimulationError(
                INCOMPLETE_RECORD_MESSAGE.format(flow_id=flow.flow_id)
            )
        return cls(
            flow_id=flow.flow_id,
            size=flow.size,
            start_ns=flow.start_ns,
            end_ns=flow.end_ns,
            baseline_ns=baseline_ns,
            switches=flow.switches,
            retransmits=flow.retransmits,
            probes=flow.probes,
            scheme=flow.scheme,
            round_index=flow.round_index,
        )

    def as_row(self):
        return (
            self.flow_id,
            self.size,
            self.start_ns,
            self.end_ns,
            self.baseline_ns,
            f"{self.slowdown:.6f}",
            self.switches,
            self.retransmits,
        )
