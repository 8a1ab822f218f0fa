from dataclasses import dataclass

from engine.exceptions import ConfigurationError

from .config import (
    ALPHA_RANGE_MESSAGE,
    BASE_RTT_MESSAGE,
    DEFAULT_ALPHA,
    DEFAULT_DELTA_RTT,
    DEFAULT_TH_CONG,
    DEFAULT_TH_PROBE,
    DEFAULT_TTL_PROBE,
    DELTA_RANGE_MESSAGE,
    PROBE_FANOUT,
    THRESHOLD_ORDER_MESSAGE,
    TTL_MESSAGE,
)


@dataclass(frozen=True)
class HopperParams:
    """Detection, probing and switching knobs, all times in ns."""

    alpha: float
    th_probe: int
    th_cong: int
    ttl_probe: int
    delta_rtt: float
    base_rtt: int
    delay_compensation: bool = True
    probe_fanout: int = PROBE_FANOUT

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ConfigurationError(ALPHA_RANGE_MESSAGE.format(value=self.alpha))
        if not 0 < self.delta_rtt <= 1:
            raise ConfigurationError(DELTA_RANGE_MESSAGE.format(value=self.delta_rtt))
        if self.base_rtt <= 0:
            raise ConfigurationError(BASE_RTT_MESSAGE.format(value=self.base_rtt))
        if self.ttl_probe <= 0:
            raise ConfigurationError(TTL_MESSAGE.format(value=self.ttl_probe))
        if self.th_probe >= self.th_cong:
            raise ConfigurationError(
                THRESHOLD_ORDER_MESSAGE.format(
                    th_probe=self.th_probe, th_cong=self.th_cong
                )
            )

    @classmethod
    def from_base_rtt(
        cls,
        base_rtt,
        alpha=DEFAULT_ALPHA,
        th_probe=DEFAULT_TH_PROBE,
        th_cong=DEFAULT_TH_CONG,
        ttl_probe=DEFAULT_TTL_PROBE,
        delta_rtt=DEFAULT_DELTA_RTT,
        delay_compensation=True,
    ):
        """Thresholds given as multiples of base_rtt, e.g. 1.5 -> 12 us at 8 us."""
        return cls(
            alpha=alpha,
            th_probe=round(th_probe * base_rtt),
            th_cong=round(th_cong * base_rtt),
            ttl_probe=round(ttl_probe * base_rtt),
            delta_rtt=delta_rtt,
            base_rtt=base_rtt,
            delay_compensation=delay_compensation,
        )

    def as_dict(self):
        return {
            "alpha": self.alpha,
            "th_probe_ns": self.th_probe,
            "th_cong_ns": self.th_cong,
            "ttl_probe_ns": self.ttl_probe,
            "delta_rtt": self.delta_rtt,
            "base_rtt_ns": self.base_rtt,
            "delay_compensation": self.delay_compensation,
            "probe_fanout": self.probe_fanout,
        }
