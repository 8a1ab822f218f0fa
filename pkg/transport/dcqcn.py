from dataclasses import dataclass

from .config import (
    DCQCN_BYTE_COUNTER,
    DCQCN_CNP_INTERVAL_NS,
    DCQCN_FAST_RECOVERY_STEPS,
    DCQCN_G,
    DCQCN_MAX_CATCHUP_STEPS,
    DCQCN_MIN_RATE_BPS,
    DCQCN_RAI_BPS,
    DCQCN_RHAI_BPS,
    DCQCN_TIMER_NS,
)


@dataclass(frozen=True)
class DcqcnParams:
    g: float = DCQCN_G
    rai_bps: int = DCQCN_RAI_BPS
    rhai_bps: int = DCQCN_RHAI_BPS
    timer_ns: int = DCQCN_TIMER_NS
    alpha_timer_ns: int = DCQCN_TIMER_NS
    byte_counter: int = DCQCN_BYTE_COUNTER
    fast_recovery_steps: int = DCQCN_FAST_RECOVERY_STEPS
    min_rate_bps: int = DCQCN_MIN_RATE_BPS
    cnp_interval_ns: int = DCQCN_CNP_INTERVAL_NS


class RateState:
    """
    DCQCN reaction point driven by ECN echoes carried on ACKs.

    Timers are replayed lazily: whenever the flow is touched, every timer
    period that elapsed since the last touch is applied in order.
    """

    def __init__(self, line_rate, params, now=0):
        self.line_rate = line_rate
        self.params = params
        self.rate = float(line_rate)
        self.target = float(line_rate)
        self.alpha = 1.0
        self.timer_stage = 0
        self.byte_stage = 0
        self.bytes_since = 0
        self.last_timer = now
        self.last_alpha = now
        self.last_decrease = None
        self.cnp_in_period = False
        self.decreases = 0

    def advance(self, now):
        p = self.params
        periods = (now - self.last_alpha) // p.alpha_timer_ns
        if periods > 0:
            self.last_alpha += periods * p.alpha_timer_ns
            if self.cnp_in_period:
                periods -= 1
                self.cnp_in_period = False
            if periods > 0:
                self.alpha *= (1.0 - p.g) ** periods
        periods = (now - self.last_timer) // p.timer_ns
        if periods > 0:
            self.last_timer += periods * p.timer_ns
            for _ in range(min(periods, DCQCN_MAX_CATCHUP_STEPS)):
                if self.rate >= self.line_rate:
                    break
                self.timer_stage += 1
                self._increase()

    def on_ecn(self, now):
        """Rate cut on a congestion notification; returns True if applied."""
        self.advance(now)
        p = self.params
        last = self.last_decrease
        if p.cnp_interval_ns and last is not None and now - last < p.cnp_interval_ns:
            return False
        self.target = self.rate
        self.rate = max(float(p.min_rate_bps), self.rate * (1.0 - self.alpha / 2.0))
        self.alpha = (1.0 - p.g) * self.alpha + p.g
        self.timer_stage = 0
        self.byte_stage = 0
        self.bytes_since = 0
        self.last_timer = now
        self.last_alpha = now
        self.last_decrease = now
        self.cnp_in_period = True
        self.decreases += 1
        return True

    def on_bytes_sent(self, size):
        self.bytes_since += size
        while self.bytes_since >= self.params.byte_counter:
            self.bytes_since -= self.params.byte_counter
            if self.rate < self.line_rate:
                self.byte_stage += 1
                self._increase()

    def _increase(self):
        p = self.params
        fast = p.fast_recovery_steps
        if max(self.timer_stage, self.byte_stage) < fast:
            pass
        elif min(self.timer_stage, self.byte_stage) > fast:
            self.target += p.rhai_bps
        else:
            self.target += p.rai_bps
        self.target = min(self.target, float(self.line_rate))
        self.rate = min((self.rate + self.target) / 2.0, float(self.line_rate))
        if self.line_rate - self.rate < 1.0:
            self.rate = float(self.line_rate)

    def gap_ns(self, size):
        """Pacing interval for a size-byte packet at the current rate."""
        return -(-size * 8 * 1_000_000_000 // int(self.rate))
