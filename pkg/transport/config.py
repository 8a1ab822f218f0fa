MTU_BYTES = 1_000
ACK_BYTES = 64
PROBE_BYTES = 1_000
OOO_THRESHOLD = 30

RTO_MULTIPLIER = 3
# Floor taken from IRN's low retransmission timeout.
RTO_MIN_NS = 100_000
SRTT_GAIN = 0.125

# DCQCN reaction point defaults.
DCQCN_G = 1 / 256
DCQCN_RAI_BPS = 40_000_000
DCQCN_RHAI_BPS = 200_000_000
DCQCN_TIMER_NS = 55_000
DCQCN_BYTE_COUNTER = 10_000_000
DCQCN_FAST_RECOVERY_STEPS = 5
DCQCN_MIN_RATE_BPS = 100_000_000
# Echoes react one by one unless an interval is configured.
DCQCN_CNP_INTERVAL_NS = 0
# Upper bound on timer steps replayed at once after a long idle gap.
DCQCN_MAX_CATCHUP_STEPS = 4_096

PURPOSE_DATA = "data"
PURPOSE_PROBE = "probe"

EMPTY_FLOW_MESSAGE = "flow {flow_id} has no bytes to send"
