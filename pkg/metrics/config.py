REPORT_VERSION = 1

# Nearest-rank percentiles reported per size bin.
PERCENTILES = (50, 95, 99)

FLOW_CSV_HEADER = (
    "flow_id",
    "size",
    "start_ns",
    "end_ns",
    "baseline_ns",
    "slowdown",
    "switches",
    "retx",
)

# Counters folded into the aggregate report besides the per-bin statistics.
GLOBAL_COUNTERS = (
    "flows_started",
    "flows_completed",
    "ooo_arrivals",
    "ooo_buffered",
    "nacks",
    "duplicates",
    "retransmits",
    "timeouts",
    "switches",
    "probes",
    "drops",
    "ecn_marks",
)

STATUS_OK = "ok"
STATUS_FAILED = "failed"
STATUS = (
    (STATUS_OK, "OK"),
    (STATUS_FAILED, "Failed"),
)

BAD_WINDOW_MESSAGE = "utilization window must be positive, got {window} ns"
BAD_RECORD_MESSAGE = (
    "flow {flow_id}: end {end} before start {start} "
    "or non-positive baseline {baseline}"
)
INCOMPLETE_RECORD_MESSAGE = "flow {flow_id} has not completed"
EMPTY_AGGREGATE_MESSAGE = "nothing to aggregate"
