NS_PER_US = 1_000
NS_PER_MS = 1_000_000
NS_PER_SEC = 1_000_000_000

# Recent trace lines kept for diagnostics when a run aborts.
TRACE_TAIL_LENGTH = 50

# Named random streams; one per concern so schemes never perturb each other.
RNG_WORKLOAD = "workload"
RNG_PROBE = "probe-selection"
RNG_ECMP = "ecmp-port-assignment"
RNG_FLOWBENDER = "flowbender-reroute"
RNG_RPS = "rps"
RNG_ECN = "ecn"

PAST_SCHEDULE_MESSAGE = (
    "cannot schedule {kind} for {target} at {fire_at} ns; clock is already at {now} ns"
)
DUPLICATE_STREAM_MESSAGE = "random stream '{label}' was already forked for this run"
RUN_BACKWARDS_MESSAGE = "run_until({t_end}) is before the current clock ({now})"
