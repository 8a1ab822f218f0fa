SCHEME_ECMP = "ecmp"
SCHEME_RPS = "rps"
SCHEME_FLOWBENDER = "flowbender"
SCHEME_HOPPER = "hopper"
SCHEMES = (SCHEME_ECMP, SCHEME_RPS, SCHEME_FLOWBENDER, SCHEME_HOPPER)
SCHEME_CHOICES = tuple((scheme, scheme) for scheme in SCHEMES)

# Hopper defaults; thresholds are multiples of the fabric's base RTT.
DEFAULT_ALPHA = 1.0
DEFAULT_TH_PROBE = 1.5
DEFAULT_TH_CONG = 2.5
DEFAULT_TTL_PROBE = 4.0
DEFAULT_DELTA_RTT = 0.8
PROBE_FANOUT = 2

# Trace annotation kinds.
MARK_TH_PROBE = "th_probe"
MARK_TH_CONG = "th_cong"
MARK_MIGRATE_SCHEDULED = "migrate_scheduled"

ALPHA_RANGE_MESSAGE = "alpha must be in (0, 1], got {value}"
DELTA_RANGE_MESSAGE = "delta_rtt must be in (0, 1], got {value}"
THRESHOLD_ORDER_MESSAGE = (
    "th_probe ({th_probe} ns) must be below th_cong ({th_cong} ns)"
)
TTL_MESSAGE = "ttl_probe must be positive, got {value}"
BASE_RTT_MESSAGE = "base_rtt must be positive, got {value}"
PROBE_RTT_MESSAGE = "probe rtt must be positive, got {value}"
UNKNOWN_SCHEME_MESSAGE = "unknown scheme {scheme!r}; choose one of {choices}"
