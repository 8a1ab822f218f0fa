GBPS = 1_000_000_000

DEFAULT_BANDWIDTH = 100 * GBPS
DEFAULT_LATENCY_NS = 1_000
DEFAULT_QUEUE_CAPACITY = 1_000_000
DEFAULT_ECN_KMIN = 100_000
DEFAULT_ECN_KMAX = 400_000
DEFAULT_ECN_PMAX = 0.05

# RoCEv2 rides on UDP; the destination port is fixed by the protocol.
ROCE_DST_PORT = 4791
UDP_PROTOCOL = 17
PORT_SPACE = 65536

TIER_LEAF = "leaf"
TIER_SPINE = "spine"
LINK_TIER_HOST = "host"
LINK_TIER_FABRIC = "fabric"

TESTBED_HOSTS = 8
TESTBED_LEAVES = 2
TESTBED_HOST_BANDWIDTH = 25 * GBPS
TESTBED_FAST_BANDWIDTH = 10 * GBPS
TESTBED_SLOW_BANDWIDTH = 1 * GBPS
TESTBED_FAST_SPINES = 4
TESTBED_SLOW_SPINES = 2

PRESETS = {
    "paper-symmetric": {
        "kind": "leaf-spine",
        "hosts": 128,
        "leaves": 8,
        "spines": 8,
    },
    "acceptance-symmetric": {
        "kind": "leaf-spine",
        "hosts": 32,
        "leaves": 4,
        "spines": 4,
    },
    "walkthrough": {
        "kind": "leaf-spine",
        "hosts": 8,
        "leaves": 2,
        "spines": 4,
    },
    "two-path": {
        "kind": "leaf-spine",
        "hosts": 4,
        "leaves": 2,
        "spines": 2,
        "spine_latency_ns": [4_000, 1_000],
    },
    "paper-testbed": {
        "kind": "testbed",
    },
}

INDIVISIBLE_HOSTS_MESSAGE = "{hosts} hosts cannot be split evenly over {leaves} leaves"
BAD_LINK_MESSAGE = "link {src}->{dst}: {reason}"
UNKNOWN_PRESET_MESSAGE = "unknown topology preset '{name}'"
TOO_FEW_PATHS_MESSAGE = (
    "asked for {k} distinct paths between host {src} and host {dst}, "
    "but only {achievable} are reachable"
)
