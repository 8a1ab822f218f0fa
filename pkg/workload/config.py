from pathlib import Path

MODE_POISSON = "poisson"
MODE_COLLECTIVE = "collective"
MODE_EXPLICIT = "explicit"
MODE_CHOICES = (
    (MODE_POISSON, MODE_POISSON),
    (MODE_COLLECTIVE, MODE_COLLECTIVE),
    (MODE_EXPLICIT, MODE_EXPLICIT),
)

CDF_DIR = Path(__file__).resolve().parent / "cdfs"
CDF_PRESETS = {
    "alicloud": "alicloud.csv",
    "hadoop": "hadoop.csv",
    "ml-train": "ml-train.csv",
}

# Upper edges of the slowdown size bins; the last bin is open-ended.
DATACENTER_BIN_EDGES = (2_000, 49_000, 1_000_000)
ML_BIN_EDGES = (2_000_000, 8_000_000, 32_000_000)
BIN_EDGES = {
    "alicloud": DATACENTER_BIN_EDGES,
    "hadoop": DATACENTER_BIN_EDGES,
    "ml-train": ML_BIN_EDGES,
}

# Desk-scale stand-in for the 204-flow training job: 51 rounds of 4 flows.
COLLECTIVE_PRESETS = {
    "gpt3-collective": {
        "rounds": 51,
        "flows_per_round": 4,
        "flow_size": 4_000_000,
        "chunk_bytes": 1_000_000,
    },
}

CDF_HEADER = ("size_bytes", "cum_prob")

UNKNOWN_CDF_MESSAGE = "unknown flow-size distribution '{name}'"
CDF_SHAPE_MESSAGE = "{name}: expected two columns size_bytes,cum_prob"
CDF_ORDER_MESSAGE = "{name}: sizes and probabilities must both strictly increase"
CDF_END_MESSAGE = "{name}: cumulative probability must end at 1.0, got {last}"
LOAD_RANGE_MESSAGE = "target_load must be in (0, 1), got {value}"
EMPTY_COLLECTIVE_MESSAGE = (
    "collective workload needs at least one round and one flow per round"
)
CHUNK_SIZE_MESSAGE = "chunk size {chunk} exceeds flow size {size}"
NO_PAIRS_MESSAGE = "topology '{name}' has no host pair to draw flows from"
NO_FLOWS_MESSAGE = "explicit workload lists no flows"
BAD_PAIR_MESSAGE = "flow {flow_id}: hosts {src} -> {dst} are not a valid distinct pair"
