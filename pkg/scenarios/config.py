from pathlib import Path

PRESET_DIR = Path(__file__).resolve().parent / "presets"

BLOCKS = ("topology", "switchnet", "transport", "scheme", "workload", "metrics", "run")

DEFAULT_TOPOLOGY = "acceptance-symmetric"
DEFAULT_CDF = "alicloud"
DEFAULT_DURATION_NS = 1_000_000
DEFAULT_MAX_TIME_NS = 50_000_000
DEFAULT_RUN_NAME = "run"

# Shorthands accepted by `sweep --axis`.
AXIS_ALIASES = {
    "scheme": "scheme.name",
    "load": "workload.load",
    "chunk": "workload.chunk_bytes",
    "delay_compensation": "scheme.delay_compensation",
}
UNSWEEPABLE = ("run.", "workload.flows")

TRACE_FILE = "seed{seed}.trace"
FLOW_LOG_FILE = "seed{seed}.flows.log"
REPORT_FILE = "seed{seed}.json"
FLOW_CSV_FILE = "seed{seed}.flows.csv"
AGGREGATE_FILE = "aggregate.json"
SWEEP_FILE = "sweep.csv"
SWEEP_HEADER = ("value", "scheme", "bin", "avg", "p99")

UNKNOWN_BLOCK_MESSAGE = "unknown block [{block}]{line}{hint}"
UNKNOWN_KEY_MESSAGE = "unknown key '{path}'{line}{hint}"
BAD_VALUE_MESSAGE = "{path}: {error}"
NOT_A_TABLE_MESSAGE = "[{block}] must be a table"
UNREADABLE_CONFIG_MESSAGE = "cannot read config {path}: {error}"
BAD_TOML_MESSAGE = "{path}: {error}"
UNKNOWN_SCENARIO_MESSAGE = "unknown scenario preset '{name}'; available: {choices}"
PRESET_AND_SHAPE_MESSAGE = (
    "topology: give either a preset or hosts/leaves/spines, not both"
)
NEEDS_CONFIG_MESSAGE = "pass --config or --preset"
UNSWEEPABLE_MESSAGE = "'{axis}' cannot be swept"
RUN_FAILED_MESSAGE = "seed {seed} failed: {error}"
