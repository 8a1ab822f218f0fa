import copy
import difflib
import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import tomli

from engine.exceptions import ConfigurationError
from loadbalancer.params import HopperParams
from topology.config import GBPS
from topology.fabric import LinkTemplate, build_leaf_spine, build_preset
from transport.dcqcn import DcqcnParams
from transport.host import TransportParams
from workload.cdf import load_cdf
from workload.config import BIN_EDGES, DATACENTER_BIN_EDGES, MODE_POISSON
from workload.generators import WorkloadSpec

from .config import (
    AXIS_ALIASES,
    BAD_TOML_MESSAGE,
    BAD_VALUE_MESSAGE,
    BLOCKS,
    NOT_A_TABLE_MESSAGE,
    PRESET_DIR,
    UNKNOWN_BLOCK_MESSAGE,
    UNKNOWN_KEY_MESSAGE,
    UNKNOWN_SCENARIO_MESSAGE,
    UNREADABLE_CONFIG_MESSAGE,
    UNSWEEPABLE,
    UNSWEEPABLE_MESSAGE,
)
from .forms import BLOCK_FORMS, FlowEntryForm

logger = logging.getLogger(__name__)

_HEADER = re.compile(r"^\s*\[\[?\s*([A-Za-z0-9_.\-]+)\s*\]\]?")


def _line_of(text, table, key=None):
    """1-based line of `key` inside `table` (or of the table header itself)."""
    current = None
    assignment = rf"^\s*{re.escape(key)}\s*=" if key is not None else None
    for number, line in enumerate(text.splitlines(), start=1):
        header = _HEADER.match(line)
        if header:
            current = header.group(1)
            if key is None and current == table:
                return number
            continue
        if assignment and current == table and re.match(assignment, line):
            return number
    return None


def _where(text, table, key=None):
    number = _line_of(text, table, key) if text else None
    return f" (line {number})" if number else ""


def _hint(name, choices):
    close = difflib.get_close_matches(name, list(choices), n=1)
    return f"; did you mean '{close[0]}'?" if close else ""


def _form_errors(prefix, form):
    messages = []
    for name, errors in form.errors.items():
        path = prefix if name == "__all__" else f"{prefix}.{name}"
        messages.append(BAD_VALUE_MESSAGE.format(path=path, error=" ".join(errors)))
    return "; ".join(messages)


def _check_keys(raw, allowed, table, text):
    for key in raw:
        if key not in allowed:
            raise ConfigurationError(
                UNKNOWN_KEY_MESSAGE.format(
                    path=f"{table}.{key}",
                    line=_where(text, table, key),
                    hint=_hint(key, allowed),
                )
            )


@dataclass
class RunConfig:
    """A validated run configuration with every default filled in."""

    raw: dict
    blocks: dict
    flows: list = field(default_factory=list)
    source: str = "<config>"

    @classmethod
    def from_dict(cls, raw, text="", source="<config>"):
        for block, values in raw.items():
            if block not in BLOCKS:
                raise ConfigurationError(
                    UNKNOWN_BLOCK_MESSAGE.format(
                        block=block, line=_where(text, block), hint=_hint(block, BLOCKS)
                    )
                )
            if not isinstance(values, dict):
                raise ConfigurationError(NOT_A_TABLE_MESSAGE.format(block=block))
        blocks = {}
        flows = []
        for block in BLOCKS:
            values = dict(raw.get(block, {}))
            form_class = BLOCK_FORMS[block]
            entries = values.pop("flows", []) if block == "workload" else []
            _check_keys(values, form_class.base_fields, block, text)
            form = form_class.bind(values)
            if not form.is_valid():
                raise ConfigurationError(_form_errors(block, form))
            blocks[block] = form.effective()
            for index, entry in enumerate(entries):
                _check_keys(entry, FlowEntryForm.base_fields, "workload.flows", text)
                entry_form = FlowEntryForm.bind(entry)
                if not entry_form.is_valid():
                    prefix = f"workload.flows[{index}]"
                    raise ConfigurationError(_form_errors(prefix, entry_form))
                flows.append(entry_form.effective())
        return cls(raw=copy.deepcopy(raw), blocks=blocks, flows=flows, source=source)

    # Accessors

    def __getitem__(self, block):
        return self.blocks[block]

    @property
    def name(self):
        return self.blocks["run"]["name"]

    @property
    def seeds(self):
        return self.blocks["run"]["seeds"] or [1]

    @property
    def scheme_name(self):
        return self.blocks["scheme"]["name"]

    def build_topology(self):
        t = self.blocks["topology"]
        link = LinkTemplate(
            bandwidth=int(t["bandwidth_gbps"] * GBPS),
            latency_ns=t["latency_ns"],
            queue_capacity=t["queue_capacity"],
            ecn_kmin=t["ecn_kmin"],
            ecn_kmax=t["ecn_kmax"],
            ecn_pmax=t["ecn_pmax"],
        )
        if t["preset"]:
            return build_preset(t["preset"], link=link)
        return build_leaf_spine(
            t["hosts"],
            t["leaves"],
            t["spines"],
            link=link,
            spine_latency_ns=t["spine_latency_ns"] or None,
        )

    def transport_params(self, topo):
        t = self.blocks["transport"]
        return TransportParams(
            mtu=t["mtu"],
            ack_bytes=t["ack_bytes"],
            probe_bytes=t["probe_bytes"],
            ooo_threshold=t["ooo_threshold"],
            bdp_bytes=t["bdp_bytes"] or topo.bdp_bytes(),
            base_rtt_ns=topo.base_rtt(),
            rto_multiplier=t["rto_multiplier"],
            rto_min_ns=t["rto_min_ns"],
            dcqcn_enabled=t["dcqcn"],
            dcqcn=DcqcnParams(
                g=t["dcqcn_g"],
                rai_bps=t["dcqcn_rai_mbps"] * 1_000_000,
                rhai_bps=t["dcqcn_rhai_mbps"] * 1_000_000,
                timer_ns=t["dcqcn_timer_ns"],
                alpha_timer_ns=t["dcqcn_timer_ns"],
                byte_counter=t["dcqcn_byte_counter"],
                cnp_interval_ns=t["dcqcn_cnp_interval_ns"],
                min_rate_bps=t["dcqcn_min_rate_mbps"] * 1_000_000,
            ),
        )

    def hopper_params(self, topo):
        s = self.blocks["scheme"]
        params = HopperParams.from_base_rtt(
            s["base_rtt_ns"] or topo.base_rtt(),
            alpha=s["alpha"],
            th_probe=s["th_probe"],
            th_cong=s["th_cong"],
            ttl_probe=s["ttl_probe"],
            delta_rtt=s["delta_rtt"],
            delay_compensation=s["delay_compensation"],
        )
        return replace(params, probe_fanout=s["probe_fanout"])

    def size_cdf(self):
        w = self.blocks["workload"]
        return load_cdf(w["cdf"]).scaled(w["size_scale"])

    def workload_spec(self):
        w = self.blocks["workload"]
        return WorkloadSpec(
            mode=w["mode"],
            cdf=self.size_cdf() if w["mode"] == MODE_POISSON else None,
            target_load=w["load"],
            duration_ns=w["duration_ns"],
            rounds=w["rounds"] or 0,
            flows_per_round=w["flows_per_round"] or 0,
            flow_size=w["flow_size"] or 0,
            chunk_bytes=w["chunk_bytes"],
            round_sizes=tuple(w["round_sizes"]),
            cross_leaf_only=w["cross_leaf_only"],
            flows=list(self.flows),
        )

    def bin_edges(self):
        bins = self.blocks["metrics"]["bins"]
        if bins:
            return tuple(bins)
        w = self.blocks["workload"]
        if w["mode"] != MODE_POISSON:
            return DATACENTER_BIN_EDGES
        edges = BIN_EDGES.get(w["cdf"], DATACENTER_BIN_EDGES)
        return tuple(max(1, round(e * w["size_scale"])) for e in edges)

    def echo(self, topo=None):
        """Every effective parameter, defaults included, in a stable order."""
        echo = {block: dict(self.blocks[block]) for block in BLOCKS}
        echo["workload"]["flows"] = [dict(f) for f in self.flows]
        if topo is not None:
            echo["effective"] = {
                "topology": topo.name,
                "base_rtt_ns": topo.base_rtt(),
                "bdp_bytes": self.transport_params(topo).bdp_bytes,
                "hopper": self.hopper_params(topo).as_dict(),
                "bins": list(self.bin_edges()),
            }
        return echo

    # Variants

    def with_value(self, axis, value):
        """A copy with one `block.key` replaced, validated again."""
        path = AXIS_ALIASES.get(axis, axis)
        if any(path.startswith(prefix) for prefix in UNSWEEPABLE) or "." not in path:
            raise ConfigurationError(UNSWEEPABLE_MESSAGE.format(axis=axis))
        block, key = path.split(".", 1)
        if block not in BLOCK_FORMS or key not in BLOCK_FORMS[block].base_fields:
            raise ConfigurationError(UNSWEEPABLE_MESSAGE.format(axis=axis))
        raw = copy.deepcopy(self.raw)
        raw.setdefault(block, {})[key] = value
        return RunConfig.from_dict(raw, source=self.source)

    def with_run(self, **overrides):
        raw = copy.deepcopy(self.raw)
        raw.setdefault("run", {}).update(overrides)
        return RunConfig.from_dict(raw, source=self.source)


def parse_config_text(text, source="<config>"):
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigurationError(BAD_TOML_MESSAGE.format(path=source, error=exc))
    return RunConfig.from_dict(raw, text=text, source=source)


def parse_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(UNREADABLE_CONFIG_MESSAGE.format(path=path, error=exc))
    config = parse_config_text(text, source=str(path))
    logger.debug("loaded config %s", path)
    return config


def preset_names():
    return sorted(p.stem for p in PRESET_DIR.glob("*.toml"))


def load_preset(name):
    path = PRESET_DIR / f"{name}.toml"
    if not path.is_file():
        raise ConfigurationError(
            UNKNOWN_SCENARIO_MESSAGE.format(
                name=name, choices=", ".join(preset_names())
            )
        )
    return parse_config(path)


def parse_value(text):
    """Read a CLI value the way TOML would, falling back to a bare string."""
    try:
        return tomli.loads(f"v = {text}")["v"]
    except tomli.TOMLDecodeError:
        return text
