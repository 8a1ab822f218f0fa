from django import forms

from loadbalancer.config import (
    DEFAULT_ALPHA,
    DEFAULT_DELTA_RTT,
    DEFAULT_TH_CONG,
    DEFAULT_TH_PROBE,
    DEFAULT_TTL_PROBE,
    PROBE_FANOUT,
    SCHEME_CHOICES,
    SCHEME_HOPPER,
    THRESHOLD_ORDER_MESSAGE,
)
from switchnet.config import ACK_ROUTING_CHOICES, ACK_ROUTING_REVERSED
from topology.config import (
    DEFAULT_ECN_KMAX,
    DEFAULT_ECN_KMIN,
    DEFAULT_ECN_PMAX,
    DEFAULT_LATENCY_NS,
    DEFAULT_QUEUE_CAPACITY,
    PRESETS,
)
from transport.config import (
    ACK_BYTES,
    DCQCN_BYTE_COUNTER,
    DCQCN_CNP_INTERVAL_NS,
    DCQCN_G,
    DCQCN_MIN_RATE_BPS,
    DCQCN_RAI_BPS,
    DCQCN_RHAI_BPS,
    DCQCN_TIMER_NS,
    MTU_BYTES,
    OOO_THRESHOLD,
    PROBE_BYTES,
    RTO_MIN_NS,
    RTO_MULTIPLIER,
)
from workload.config import (
    COLLECTIVE_PRESETS,
    LOAD_RANGE_MESSAGE,
    MODE_CHOICES,
    MODE_COLLECTIVE,
    MODE_POISSON,
)

from .config import (
    DEFAULT_CDF,
    DEFAULT_DURATION_NS,
    DEFAULT_MAX_TIME_NS,
    DEFAULT_RUN_NAME,
    DEFAULT_TOPOLOGY,
    PRESET_AND_SHAPE_MESSAGE,
)


class ListField(forms.Field):
    """A TOML array of numbers."""

    def __init__(self, *args, item_type=int, min_value=None, **kwargs):
        self.item_type = item_type
        self.min_value = min_value
        kwargs.setdefault("required", False)
        super().__init__(*args, **kwargs)

    def to_python(self, value):
        if value in self.empty_values:
            return []
        if not isinstance(value, (list, tuple)):
            raise forms.ValidationError("expected a list")
        items = []
        for item in value:
            if isinstance(item, bool) or not isinstance(item, (int, float)):
                raise forms.ValidationError(f"list item {item!r} is not a number")
            item = self.item_type(item)
            if self.min_value is not None and item < self.min_value:
                raise forms.ValidationError(
                    f"list item {item} is below {self.min_value}"
                )
            items.append(item)
        return items


def optional_int(min_value=0):
    return forms.IntegerField(required=False, min_value=min_value)


def flag(initial):
    return forms.BooleanField(required=False, initial=initial)


class BlockForm(forms.Form):
    """
    One config block. Field `initial` values are the documented defaults and
    are merged under the file's values before validation.
    """

    @classmethod
    def bind(cls, raw):
        data = {
            name: field.initial
            for name, field in cls.base_fields.items()
            if field.initial is not None
        }
        data.update(raw)
        return cls(data)

    def effective(self):
        return {
            name: (None if value == "" else value)
            for name, value in self.cleaned_data.items()
        }


class TopologyForm(BlockForm):
    preset = forms.ChoiceField(
        choices=[("", "")] + [(name, name) for name in PRESETS], required=False
    )
    hosts = optional_int(1)
    leaves = optional_int(1)
    spines = optional_int(1)
    spine_latency_ns = ListField(min_value=1)
    bandwidth_gbps = forms.FloatField(min_value=0.001, initial=100.0)
    latency_ns = forms.IntegerField(min_value=1, initial=DEFAULT_LATENCY_NS)
    queue_capacity = forms.IntegerField(min_value=1, initial=DEFAULT_QUEUE_CAPACITY)
    ecn_kmin = forms.IntegerField(min_value=0, initial=DEFAULT_ECN_KMIN)
    ecn_kmax = forms.IntegerField(min_value=1, initial=DEFAULT_ECN_KMAX)
    ecn_pmax = forms.FloatField(min_value=0.0, max_value=1.0, initial=DEFAULT_ECN_PMAX)

    def clean(self):
        cleaned_data = super(TopologyForm, self).clean()
        shape = [cleaned_data.get(k) for k in ("hosts", "leaves", "spines")]
        if cleaned_data.get("preset") and any(v is not None for v in shape):
            raise forms.ValidationError(PRESET_AND_SHAPE_MESSAGE)
        if any(v is not None for v in shape) and not all(v is not None for v in shape):
            raise forms.ValidationError(
                "hosts, leaves and spines must be given together"
            )
        if not cleaned_data.get("preset") and shape[0] is None:
            cleaned_data["preset"] = DEFAULT_TOPOLOGY
        return cleaned_data


class SwitchnetForm(BlockForm):
    ack_routing = forms.ChoiceField(
        choices=ACK_ROUTING_CHOICES, initial=ACK_ROUTING_REVERSED
    )


class TransportForm(BlockForm):
    mtu = forms.IntegerField(min_value=64, initial=MTU_BYTES)
    ack_bytes = forms.IntegerField(min_value=1, initial=ACK_BYTES)
    probe_bytes = forms.IntegerField(min_value=1, initial=PROBE_BYTES)
    ooo_threshold = forms.IntegerField(min_value=0, initial=OOO_THRESHOLD)
    bdp_bytes = optional_int(1)
    rto_min_ns = forms.IntegerField(min_value=1, initial=RTO_MIN_NS)
    rto_multiplier = forms.IntegerField(min_value=1, initial=RTO_MULTIPLIER)
    dcqcn = flag(True)
    dcqcn_g = forms.FloatField(min_value=0.0, max_value=1.0, initial=DCQCN_G)
    dcqcn_timer_ns = forms.IntegerField(min_value=1, initial=DCQCN_TIMER_NS)
    dcqcn_rai_mbps = forms.IntegerField(
        min_value=0, initial=DCQCN_RAI_BPS // 1_000_000
    )
    dcqcn_rhai_mbps = forms.IntegerField(
        min_value=0, initial=DCQCN_RHAI_BPS // 1_000_000
    )
    dcqcn_byte_counter = forms.IntegerField(min_value=1, initial=DCQCN_BYTE_COUNTER)
    dcqcn_cnp_interval_ns = forms.IntegerField(
        min_value=0, initial=DCQCN_CNP_INTERVAL_NS
    )
    dcqcn_min_rate_mbps = forms.IntegerField(
        min_value=1, initial=DCQCN_MIN_RATE_BPS // 1_000_000
    )


class SchemeForm(BlockForm):
    name = forms.ChoiceField(choices=SCHEME_CHOICES, initial=SCHEME_HOPPER)
    alpha = forms.FloatField(initial=DEFAULT_ALPHA)
    th_probe = forms.FloatField(min_value=0.0, initial=DEFAULT_TH_PROBE)
    th_cong = forms.FloatField(min_value=0.0, initial=DEFAULT_TH_CONG)
    ttl_probe = forms.FloatField(initial=DEFAULT_TTL_PROBE)
    delta_rtt = forms.FloatField(initial=DEFAULT_DELTA_RTT)
    base_rtt_ns = optional_int(1)
    delay_compensation = flag(True)
    probe_fanout = forms.IntegerField(min_value=1, initial=PROBE_FANOUT)

    def clean(self):
        cleaned_data = super(SchemeForm, self).clean()
        th_probe = cleaned_data.get("th_probe")
        th_cong = cleaned_data.get("th_cong")
        if th_probe is not None and th_cong is not None and th_probe >= th_cong:
            raise forms.ValidationError(
                THRESHOLD_ORDER_MESSAGE.format(th_probe=th_probe, th_cong=th_cong)
            )
        return cleaned_data


class WorkloadForm(BlockForm):
    mode = forms.ChoiceField(choices=MODE_CHOICES, initial=MODE_POISSON)
    cdf = forms.CharField(initial=DEFAULT_CDF)
    size_scale = forms.FloatField(min_value=1e-9, initial=1.0)
    load = forms.FloatField(initial=0.5)
    duration_ns = forms.IntegerField(min_value=1, initial=DEFAULT_DURATION_NS)
    collective = forms.ChoiceField(
        choices=[("", "")] + [(name, name) for name in COLLECTIVE_PRESETS],
        required=False,
    )
    rounds = optional_int(0)
    flows_per_round = optional_int(0)
    flow_size = optional_int(1)
    chunk_bytes = optional_int(1)
    round_sizes = ListField(min_value=1)
    cross_leaf_only = flag(False)

    def clean(self):
        cleaned_data = super(WorkloadForm, self).clean()
        mode = cleaned_data.get("mode")
        load = cleaned_data.get("load")
        if mode == MODE_POISSON and load is not None and not 0 < load < 1:
            raise forms.ValidationError(LOAD_RANGE_MESSAGE.format(value=load))
        if mode == MODE_COLLECTIVE and cleaned_data.get("collective"):
            for key, value in COLLECTIVE_PRESETS[cleaned_data["collective"]].items():
                if cleaned_data.get(key) is None:
                    cleaned_data[key] = value
        return cleaned_data


class FlowEntryForm(BlockForm):
    src = forms.IntegerField(min_value=0)
    dst = forms.IntegerField(min_value=0)
    size = forms.IntegerField(min_value=1)
    start_ns = forms.IntegerField(min_value=0, initial=0)
    chunk_bytes = optional_int(1)
    initial_path = optional_int(0)
    scheme = forms.ChoiceField(
        choices=[("", "")] + list(SCHEME_CHOICES), required=False
    )


class MetricsForm(BlockForm):
    bins = ListField(min_value=1)
    report_interval_ns = forms.IntegerField(min_value=0, initial=0)
    flow_csv = flag(True)

    def clean_bins(self):
        bins = self.cleaned_data["bins"]
        if any(b >= a for a, b in zip(bins[1:], bins)):
            raise forms.ValidationError("bin edges must strictly increase")
        return bins


class RunForm(BlockForm):
    name = forms.CharField(max_length=100, initial=DEFAULT_RUN_NAME)
    seeds = ListField(min_value=0, initial=[1])
    max_time_ns = forms.IntegerField(min_value=1, initial=DEFAULT_MAX_TIME_NS)
    output_dir = forms.CharField(required=False)
    trace = flag(False)
    flow_log = flag(False)
    persist = flag(False)


BLOCK_FORMS = {
    "topology": TopologyForm,
    "switchnet": SwitchnetForm,
    "transport": TransportForm,
    "scheme": SchemeForm,
    "workload": WorkloadForm,
    "metrics": MetricsForm,
    "run": RunForm,
}
