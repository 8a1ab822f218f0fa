import math
from collections import defaultdict

import numpy as np

from engine.exceptions import ConfigurationError
from topology.config import LINK_TIER_FABRIC

from .config import BAD_WINDOW_MESSAGE, PERCENTILES


def nearest_rank(values, q):
    """The ceil(q/100 * n)-th smallest value; no interpolation."""
    values = np.asarray(values, dtype=np.float64)
    return float(np.percentile(values, q, method="inverted_cdf"))


def bin_labels(edges):
    """Human-readable labels for the bins delimited by the upper edges."""
    labels = []
    lower = 0
    for edge in edges:
        labels.append(f"{lower}-{edge}")
        lower = edge
    labels.append(f">{lower}")
    return labels


def bin_index(size, edges):
    """Index of the bin a flow of `size` bytes falls into; edges are inclusive."""
    return int(np.searchsorted(np.asarray(edges), size, side="left"))


def summarize(values):
    summary = {"count": len(values), "avg": float(np.mean(values))}
    for q in PERCENTILES:
        summary[f"p{q}"] = nearest_rank(values, q)
    return summary


def compute_slowdown_stats(records, edges):
    """
    Per-bin slowdown summary over completed flows. Bins without flows are
    left out of the result rather than reported as zero.
    """
    labels = bin_labels(edges)
    grouped = defaultdict(list)
    for record in records:
        grouped[bin_index(record.size, edges)].append(record.slowdown)
    stats = {}
    for index, label in enumerate(labels):
        if grouped[index]:
            stats[label] = summarize(grouped[index])
    if records:
        stats["all"] = summarize([r.slowdown for r in records])
    return stats


def link_utilization_report(network, window_ns):
    """Per-link and per-class utilization over a window of window_ns."""
    if window_ns <= 0:
        raise ConfigurationError(BAD_WINDOW_MESSAGE.format(window=window_ns))
    links = []
    by_class = defaultdict(lambda: [0, 0.0])
    for q in network.queues:
        link = q.link
        capacity_bits = link.bandwidth * window_ns / 1e9
        utilization = min(1.0, q.bytes_sent * 8 / capacity_bits)
        links.append(
            {
                "link": f"{link.src}->{link.dst}",
                "class": link.link_class,
                "tier": link.tier,
                "bytes": q.bytes_sent,
                "packets": q.packets_sent,
                "utilization": round(utilization, 6),
                "drops": q.drops,
                "ecn_marks": q.ecn_marks,
            }
        )
        if link.tier == LINK_TIER_FABRIC:
            by_class[link.link_class][0] += q.bytes_sent
            by_class[link.link_class][1] += capacity_bits
    classes = {
        name: {
            "bytes": total,
            "utilization": round(min(1.0, total * 8 / capacity), 6),
        }
        for name, (total, capacity) in sorted(by_class.items())
    }
    return {"window_ns": window_ns, "classes": classes, "links": links}


def spine_byte_shares(network):
    """
    Bytes carried on leaf-to-spine links per spine, and the max/min spread.

    A spine that carried nothing while others did makes the spread unbounded;
    the report keeps `spread` null and counts such spines in `idle_spines`.
    """
    topo = network.topo
    per_spine = [0] * len(topo.spines)
    for leaf_links in topo.leaf_uplinks:
        for spine, link in enumerate(leaf_links):
            per_spine[spine] += network.queues[link.link_id].bytes_sent
    total = sum(per_spine)
    shares = [b / total if total else 0.0 for b in per_spine]
    idle = sum(1 for b in per_spine if b == 0) if total else 0
    low = min(per_spine) if per_spine else 0
    spread = max(per_spine) / low if low else None
    return {
        "bytes": per_spine,
        "shares": [round(s, 6) for s in shares],
        "spread": spread,
        "idle_spines": idle,
    }


def spread_value(spine_bytes):
    """The spread as a number: infinite when some spine sat idle."""
    if spine_bytes.get("idle_spines"):
        return math.inf
    return spine_bytes["spread"]


def data_byte_balance(network, flows):
    """
    Ledger of DATA bytes at the host edges. Every transmission is delivered,
    dropped or still inside the fabric, so once all flows finish the
    delivered, dropped and in-fabric bytes add up to the completed flow
    sizes plus the retransmitted bytes.
    """
    delivered = network.data_bytes_delivered()
    dropped = network.data_bytes_dropped
    in_network = network.data_bytes_in_network()
    completed = sum(f.size for f in flows if f.completed)
    retransmitted = sum(f.retransmitted_bytes for f in flows)
    finished = all(f.completed for f in flows)
    return {
        "delivered": delivered,
        "completed_bytes": completed,
        "retransmitted_bytes": retransmitted,
        "dropped": dropped,
        "in_network": in_network,
        "balanced": finished
        and delivered + dropped + in_network == completed + retransmitted,
    }


def round_durations(flows):
    """Duration of each collective round: first start to last completion."""
    spans = {}
    for flow in flows:
        if flow.round_index is None or flow.end_ns is None:
            continue
        start, end = spans.get(flow.round_index, (flow.start_ns, flow.end_ns))
        spans[flow.round_index] = (min(start, flow.start_ns), max(end, flow.end_ns))
    durations = [end - start for _, (start, end) in sorted(spans.items())]
    total = None
    if spans:
        first = min(start for start, _ in spans.values())
        total = max(end for _, end in spans.values()) - first
    return {"rounds": len(durations), "durations_ns": durations, "total_ns": total}
