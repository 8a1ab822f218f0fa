import logging
from pathlib import Path

import numpy as np

from engine.exceptions import ConfigurationError

from .config import (
    CDF_DIR,
    CDF_END_MESSAGE,
    CDF_ORDER_MESSAGE,
    CDF_PRESETS,
    CDF_SHAPE_MESSAGE,
    UNKNOWN_CDF_MESSAGE,
)

logger = logging.getLogger(__name__)


class SizeCdf:
    """
    Empirical flow-size distribution given as (size, cumulative probability)
    points. Sampling is a step inverse: a uniform draw u maps to the first
    listed size whose cumulative probability is at least u.
    """

    def __init__(self, name, points):
        self.name = name
        sizes = np.array([int(s) for s, _ in points], dtype=np.int64)
        probs = np.array([float(p) for _, p in points], dtype=np.float64)
        if len(sizes) == 0:
            raise ConfigurationError(CDF_SHAPE_MESSAGE.format(name=name))
        if np.any(np.diff(sizes) <= 0) or np.any(np.diff(probs) <= 0):
            raise ConfigurationError(CDF_ORDER_MESSAGE.format(name=name))
        if sizes[0] <= 0 or probs[0] <= 0:
            raise ConfigurationError(CDF_ORDER_MESSAGE.format(name=name))
        if not np.isclose(probs[-1], 1.0):
            raise ConfigurationError(CDF_END_MESSAGE.format(name=name, last=probs[-1]))
        probs[-1] = 1.0
        self.sizes = sizes
        self.probs = probs

    def __repr__(self):
        return f"SizeCdf({self.name!r}, points={len(self.sizes)})"

    def __len__(self):
        return len(self.sizes)

    @property
    def points(self):
        return list(zip(self.sizes.tolist(), self.probs.tolist()))

    @property
    def masses(self):
        return np.diff(self.probs, prepend=0.0)

    def mean(self):
        return float(np.dot(self.sizes, self.masses))

    def scaled(self, factor):
        """Same shape with every size multiplied by factor (at least 1 byte)."""
        if factor == 1:
            return self
        sizes = np.maximum(1, np.round(self.sizes * factor)).astype(np.int64)
        # Collapse points that scaling made equal; keep the larger probability.
        points = {}
        for size, prob in zip(sizes.tolist(), self.probs.tolist()):
            points[size] = prob
        return SizeCdf(f"{self.name}x{factor:g}", sorted(points.items()))


def sample_flow_size(cdf, rng):
    u = rng.random()
    index = int(np.searchsorted(cdf.probs, u, side="left"))
    return int(cdf.sizes[min(index, len(cdf.sizes) - 1)])


def read_cdf(path, name=None):
    """Load a `size_bytes,cum_prob` CSV with a header row."""
    path = Path(path)
    name = name or path.stem
    try:
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError:
        raise ConfigurationError(CDF_SHAPE_MESSAGE.format(name=name))
    if table.shape[1] != 2:
        raise ConfigurationError(CDF_SHAPE_MESSAGE.format(name=name))
    cdf = SizeCdf(name, [(int(size), prob) for size, prob in table])
    logger.debug("loaded %r from %s (mean %.0f bytes)", cdf, path, cdf.mean())
    return cdf


def load_cdf(name_or_path):
    """Resolve a preset name (`alicloud`, `hadoop`, `ml-train`) or a CSV path."""
    if name_or_path in CDF_PRESETS:
        return read_cdf(CDF_DIR / CDF_PRESETS[name_or_path], name=name_or_path)
    path = Path(name_or_path)
    if not path.is_file():
        raise ConfigurationError(UNKNOWN_CDF_MESSAGE.format(name=name_or_path))
    return read_cdf(path)
