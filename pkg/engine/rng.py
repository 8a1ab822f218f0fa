import hashlib

import numpy as np


def label_key(label):
    """Stable 64-bit key for a stream label, independent of PYTHONHASHSEED."""
    return int.from_bytes(hashlib.sha256(label.encode("utf-8")).digest()[:8], "big")


class RngStream:
    """
    Deterministic random stream derived from (root seed, label).

    PCG64 seeded through a SeedSequence gives the same draws on every platform,
    and two labels never share state.
    """

    def __init__(self, root_seed, label):
        self.label = label
        self.root_seed = root_seed
        seed_sequence = np.random.SeedSequence(
            entropy=root_seed, spawn_key=(label_key(label),)
        )
        self._generator = np.random.Generator(np.random.PCG64(seed_sequence))

    def __repr__(self):
        return f"RngStream(seed={self.root_seed}, label={self.label!r})"

    def random(self):
        return float(self._generator.random())

    def integers(self, high):
        """Uniform integer in [0, high)."""
        return int(self._generator.integers(high))

    def choice(self, items):
        return items[self.integers(len(items))]

    def sample(self, items, k):
        """k distinct items, uniformly without replacement, in draw order."""
        k = min(k, len(items))
        if k == 0:
            return []
        indices = self._generator.choice(len(items), size=k, replace=False)
        return [items[int(i)] for i in indices]

    def exponential(self, mean):
        return float(self._generator.exponential(mean))
