from dataclasses import dataclass, field

from engine.exceptions import ConfigurationError
from switchnet.hashing import ecmp_bucket

from .config import PORT_SPACE, ROCE_DST_PORT, TOO_FEW_PATHS_MESSAGE


@dataclass(frozen=True)
class PathProfileEntry:
    """Source ports that steer (src, dst) traffic onto distinct paths."""

    src: int
    dst: int
    ports: tuple = ()
    port_to_path: dict = field(default_factory=dict)
    path_links: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.ports)

    def path_of(self, port):
        return self.port_to_path.get(port)

    def port_for_path(self, path_id):
        for port, path in self.port_to_path.items():
            if path == path_id:
                return port
        return None


def path_for_port(topo, src, dst, src_port):
    """The path ECMP forwarding gives a data packet with this source port."""
    if topo.same_leaf(src, dst):
        return 0
    return ecmp_bucket(
        len(topo.spines),
        topo.address(src),
        topo.address(dst),
        src_port,
        ROCE_DST_PORT,
    )


def profile_source_ports(topo, src, dst, k):
    """Sweep source ports upward from 0 and keep the first port per new path."""
    if k == 0:
        return PathProfileEntry(src, dst)
    found = {}
    for port in range(PORT_SPACE):
        path = path_for_port(topo, src, dst, port)
        if path not in found:
            found[path] = port
            if len(found) == k:
                break
    if len(found) < k:
        raise ConfigurationError(
            TOO_FEW_PATHS_MESSAGE.format(k=k, src=src, dst=dst, achievable=len(found))
        )
    ports = tuple(found.values())
    return PathProfileEntry(
        src=src,
        dst=dst,
        ports=ports,
        port_to_path={port: path for path, port in found.items()},
        path_links={path: topo.path_links(src, dst, path) for path in found},
    )


class PathProfile:
    """Lazily profiled, per-pair view of every reachable path."""

    def __init__(self, topo):
        self.topo = topo
        self._entries = {}

    def entry(self, src, dst):
        key = (src, dst)
        if key not in self._entries:
            self._entries[key] = profile_source_ports(
                self.topo, src, dst, self.topo.path_count(src, dst)
            )
        return self._entries[key]

    def as_rows(self, src, dst):
        entry = self.entry(src, dst)
        return [
            {
                "src_port": port,
                "path_id": entry.port_to_path[port],
                "links": " ".join(
                    f"{link.src}->{link.dst}"
                    for link in entry.path_links[entry.port_to_path[port]]
                ),
            }
            for port in entry.ports
        ]
