import struct
import zlib

from topology.config import UDP_PROTOCOL

_TUPLE = struct.Struct("!IIHHB")


def five_tuple_bytes(src_addr, dst_addr, src_port, dst_port, protocol=UDP_PROTOCOL):
    return _TUPLE.pack(src_addr, dst_addr, src_port, dst_port, protocol)


def ecmp_hash(src_addr, dst_addr, src_port, dst_port, protocol=UDP_PROTOCOL):
    """CRC32 over the network-order encoding of the 5-tuple."""
    return zlib.crc32(
        five_tuple_bytes(src_addr, dst_addr, src_port, dst_port, protocol)
    )


def ecmp_bucket(
    n_uplinks, src_addr, dst_addr, src_port, dst_port, protocol=UDP_PROTOCOL
):
    return ecmp_hash(src_addr, dst_addr, src_port, dst_port, protocol) % n_uplinks
