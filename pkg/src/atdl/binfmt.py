"""Little-endian binary container shared by the batch, stats and checkpoint files.

Layout: ``magic | struct header | 32-byte config hash | payload``.  The
payload length is fully determined by the header, so truncation or a header
that disagrees with the payload is detected on load.
"""

import hashlib
import json
import struct

from .errors import FormatError

HASH_BYTES = 32


def config_hash(config):
    """SHA-256 of the canonical JSON encoding of a config mapping."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).digest()


def pack(magic, header_fmt, header, payload, chash=None):
    chash = chash if chash is not None else bytes(HASH_BYTES)
    if len(chash) != HASH_BYTES:
        raise ValueError("config hash must be 32 bytes")
    return magic + struct.pack(header_fmt, *header) + chash + payload


def unpack(blob, magic, header_fmt, payload_size):
    """Split ``blob`` into (header tuple, config hash, payload bytes).

    ``payload_size`` maps the header tuple to the expected payload byte count.
    """
    if not blob.startswith(magic):
        raise FormatError(f"bad magic: expected {magic!r}, got {blob[:len(magic)]!r}")
    hsize = struct.calcsize(header_fmt)
    start = len(magic)
    if len(blob) < start + hsize + HASH_BYTES:
        raise FormatError("file truncated inside the header")
    header = struct.unpack_from(header_fmt, blob, start)
    chash = blob[start + hsize:start + hsize + HASH_BYTES]
    payload = blob[start + hsize + HASH_BYTES:]
    expected = payload_size(header)
    if len(payload) != expected:
        raise FormatError(
            f"payload is {len(payload)} bytes but the header implies {expected}")
    return header, chash, payload
