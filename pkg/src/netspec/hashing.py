"""FNV-1a 64-bit hashing, used for embedding buckets and content fingerprints."""

from __future__ import annotations

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a_64(data: bytes) -> int:
    """Hash a byte string with FNV-1a (64-bit)."""
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def content_hash(text: str) -> str:
    """Hex fingerprint of a UTF-8 text, used to key embedding caches and dedupe seeds."""
    return f"{fnv1a_64(text.encode('utf-8')):016x}"
