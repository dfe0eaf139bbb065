"""Stable string hashing.

Python's builtin ``hash`` is salted per process, so every place that needs a
reproducible hash (feature hashing, per-document attack seeds) goes through
these helpers instead.
"""

from __future__ import annotations

import hashlib

_MASK64 = (1 << 64) - 1


def stable_hash(*parts: object, salt: str = "") -> int:
    """64-bit hash of the string forms of ``parts``, identical across runs."""
    h = hashlib.blake2b(digest_size=8, person=b"mgtd0001")
    h.update(salt.encode("utf-8"))
    for part in parts:
        h.update(b"\x1f")
        h.update(str(part).encode("utf-8"))
    return int.from_bytes(h.digest(), "little") & _MASK64


def bucket(value: str, size: int, salt: str = "") -> int:
    """Map a string to an index in ``[0, size)``."""
    return stable_hash(value, salt=salt) % size


def sign(value: str, salt: str = "sign") -> int:
    """Map a string to +1 or -1, independent of :func:`bucket`."""
    return 1 if stable_hash(value, salt=salt) & 1 else -1


def derive_seed(global_seed: int, *scope: object) -> int:
    """Per-scope RNG seed, e.g. ``derive_seed(seed, doc_id, attack_kind)``.

    Deriving seeds this way keeps outputs independent of the order in which
    documents are processed.
    """
    return stable_hash(global_seed, *scope, salt="seed")
