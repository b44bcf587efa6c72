"""Stable seeded draws: pure functions of their string parts.

Built on BLAKE2b so values are identical across processes and platforms,
unlike the builtin hash(). The synthetic oracle and reference selection use
these so that call order, batching, and threading can never change outcomes.
"""

from __future__ import annotations

import hashlib
import math

_SEP = b"\x1f"
_TWO64 = 2.0**64


def stable_digest(*parts: str, size: int = 16) -> bytes:
    hasher = hashlib.blake2b(digest_size=size)
    for part in parts:
        hasher.update(part.encode("utf-8"))
        hasher.update(_SEP)
    return hasher.digest()


def unit_uniform(*parts: str) -> float:
    """Deterministic uniform draw in the open interval (0, 1)."""
    value = int.from_bytes(stable_digest(*parts, size=8), "big")
    return (value + 0.5) / _TWO64


def std_normal(*parts: str) -> float:
    """Deterministic standard normal draw (Box-Muller over two uniforms)."""
    raw = stable_digest(*parts, size=16)
    u1 = (int.from_bytes(raw[:8], "big") + 0.5) / _TWO64
    u2 = (int.from_bytes(raw[8:], "big") + 0.5) / _TWO64
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
