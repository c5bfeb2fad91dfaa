"""Small shared helpers: seed derivation, stable float formatting, key/value files."""

from __future__ import annotations

import hashlib
import math


def derive_seed(*parts) -> int:
    """Derive a stable 63-bit seed from arbitrary hashable parts.

    Uses sha256 over the parts' reprs so the result is identical across
    processes and platforms (unlike built-in ``hash``).
    """
    blob = "\x1f".join(repr(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "little") >> 1


def fmt_float(x: float) -> str:
    """Shortest decimal string that round-trips the float64 value."""
    return repr(float(x))


def sigmoid(x: float) -> float:
    # branch keeps exp() argument non-positive for stability
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def log_sigmoid(x: float) -> float:
    if x >= 0.0:
        return -math.log1p(math.exp(-x))
    return x - math.log1p(math.exp(x))
