"""Dense linear-algebra helpers and deterministic, splittable random streams.

Matrices are plain numpy float64 arrays in row-major (C) order. The random
streams are counter-based (Philox) and keyed by (seed, stream_id), so any
stream can be reconstructed independently of how many draws other streams
have consumed. The uniform and normal transforms are fixed and documented
here so the sequences are portable:

  raw     : 64-bit Philox words
  u       : ((raw >> 11) + 0.5) * 2**-53          open interval (0, 1)
  uniform : a * (2u - 1), clipped to the open interval (-a, a)
  normal  : Box-Muller pairs, r = sqrt(-2 ln u1),
            z0 = r cos(2 pi u2), z1 = r sin(2 pi u2)

normal(n) always consumes 2*ceil(n/2) uniforms; the spare value of an odd
request is discarded, so the mapping from call sizes to consumed raw words
is fixed.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "RngStream",
    "rng_draw",
    "mat_mul",
    "cosine_similarity",
    "assert_finite",
]

_TWO53 = float(2**53)


def assert_finite(a: np.ndarray, what: str = "array") -> np.ndarray:
    """Raise ValueError if any entry is NaN or infinite."""
    if not np.all(np.isfinite(a)):
        raise ValueError(f"non-finite entries in {what}")
    return a


def mat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product of two 2-D float64 arrays with shape validation."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"mat_mul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"inner dimensions differ: {a.shape} @ {b.shape}")
    out = a @ b
    return assert_finite(out, "mat_mul result")


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float | None:
    """Cosine of the angle between two flattened vectors.

    Returns None (reported as "undefined" in CSV output) when either vector
    has zero norm; never returns NaN.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return None
    # Clamp: roundoff can push parallel vectors a hair past +/-1.
    return float(np.clip(float(a @ b) / (na * nb), -1.0, 1.0))


class RngStream:
    """Deterministic random stream keyed by (seed, stream_id).

    Streams with distinct keys are statistically independent, and a stream's
    output depends only on its key and its own draw history, never on other
    streams or thread scheduling.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        key = np.array([seed % 2**64, stream_id % 2**64], dtype=np.uint64)
        self.seed = seed
        self.stream_id = stream_id
        self._bits = np.random.Philox(key=key)

    def _uniform01(self, n: int) -> np.ndarray:
        """n doubles strictly inside (0, 1), one per raw 64-bit word."""
        raw = self._bits.random_raw(n)
        return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) / _TWO53

    def uniform(self, a: float = 1.0, n: int = 1) -> np.ndarray:
        """n draws from the open interval (-a, a), a > 0."""
        if a <= 0:
            raise ValueError(f"uniform half-width must be positive, got {a}")
        u = self._uniform01(n)
        out = a * (2.0 * u - 1.0)
        # The extreme quantile can round up to +/-a when a is a power of two;
        # clip keeps the open-interval contract exact.
        limit = np.nextafter(a, 0.0)
        return np.clip(out, -limit, limit)

    def normal(self, n: int = 1) -> np.ndarray:
        """n standard normal draws via the Box-Muller transform."""
        pairs = (n + 1) // 2
        u = self._uniform01(2 * pairs)
        r = np.sqrt(-2.0 * np.log(u[:pairs]))
        ang = (2.0 * np.pi) * u[pairs:]
        z = np.empty(2 * pairs)
        z[0::2] = r * np.cos(ang)
        z[1::2] = r * np.sin(ang)
        return z[:n]


def rng_draw(stream: RngStream, dist: str, n: int, a: float = 1.0) -> np.ndarray:
    """Draw n values from a named distribution on an existing stream.

    dist is "uniform" (open interval (-a, a)) or "normal" (standard normal).
    Repeated calls continue the stream deterministically.
    """
    if dist == "uniform":
        return stream.uniform(a, n)
    if dist == "normal":
        return stream.normal(n)
    raise ValueError(f"unknown distribution {dist!r}")
