"""Seeded Gaussian streams and ground-truth signal generation.

All randomness in the package is drawn from :class:`RngSpec` substreams. A
substream is addressed by ``(seed, stream_id, *key)`` and backed by a PCG64
bit generator seeded through :class:`numpy.random.SeedSequence`; normals come
from numpy's ziggurat sampler. Because every block of work owns its own
substream, results do not depend on how the blocks are scheduled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

EXACT_SPARSE = "exact-sparse"
COMPRESSIBLE = "compressible"
SIGNAL_KINDS = (EXACT_SPARSE, COMPRESSIBLE)

#: Exponent of the power-law magnitude profile used for compressible signals.
DEFAULT_DECAY = 1.0
_DECAY_STEP = 0.25
_MAX_DECAY = 64.0

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngSpec:
    """Address of an independent random stream."""

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not (0 <= self.seed <= _MASK64 and 0 <= self.stream_id <= _MASK64):
            raise ParameterError("seed and stream_id must be unsigned 64-bit integers")

    def generator(self, *key: int) -> np.random.Generator:
        """Generator for the substream ``key`` of this stream."""
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *key))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, *key: int) -> "RngSpec":
        """A new RngSpec whose stream is derived from this one and ``key``."""
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *key))
        sid = int(ss.generate_state(2, dtype=np.uint32).view(np.uint64)[0])
        return RngSpec(self.seed, sid)


def derive_seed(base_seed: int, *key: int) -> int:
    """Deterministic 64-bit seed derived from ``base_seed`` and an integer key."""
    ss = np.random.SeedSequence(base_seed, spawn_key=tuple(key))
    return int(ss.generate_state(2, dtype=np.uint32).view(np.uint64)[0])


@dataclass
class Signal:
    """Ground-truth vector together with its sparsity metadata."""

    values: np.ndarray
    s: float
    kind: str = EXACT_SPARSE
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def alpha(self) -> float:
        return float(np.linalg.norm(self.values))

    def to_dict(self) -> dict:
        return {"values": self.values.tolist(), "s": self.s, "kind": self.kind}

    @classmethod
    def from_dict(cls, d: dict) -> "Signal":
        return cls(np.asarray(d["values"], dtype=float), float(d["s"]), d.get("kind", EXACT_SPARSE))


def gaussian_vector(rng: RngSpec, n: int) -> np.ndarray:
    """``n`` iid standard normals from the stream ``rng``."""
    if n < 0:
        raise ParameterError(f"dimension must be non-negative, got {n}")
    return rng.generator().standard_normal(n)


def gaussian_rows(rng: RngSpec, m: int, n: int, block: int) -> np.ndarray:
    """Row block ``block`` of a streamed Gaussian matrix (m rows, n columns)."""
    return rng.generator(block).standard_normal((m, n))


def _check_sparsity(n: int, s: float):
    if n < 1 or not (1 <= s <= n):
        raise ParameterError(f"need 1 <= s <= n, got n={n}, s={s}")


def sample_signal(rng: RngSpec, n: int, s: float, kind: str = EXACT_SPARSE,
                  decay: float = DEFAULT_DECAY) -> Signal:
    """Draw a unit-norm signal in K_{n,s} = B_2 ∩ sqrt(s) B_1.

    ``exact-sparse`` places iid Gaussian values on a uniformly random support
    of size ``floor(s)``. ``compressible`` draws full-support power-law
    magnitudes ``u_i * i**-decay`` (``u_i`` uniform on (1/2, 1]) in random
    order with random signs. A profile whose l1/l2 ratio exceeds ``sqrt(s)``
    is rejected and re-drawn with the exponent increased by 1/4.
    """
    _check_sparsity(n, s)
    if kind not in SIGNAL_KINDS:
        raise ParameterError(f"unknown signal kind {kind!r}")
    gen = rng.generator()
    x = np.zeros(n)
    if kind == EXACT_SPARSE:
        k = int(math.floor(s))
        support = gen.choice(n, size=k, replace=False)
        vals = gen.standard_normal(k)
        while not np.any(vals):
            vals = gen.standard_normal(k)
        x[support] = vals
        x /= np.linalg.norm(x)
        return Signal(x, float(s), kind)

    budget = math.sqrt(s)
    q = decay
    ranks = np.arange(1, n + 1, dtype=float)
    while True:
        mags = gen.uniform(0.5, 1.0, size=n) * ranks ** (-q)
        ratio = mags.sum() / np.linalg.norm(mags)
        # margin keeps the budget intact through the final normalization
        if ratio <= budget * (1.0 - 1e-12):
            break
        q += _DECAY_STEP
        if q > _MAX_DECAY:
            # only (near) floor(s)-sparse profiles fit such a tight budget
            mags[int(math.floor(s)):] = 0.0
            break
    perm = gen.permutation(n)
    signs = np.where(gen.random(n) < 0.5, -1.0, 1.0)
    x[perm] = signs * mags
    x /= np.linalg.norm(x)
    return Signal(x, float(s), kind, {"decay": q})
