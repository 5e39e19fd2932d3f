"""Single-bit measurement models.

Each measurement is ``y_i in {-1, +1}`` with ``E y_i = theta(<a_i, x>)`` for
standard Gaussian rows ``a_i``. The solvers only ever see the direction
vector ``c = (1/m) sum_i y_i a_i``, so rows are generated block by block and
folded into ``c`` without materializing the m x n matrix.

Row block ``b`` is drawn from substream ``(ROWS, b)`` of the record's
:class:`~onebitcs.sampling.RngSpec` and the measurement noise of that block
from ``(NOISE, b)``. Block size is fixed at :data:`ROW_BLOCK`, which makes
``(y, c)`` independent of the number of worker threads.
"""
from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss

from .errors import ParameterError
from .sampling import RngSpec, Signal

ROW_BLOCK = 4096
ROWS = 1
NOISE = 2

#: Memory cap for ``retain=True`` (bytes of float64 rows).
DEFAULT_RETAIN_BUDGET = 1 << 30

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)

# Gauss-Hermite (probabilists') nodes for E f(g), g ~ N(0, 1).
GH_NODES = 64
_gh_x, _gh_w = hermegauss(GH_NODES)
_gh_w = _gh_w / math.sqrt(2.0 * math.pi)

# Composite Gauss-Legendre on [0, 40] (32 panels x 16 nodes) for the
# sharply peaked logistic integrand at large alpha.
_gl_u, _gl_v = leggauss(16)
_edges = np.linspace(0.0, 40.0, 33)
_gl_x = np.concatenate([0.5 * (a + b) + 0.5 * (b - a) * _gl_u for a, b in zip(_edges[:-1], _edges[1:])])
_gl_w = np.concatenate([0.5 * (b - a) * _gl_v for a, b in zip(_edges[:-1], _edges[1:])])
_LOGISTIC_GH_MAX_ALPHA = 1.5


def sign(z):
    """Elementwise sign with ``sign(0) = +1``."""
    return np.where(np.asarray(z) >= 0, 1.0, -1.0)


# ---------------------------------------------------------------------------
# link models


@dataclass(frozen=True)
class Noiseless:
    tag = 0
    name = "noiseless"

    @property
    def param(self) -> float:
        return 0.0

    def theta(self, z):
        return sign(z)

    def draw(self, z, gen):
        return sign(z)


@dataclass(frozen=True)
class BitFlip:
    """Each sign is kept with probability ``p`` and flipped otherwise.

    ``p = 1/2`` is accepted as a degenerate (zero-correlation) model.
    """

    p: float
    tag = 1
    name = "bitflip"

    def __post_init__(self):
        if not (0.5 <= self.p <= 1.0):
            raise ParameterError(f"bit-flip keep probability must lie in [1/2, 1], got {self.p}")

    @property
    def param(self) -> float:
        return self.p

    def theta(self, z):
        return 2.0 * (self.p - 0.5) * sign(z)

    def draw(self, z, gen):
        xi = np.where(gen.random(np.shape(z)) < self.p, 1.0, -1.0)
        return xi * sign(z)


@dataclass(frozen=True)
class PreQuantNoise:
    """Gaussian noise of std ``sigma`` added before taking the sign."""

    sigma: float
    tag = 2
    name = "prequant"

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ParameterError(f"noise std must be non-negative, got {self.sigma}")

    @property
    def param(self) -> float:
        return self.sigma

    def theta(self, z):
        z = np.asarray(z, dtype=float)
        if self.sigma == 0:
            return sign(z)
        # 1 - 2 P(nu <= -z) = erf(z / (sigma sqrt 2))
        return np.vectorize(math.erf)(z / (self.sigma * math.sqrt(2.0)))

    def draw(self, z, gen):
        nu = self.sigma * gen.standard_normal(np.shape(z))
        return sign(np.asarray(z) + nu)


@dataclass(frozen=True)
class Logistic:
    """Logistic regression with signal norm ``alpha``: P(y = 1) = 1 / (1 + exp(-alpha z))."""

    alpha: float
    tag = 3
    name = "logistic"

    def __post_init__(self):
        if not self.alpha > 0:
            raise ParameterError(f"logistic scale must be positive, got {self.alpha}")

    @property
    def param(self) -> float:
        return self.alpha

    def theta(self, z):
        return np.tanh(0.5 * self.alpha * np.asarray(z, dtype=float))

    def draw(self, z, gen):
        prob = 0.5 * (1.0 + self.theta(z))
        return np.where(gen.random(np.shape(z)) < prob, 1.0, -1.0)


@dataclass(frozen=True)
class Tabulated:
    """Arbitrary odd link given as a callable; test hook, not serializable."""

    fn: Callable
    tag = 255
    name = "tabulated"

    @property
    def param(self) -> float:
        return float("nan")

    def theta(self, z):
        return np.clip(self.fn(np.asarray(z, dtype=float)), -1.0, 1.0)

    def draw(self, z, gen):
        prob = 0.5 * (1.0 + self.theta(z))
        return np.where(gen.random(np.shape(z)) < prob, 1.0, -1.0)


LinkModel = Noiseless | BitFlip | PreQuantNoise | Logistic | Tabulated

_BY_TAG = {0: Noiseless, 1: BitFlip, 2: PreQuantNoise, 3: Logistic}
_PARAM_NAME = {1: "p", 2: "sigma", 3: "alpha"}


def model_from_tag(tag: int, param: float):
    if tag not in _BY_TAG:
        raise ParameterError(f"unknown model tag {tag}")
    if tag == 0:
        return Noiseless()
    return _BY_TAG[tag](param)


def model_from_dict(d: dict):
    """Build a model from ``{"name": ..., "p"|"sigma"|"alpha": ...}``."""
    name = str(d.get("name", "")).lower()
    for tag, cls in _BY_TAG.items():
        if cls.name == name:
            if tag == 0:
                return Noiseless()
            key = _PARAM_NAME[tag]
            if key not in d:
                raise ParameterError(f"model {name!r} needs parameter {key!r}")
            return cls(float(d[key]))
    raise ParameterError(f"unknown model {name!r}; expected one of noiseless, bitflip, prequant, logistic")


def model_to_dict(model) -> dict:
    if isinstance(model, Noiseless):
        return {"name": "noiseless"}
    if model.tag in _PARAM_NAME:
        return {"name": model.name, _PARAM_NAME[model.tag]: model.param}
    raise ParameterError("tabulated models cannot be serialized")


def theta_eval(model, z):
    """The mean function theta of ``model`` at ``z``."""
    out = model.theta(z)
    return float(out) if np.ndim(out) == 0 else out


def lambda_analytic(model) -> float:
    """Correlation ``lambda = E theta(g) g`` for standard normal ``g``.

    Closed forms for the noiseless, bit-flip and pre-quantization models. The
    logistic value ``(alpha/2) E sech^2(alpha g / 2)`` uses 64-node
    Gauss-Hermite for ``alpha <= 1.5`` and otherwise the equivalent
    ``2 int_0^inf sech^2(t) phi(2t/alpha) dt`` on a composite Gauss-Legendre
    rule; the plain Hermite rule cannot resolve the peak for large alpha.
    """
    if isinstance(model, Noiseless):
        return SQRT_2_OVER_PI
    if isinstance(model, BitFlip):
        return 2.0 * SQRT_2_OVER_PI * (model.p - 0.5)
    if isinstance(model, PreQuantNoise):
        return math.sqrt(2.0 / (math.pi * (model.sigma ** 2 + 1.0)))
    if isinstance(model, Logistic):
        a = model.alpha
        if a <= _LOGISTIC_GH_MAX_ALPHA:
            return float(0.5 * a * np.sum(_gh_w / np.cosh(0.5 * a * _gh_x) ** 2))
        phi = np.exp(-0.5 * (2.0 * _gl_x / a) ** 2) / math.sqrt(2.0 * math.pi)
        return float(2.0 * np.sum(_gl_w * phi / np.cosh(_gl_x) ** 2))
    return float(np.sum(_gh_w * model.theta(_gh_x) * _gh_x))


# ---------------------------------------------------------------------------
# covariance


@dataclass
class CovarianceSpec:
    """Symmetric positive-definite covariance with its eigendecomposition."""

    matrix: np.ndarray
    evals: np.ndarray
    evecs: np.ndarray
    diagonal: bool

    @classmethod
    def from_matrix(cls, sigma) -> "CovarianceSpec":
        sigma = np.asarray(sigma, dtype=float)
        if sigma.ndim == 1:
            return cls.from_diagonal(sigma)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise ParameterError("covariance must be a square matrix")
        if not np.allclose(sigma, sigma.T, atol=1e-12, rtol=0):
            raise ParameterError("covariance must be symmetric")
        off = sigma - np.diag(np.diag(sigma))
        if not np.any(off):
            return cls.from_diagonal(np.diag(sigma))
        evals, evecs = np.linalg.eigh(sigma)
        if evals[0] <= 0:
            raise ParameterError("covariance must be positive definite")
        recon = (evecs * evals) @ evecs.T
        if np.max(np.abs(recon - sigma)) > 1e-8 * max(1.0, np.max(np.abs(sigma))):
            raise ParameterError("eigendecomposition of covariance is inaccurate")
        return cls(sigma, evals, evecs, False)

    @classmethod
    def from_diagonal(cls, d) -> "CovarianceSpec":
        d = np.asarray(d, dtype=float)
        if d.ndim != 1 or np.any(d <= 0):
            raise ParameterError("diagonal covariance entries must be positive")
        return cls(np.diag(d), d.copy(), np.eye(d.shape[0]), True)

    @property
    def n(self) -> int:
        return self.evals.shape[0]

    @property
    def lambda_min(self) -> float:
        return float(self.evals.min())

    @property
    def lambda_max(self) -> float:
        return float(self.evals.max())

    @property
    def kappa(self) -> float:
        return self.lambda_max / self.lambda_min

    def sqrt_matrix(self) -> np.ndarray:
        if self.diagonal:
            return np.diag(np.sqrt(self.evals))
        return (self.evecs * np.sqrt(self.evals)) @ self.evecs.T

    def sigma_norm(self, x) -> float:
        """``||Sigma^{1/2} x||_2``."""
        x = np.asarray(x, dtype=float)
        if self.diagonal:
            return float(np.sqrt(np.sum(self.evals * x * x)))
        w = self.evecs.T @ x
        return float(np.sqrt(np.sum(self.evals * w * w)))

    def to_dict(self) -> dict:
        if self.diagonal:
            return {"diagonal": self.evals.tolist()}
        return {"matrix": self.matrix.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "CovarianceSpec":
        if "diagonal" in d:
            return cls.from_diagonal(d["diagonal"])
        if "matrix" in d:
            return cls.from_matrix(d["matrix"])
        raise ParameterError("covariance needs 'diagonal' or 'matrix'")


# ---------------------------------------------------------------------------
# measurement records


@dataclass
class MeasurementRecord:
    y: np.ndarray
    c: np.ndarray
    m: int
    model: object
    rng: RngSpec
    covariance: Optional[CovarianceSpec] = None
    retained_rows: Optional[np.ndarray] = None
    projections: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.c.shape[0]


def _as_vector(signal) -> np.ndarray:
    x = signal.values if isinstance(signal, Signal) else signal
    return np.asarray(x, dtype=float)


def block_sizes(m: int):
    full, rest = divmod(m, ROW_BLOCK)
    sizes = [ROW_BLOCK] * full
    if rest:
        sizes.append(rest)
    return sizes


def _rows(rng: RngSpec, b: int, size: int, n: int, root) -> np.ndarray:
    rows = rng.generator(ROWS, b).standard_normal((size, n))
    if root is not None:
        rows = rows @ root
    return rows


def _run_blocks(fn, m: int, workers: int):
    sizes = block_sizes(m)
    if workers <= 1 or len(sizes) == 1:
        return [fn(b, size) for b, size in enumerate(sizes)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda args: fn(*args), enumerate(sizes)))


def _check_signal(x, covariance):
    if covariance is None:
        nrm = float(np.linalg.norm(x))
        if abs(nrm - 1.0) > 1e-8:
            raise ParameterError(f"signal must have unit Euclidean norm, got {nrm:.6g}")
    else:
        if covariance.n != x.shape[0]:
            raise ParameterError(f"covariance dimension {covariance.n} does not match signal dimension {x.shape[0]}")
        nrm = covariance.sigma_norm(x)
        if abs(nrm - 1.0) > 1e-8:
            raise ParameterError(f"signal must satisfy ||Sigma^(1/2) x|| = 1, got {nrm:.6g}")


def synthesize(signal, model, m: int, rng: RngSpec, retain: bool = False,
               covariance: Optional[CovarianceSpec] = None, *, workers: int = 1,
               keep_projections: bool = False,
               retain_budget: int = DEFAULT_RETAIN_BUDGET) -> MeasurementRecord:
    """Draw ``m`` single-bit measurements of ``signal`` under ``model``.

    Parameters
    ----------
    signal : Signal or ndarray
        Unit-norm signal (``||Sigma^{1/2} x|| = 1`` when ``covariance`` is given).
    model : link model
    m : int
        Number of measurements.
    rng : RngSpec
        Stream for rows and noise.
    retain : bool
        Keep the m x n measurement matrix on the record. Refused when it
        would exceed ``retain_budget`` bytes.
    covariance : CovarianceSpec, optional
        Rows are drawn as ``Sigma^{1/2} g`` instead of ``g``.
    workers : int
        Threads used for row blocks; does not change the result.
    keep_projections : bool
        Keep the clean inner products ``<a_i, x>`` (needed by the greedy adversary).
    """
    if m <= 0:
        raise ParameterError(f"number of measurements must be positive, got {m}")
    x = _as_vector(signal)
    n = x.shape[0]
    _check_signal(x, covariance)
    if retain and m * n * 8 > retain_budget:
        raise ParameterError(f"retaining a {m}x{n} matrix exceeds the memory budget of {retain_budget} bytes")
    root = covariance.sqrt_matrix() if covariance is not None else None

    def block(b, size):
        rows = _rows(rng, b, size, n, root)
        z = rows @ x
        y = model.draw(z, rng.generator(NOISE, b))
        return rows.T @ y, y, (z if keep_projections else None), (rows if retain else None)

    parts = _run_blocks(block, m, workers)
    c = np.zeros(n)
    for part in parts:
        c += part[0]
    c /= m
    y = np.concatenate([p[1] for p in parts]).astype(np.int8)
    proj = np.concatenate([p[2] for p in parts]) if keep_projections else None
    rows = np.vstack([p[3] for p in parts]) if retain else None
    return MeasurementRecord(y, c, m, model, rng, covariance, rows, proj)


def direction_from_bits(record: MeasurementRecord, y, *, workers: int = 1) -> np.ndarray:
    """``(1/m) A^T y`` for new bits ``y`` over the record's rows (regenerated if not retained)."""
    y = np.asarray(y, dtype=float)
    if y.shape != (record.m,):
        raise ParameterError(f"expected {record.m} bits, got shape {y.shape}")
    if record.retained_rows is not None:
        starts = np.cumsum([0] + block_sizes(record.m))
        c = np.zeros(record.n)
        for lo, hi in zip(starts[:-1], starts[1:]):
            c += record.retained_rows[lo:hi].T @ y[lo:hi]
        return c / record.m
    root = record.covariance.sqrt_matrix() if record.covariance is not None else None
    starts = np.cumsum([0] + block_sizes(record.m))

    def block(b, size):
        rows = _rows(record.rng, b, size, record.n, root)
        return rows.T @ y[starts[b]:starts[b] + size]

    c = np.zeros(record.n)
    for part in _run_blocks(block, record.m, workers):
        c += part
    return c / record.m


def with_bits(record: MeasurementRecord, y, *, workers: int = 1) -> MeasurementRecord:
    """Copy of ``record`` carrying bits ``y`` and the matching direction vector."""
    y = np.asarray(y).astype(np.int8)
    return replace(record, y=y, c=direction_from_bits(record, y, workers=workers))


def flip_count(tau: float, m: int) -> int:
    # the epsilon absorbs representation error in tau * m
    return int(math.floor(tau * m + 1e-9))


def corrupt(y, tau: float, strategy: str = "random", rng: Optional[RngSpec] = None,
            context=None) -> np.ndarray:
    """Flip exactly ``floor(tau * m)`` entries of the sign vector ``y``.

    ``random`` flips a uniformly random subset. ``greedy-magnitude`` flips the
    entries with the largest ``|<a_i, x>|`` (passed as ``context``), which
    removes the most informative measurements; it is a heuristic adversary,
    not an optimal one.
    """
    y = np.asarray(y)
    if y.ndim != 1 or not np.all(np.abs(y) == 1):
        raise ParameterError("y must be a vector of +-1 entries")
    if not (0.0 <= tau <= 1.0):
        raise ParameterError(f"corruption fraction must lie in [0, 1], got {tau}")
    m = y.shape[0]
    k = flip_count(tau, m)
    out = y.copy()
    if k == 0:
        return out
    if strategy == "random":
        if rng is None:
            raise ParameterError("random corruption needs an RngSpec")
        idx = rng.generator().choice(m, size=k, replace=False)
    elif strategy in ("greedy", "greedy-magnitude"):
        if context is None:
            raise ParameterError("greedy-magnitude corruption needs the row inner products as context")
        context = np.asarray(context, dtype=float)
        if context.shape != (m,):
            raise ParameterError("context must hold one inner product per measurement")
        idx = np.argsort(-np.abs(context), kind="stable")[:k]
    else:
        raise ParameterError(f"unknown corruption strategy {strategy!r}")
    out[idx] = -out[idx]
    return out


def lambda_empirical(signal, model, m: int, rng: RngSpec, *, workers: int = 1):
    """Monte Carlo ``(1/m) sum y_i <a_i, x>`` and its standard error."""
    if m <= 0:
        raise ParameterError(f"number of measurements must be positive, got {m}")
    x = _as_vector(signal)
    _check_signal(x, None)
    n = x.shape[0]

    def block(b, size):
        z = _rows(rng, b, size, n, None) @ x
        t = model.draw(z, rng.generator(NOISE, b)) * z
        return t.sum(), np.dot(t, t)

    s1 = s2 = 0.0
    for a, b in _run_blocks(block, m, workers):
        s1 += a
        s2 += b
    mean = s1 / m
    var = max(s2 / m - mean * mean, 0.0)
    stderr = math.sqrt(var / (m - 1)) if m > 1 else float("inf")
    return mean, stderr


# ---------------------------------------------------------------------------
# binary persistence

MAGIC = b"OBCS1"
_HEADER = struct.Struct("<5sQQBdQQ")


def write_record(path, record: MeasurementRecord):
    """Write ``record`` as header, bit-packed signs (+1 -> 1) and little-endian float64 c.

    Header: magic ``OBCS1``, n (u64), m (u64), model tag (u8), model
    parameter (f64), seed (u64), stream id (u64).
    """
    if record.model.tag not in _BY_TAG:
        raise ParameterError("only the built-in link models can be persisted")
    header = _HEADER.pack(MAGIC, record.n, record.m, record.model.tag, float(record.model.param),
                          record.rng.seed, record.rng.stream_id)
    bits = np.packbits(np.asarray(record.y) > 0, bitorder="little")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(bits.tobytes())
        fh.write(np.asarray(record.c, dtype="<f8").tobytes())


def read_record(path) -> MeasurementRecord:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ParameterError(f"{path}: truncated measurement record")
    magic, n, m, tag, param, seed, stream = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ParameterError(f"{path}: not a measurement record (bad magic)")
    nbytes = (m + 7) // 8
    expected = _HEADER.size + nbytes + 8 * n
    if len(raw) != expected:
        raise ParameterError(f"{path}: size {len(raw)} does not match header (expected {expected})")
    bits = np.frombuffer(raw, dtype=np.uint8, count=nbytes, offset=_HEADER.size)
    y = np.where(np.unpackbits(bits, count=m, bitorder="little") > 0, 1, -1).astype(np.int8)
    c = np.frombuffer(raw, dtype="<f8", count=n, offset=_HEADER.size + nbytes).astype(float)
    return MeasurementRecord(y, c, m, model_from_tag(tag, param), RngSpec(seed, stream))
