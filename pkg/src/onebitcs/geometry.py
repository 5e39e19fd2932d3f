"""Projections, support functions, mean width and sign-embedding audits."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels
from .errors import NumericalError, ParameterError
from .measure import ROWS, CovarianceSpec, block_sizes
from .sampling import RngSpec, sample_signal

DYKSTRA_TOL = 1e-9
DYKSTRA_MAX_ITER = 10000
ELLIPSOID_TOL = 1e-10
ELLIPSOID_MAX_ITER = 200

_MC_BLOCK = 1024


def _radius(radius):
    if not radius > 0:
        raise ParameterError(f"radius must be positive, got {radius}")
    return float(radius)


def project_l1_ball(v, radius: float) -> np.ndarray:
    """Euclidean projection onto ``{x : ||x||_1 <= radius}`` (sort and threshold)."""
    return kernels.project_l1_ball(np.ravel(v), _radius(radius)).reshape(np.shape(v))


def project_l2_ball(v, radius: float = 1.0) -> np.ndarray:
    return kernels.project_l2_ball(np.ravel(v), _radius(radius)).reshape(np.shape(v))


def project_ellipsoid(v, cov: CovarianceSpec, tol: float = ELLIPSOID_TOL,
                      max_iter: int = ELLIPSOID_MAX_ITER) -> np.ndarray:
    """Euclidean projection onto ``{x : x^T Sigma x <= 1}``.

    For infeasible ``v`` the result is ``(I + mu Sigma)^{-1} v`` where the
    multiplier ``mu > 0`` solves the active constraint by Newton steps kept
    inside a bisection bracket, all in the eigenbasis of ``Sigma``.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (cov.n,):
        raise ParameterError(f"vector of length {v.shape} does not match covariance dimension {cov.n}")
    x, mu, it, resid = kernels.project_ellipsoid(v, cov.evals, cov.evecs, cov.diagonal, tol, max_iter)
    if it < 0:
        raise NumericalError("ellipsoid projection did not converge", multiplier=mu, residual=resid)
    return x


# ---------------------------------------------------------------------------
# convex sets as projection oracles


@dataclass(frozen=True)
class L1Ball:
    radius: float

    def __call__(self, v):
        return project_l1_ball(v, self.radius)

    def violation(self, x) -> float:
        return max(float(np.abs(x).sum()) - self.radius, 0.0)


@dataclass(frozen=True)
class L2Ball:
    radius: float = 1.0

    def __call__(self, v):
        return project_l2_ball(v, self.radius)

    def violation(self, x) -> float:
        return max(float(np.linalg.norm(np.ravel(x))) - self.radius, 0.0)


@dataclass(frozen=True)
class Ellipsoid:
    """``{x : ||Sigma^{1/2} x||_2 <= 1}``."""

    cov: CovarianceSpec

    def __call__(self, v):
        return project_ellipsoid(v, self.cov)

    def violation(self, x) -> float:
        return max(self.cov.sigma_norm(x) - 1.0, 0.0)


@dataclass(frozen=True)
class NuclearBall:
    """Nuclear-norm ball on ``shape`` matrices, acting on flattened vectors."""

    radius: float
    shape: tuple

    def __call__(self, v):
        X = np.reshape(v, self.shape)
        U, sv, Vt = np.linalg.svd(X, full_matrices=False)
        t = project_l1_ball(sv, self.radius)
        return ((U * t) @ Vt).reshape(np.shape(v))

    def violation(self, x) -> float:
        sv = np.linalg.svd(np.reshape(x, self.shape), compute_uv=False)
        return max(float(sv.sum()) - self.radius, 0.0)


def dykstra_project(v, constraints: Sequence[Callable], tol: float = DYKSTRA_TOL,
                    max_iter: int = DYKSTRA_MAX_ITER) -> np.ndarray:
    """Projection onto the intersection of convex sets by Dykstra's algorithm.

    Each cycle projects ``x + p_i`` onto set ``i`` and keeps the residual
    ``p_i``; iteration stops once a full cycle changes ``x`` and all the
    ``p_i`` by less than ``tol`` combined (the iterate alone can stall well
    short of the projection when boundaries meet at a shallow angle). The
    pairs (l1 ball, l2 ball) and (l1 ball, ellipsoid) run in a fused kernel.
    """
    v = np.asarray(v, dtype=float)
    constraints = list(constraints)
    if not constraints:
        raise ParameterError("need at least one constraint")
    if len(constraints) == 1:
        return constraints[0](v)
    if len(constraints) == 2 and v.ndim == 1:
        a, b = constraints
        if isinstance(a, L1Ball) and isinstance(b, L2Ball):
            x, it, move = kernels.dykstra_l1_l2(v, a.radius, b.radius, tol, max_iter)
            return _check_dykstra(x, it, move, max_iter)
        if isinstance(a, L1Ball) and isinstance(b, Ellipsoid):
            cov = b.cov
            x, it, move = kernels.dykstra_l1_ellipsoid(v, a.radius, cov.evals, cov.evecs, cov.diagonal,
                                                       tol, max_iter, ELLIPSOID_TOL, ELLIPSOID_MAX_ITER)
            return _check_dykstra(x, it, move, max_iter)

    x = v.copy()
    incr = [np.zeros_like(v) for _ in constraints]
    move = math.inf
    for _ in range(max_iter):
        prev = x
        change = 0.0
        for i, proj in enumerate(constraints):
            t = x + incr[i]
            x = proj(t)
            change += float(np.sum((t - x - incr[i]) ** 2))
            incr[i] = t - x
        move = math.sqrt(change + float(np.sum((x - prev) ** 2)))
        if move < tol:
            return x
    raise NumericalError(f"Dykstra projection did not converge in {max_iter} cycles",
                         last_move=move)


def _check_dykstra(x, it, move, max_iter):
    if it == -2:
        raise NumericalError("ellipsoid projection inside Dykstra did not converge", last_move=move)
    if it < 0:
        raise NumericalError(f"Dykstra projection did not converge in {max_iter} cycles",
                             last_move=move)
    return x


# ---------------------------------------------------------------------------
# support functions and mean width


def support_sparse_exact(g, s: int) -> float:
    """Support function of the s-sparse unit-ball vectors: l2 norm of the s largest |g_i|."""
    g = np.abs(np.asarray(g, dtype=float))
    n = g.shape[0]
    s = int(s)
    if not 1 <= s <= n:
        raise ParameterError(f"need 1 <= s <= n, got s={s}, n={n}")
    top = g if s == n else np.partition(g, n - s)[n - s:]
    return float(np.sqrt(np.dot(top, top)))


def support_l2_ball(g) -> float:
    return float(np.linalg.norm(g))


@dataclass
class MeanWidthEstimate:
    w_hat: float
    std_err: float
    n_samples: int
    set_tag: str = ""
    samples: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {"w_hat": self.w_hat, "std_err": self.std_err, "n_samples": self.n_samples,
                "set": self.set_tag}


def gaussian_draws(rng: RngSpec, N: int, n: int):
    """Yield the N standard Gaussian vectors of ``rng`` in fixed-size blocks."""
    for b, start in enumerate(range(0, N, _MC_BLOCK)):
        yield rng.generator(b).standard_normal((min(_MC_BLOCK, N - start), n))


def mean_width_mc(support_oracle: Callable, n: int, N: int, rng: RngSpec,
                  set_tag: str = "") -> MeanWidthEstimate:
    """Monte Carlo mean width of an origin-symmetric set, ``w = 2 E h_K(g)``."""
    if N < 2:
        raise ParameterError("need at least two samples")
    vals = np.concatenate([[support_oracle(g) for g in G] for G in gaussian_draws(rng, N, n)])
    h = 2.0 * vals
    w_hat = float(np.mean(h))
    std_err = float(np.std(h, ddof=1) / math.sqrt(N))
    return MeanWidthEstimate(w_hat, std_err, N, set_tag, h)


def expected_gaussian_norm(n: int) -> float:
    """E ||g||_2 for g ~ N(0, I_n): sqrt(2) Gamma((n+1)/2) / Gamma(n/2)."""
    if n < 340:
        return math.sqrt(2.0) * math.gamma((n + 1) / 2.0) / math.gamma(n / 2.0)
    return math.sqrt(2.0) * math.exp(math.lgamma((n + 1) / 2.0) - math.lgamma(n / 2.0))


# ---------------------------------------------------------------------------
# distances


def geodesic_distance(x, xp) -> float:
    """Angle between two unit vectors, in [0, pi]."""
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    if x.shape != xp.shape:
        raise ParameterError("vectors must have equal length")
    for v in (x, xp):
        if abs(np.linalg.norm(v) - 1.0) > 1e-8:
            raise ParameterError("geodesic distance needs unit vectors")
    return float(np.arccos(np.clip(np.dot(x, xp), -1.0, 1.0)))


def hamming_distance(y, yp) -> int:
    y = np.asarray(y)
    yp = np.asarray(yp)
    if y.shape != yp.shape:
        raise ParameterError(f"sign vectors differ in length: {y.shape} vs {yp.shape}")
    return int(kernels.hamming(y.astype(np.int8), yp.astype(np.int8)))


# ---------------------------------------------------------------------------
# embedding audits


@dataclass
class TessellationAudit:
    max_abs_deviation: float
    pair_count: int
    m: int
    delta_target: float
    deviations: np.ndarray = field(repr=False, default=None)

    @property
    def passed(self) -> bool:
        return self.max_abs_deviation <= self.delta_target

    def to_dict(self) -> dict:
        return {"max_abs_deviation": self.max_abs_deviation, "pair_count": self.pair_count,
                "m": self.m, "delta_target": self.delta_target, "passed": self.passed}


def sparse_sphere_sampler(rng: RngSpec, n: int, s: float) -> np.ndarray:
    """Uniform-support s-sparse unit vector."""
    return sample_signal(rng, n, s).values


def _audit_pairs(set_sampler, n, s, pair_count, rng, near_fraction, near_scale):
    left, right = [], []
    for j in range(pair_count):
        x = set_sampler(rng.child(1, j), n, s)
        if j < round(near_fraction * pair_count):
            # perturb on the same support so the pair stays in K
            gen = rng.generator(2, j)
            scale = near_scale * 10.0 ** gen.uniform(-2.0, 0.0)
            xp = x + scale * gen.standard_normal(n) * (x != 0)
            xp /= np.linalg.norm(xp)
        else:
            xp = set_sampler(rng.child(3, j), n, s)
        left.append(x)
        right.append(xp)
    return left, right


def tessellation_audit(set_sampler: Optional[Callable], n: int, s: float, m: int, pair_count: int,
                       rng: RngSpec, delta_target: float = 0.05, *, near_fraction: float = 0.5,
                       near_scale: float = 0.05, extra_pairs=()) -> TessellationAudit:
    """Largest ``|d_G(x, x')/pi - d_H(sign Ax, sign Ax')/m|`` over sampled pairs.

    A single Gaussian matrix is streamed row-block by row-block. A fraction
    ``near_fraction`` of the pairs are small perturbations of one another,
    which probes the small-distance regime.
    """
    if m <= 0 or pair_count < 0:
        raise ParameterError("need m > 0 and pair_count >= 0")
    set_sampler = set_sampler or sparse_sphere_sampler
    left, right = _audit_pairs(set_sampler, n, s, pair_count, rng, near_fraction, near_scale)
    for a, b in extra_pairs:
        left.append(np.asarray(a, dtype=float))
        right.append(np.asarray(b, dtype=float))
    k = len(left)
    if k == 0:
        raise ParameterError("no pairs to audit")
    P = np.column_stack(left + right)
    li = np.arange(k, dtype=np.intp)
    ri = li + k
    counts = np.zeros(k, dtype=np.int64)
    for b, size in enumerate(block_sizes(m)):
        A = rng.generator(ROWS, b).standard_normal((size, n))
        signs = (A @ P >= 0).astype(np.uint8)
        kernels.pair_disagreements(signs, li, ri, counts)
    dg = np.array([geodesic_distance(a, c) for a, c in zip(left, right)]) / math.pi
    dev = np.abs(dg - counts / m)
    return TessellationAudit(float(dev.max()), k, m, delta_target, dev)


def difference_sampler(s: float, kind: str = "compressible") -> Callable:
    """Sampler of ``u - v`` with ``u, v`` drawn from K_{n,s} ∩ S^{n-1}."""

    def draw(rng: RngSpec, n: int) -> np.ndarray:
        return sample_signal(rng.child(1), n, s, kind).values - sample_signal(rng.child(2), n, s, kind).values

    return draw


def l1_embedding_deviations(set_sampler: Callable, n: int, m: int, sample_count: int,
                            rng: RngSpec, points=()) -> np.ndarray:
    """``|(1/m) ||Ax||_1 - sqrt(2/pi) ||x||_2|`` for each sampled (and each given) ``x``."""
    if m <= 0:
        raise ParameterError("need m > 0")
    X = [set_sampler(rng.child(1, j), n) for j in range(sample_count)]
    X += [np.asarray(p, dtype=float) for p in points]
    if not X:
        raise ParameterError("no points to audit")
    X = np.column_stack(X)
    sums = np.zeros(X.shape[1])
    for b, size in enumerate(block_sizes(m)):
        A = rng.generator(ROWS, b).standard_normal((size, n))
        sums += np.abs(A @ X).sum(axis=0)
    return np.abs(sums / m - math.sqrt(2.0 / math.pi) * np.linalg.norm(X, axis=0))


def l1_embedding_audit(set_sampler: Callable, n: int, m: int, sample_count: int, rng: RngSpec) -> float:
    """Largest l1-embedding deviation over ``sample_count`` points of K - K."""
    return float(l1_embedding_deviations(set_sampler, n, m, sample_count, rng).max())
