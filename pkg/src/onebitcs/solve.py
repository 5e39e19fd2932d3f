"""Estimators: maximize the linear objective <c, x'> over a convex signal set.

The objective ``sum_i y_i <a_i, x'>`` depends on the data only through
``c = (1/m) A^T y``; every solver here takes ``c`` and never the link model.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Optional

import numpy as np

from . import kernels
from .errors import DegenerateInputError, NumericalError, ParameterError
from .geometry import (Ellipsoid, L1Ball, L2Ball, NuclearBall, dykstra_project,
                       mean_width_mc)
from .measure import CovarianceSpec, MeasurementRecord, lambda_analytic
from .sampling import RngSpec, Signal

THRESHOLD_REL_TOL = 1e-12
ASCENT_TOL = 1e-10
ASCENT_PATIENCE = 50
ASCENT_MAX_ITER = 50000
SVD_CAP = 128


# ---------------------------------------------------------------------------
# constraint sets


@dataclass(frozen=True)
class SparseBall:
    """K_{n,s} = {||x||_2 <= 1, ||x||_1 <= sqrt(s)}."""

    s: float
    tag = "sparse"

    def projection(self):
        return partial(dykstra_project, constraints=[L1Ball(math.sqrt(self.s)), L2Ball(1.0)])

    def violation(self, x) -> float:
        return max(L1Ball(math.sqrt(self.s)).violation(x), L2Ball(1.0).violation(x))


@dataclass(frozen=True)
class CorrelatedSparse:
    """{||x||_1 <= sqrt(s / lambda_min(Sigma)), ||Sigma^{1/2} x||_2 <= 1}."""

    cov: CovarianceSpec
    s: float
    tag = "correlated"

    @property
    def l1_radius(self) -> float:
        return math.sqrt(self.s / self.cov.lambda_min)

    def projection(self):
        return partial(dykstra_project, constraints=[L1Ball(self.l1_radius), Ellipsoid(self.cov)])

    def violation(self, x) -> float:
        return max(L1Ball(self.l1_radius).violation(x), Ellipsoid(self.cov).violation(x))


@dataclass(frozen=True)
class NuclearFrobenius:
    """{X : ||X||_* <= sqrt(r), ||X||_F <= 1} on n1 x n2 matrices."""

    r: float
    n1: int
    n2: int
    tag = "lowrank"

    def projection(self):
        return partial(dykstra_project,
                       constraints=[NuclearBall(math.sqrt(self.r), (self.n1, self.n2)), L2Ball(1.0)])

    def violation(self, x) -> float:
        shape = (self.n1, self.n2)
        return max(NuclearBall(math.sqrt(self.r), shape).violation(x), L2Ball(1.0).violation(x))


@dataclass(frozen=True)
class OracleSet:
    """Any bounded convex set given by its Euclidean projection."""

    project: Callable
    tag = "oracle"

    def projection(self):
        return self.project

    def violation(self, x) -> float:
        return float(np.linalg.norm(np.ravel(self.project(x) - x)))


# ---------------------------------------------------------------------------
# reports


@dataclass
class EstimateReport:
    x_hat: np.ndarray
    objective: float
    solver_tag: str
    iterations: int = 0
    error_sq: Optional[float] = None
    normalized_error_sq: Optional[float] = None
    sigma_metric_error_sq: Optional[float] = None
    lambda_used: Optional[float] = None
    w_hat: Optional[float] = None
    beta: Optional[float] = None
    bound_value: Optional[float] = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "x_hat": np.asarray(self.x_hat).tolist(),
            "shape": list(np.shape(self.x_hat)),
            "objective": self.objective,
            "solver": self.solver_tag,
            "iterations": self.iterations,
        }
        for key in ("error_sq", "normalized_error_sq", "sigma_metric_error_sq", "lambda_used",
                    "w_hat", "beta", "bound_value"):
            out[key] = getattr(self, key)
        return out


def _nonzero_direction(c) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if not np.all(np.isfinite(c)):
        raise ParameterError("direction vector has non-finite entries")
    if not np.any(c):
        raise DegenerateInputError("c = 0: every feasible point is optimal")
    return c


# ---------------------------------------------------------------------------
# solvers


def sparse_argmax(c, s: float) -> EstimateReport:
    """Maximizer of ``<c, x>`` over ``||x||_2 <= 1, ||x||_1 <= sqrt(s)``.

    The maximizer is a normalized soft threshold ``S_t(c) / ||S_t(c)||_2``.
    ``t = 0`` when the l1 budget is inactive; otherwise ``t`` is found by
    bisection on the l1/l2 ratio of ``S_t(c)``. If the largest magnitudes
    are tied more than ``s`` times there is no crossing and the face of
    maximizers is handled by :func:`generic_argmax`.
    """
    c = _nonzero_direction(c)
    if c.ndim != 1:
        raise ParameterError("sparse_argmax expects a vector")
    if not s >= 1:
        raise ParameterError(f"sparsity budget must be >= 1, got {s}")
    a = np.abs(c)
    t, status = kernels.soft_threshold_level(a, math.sqrt(s), THRESHOLD_REL_TOL)
    if status == kernels.STATUS_DEGENERATE:
        rep = generic_argmax(c, SparseBall(s).projection())
        rep.solver_tag = "sparse-fallback"
        return rep
    if status == kernels.STATUS_INACTIVE:
        x = c / np.linalg.norm(c)
    else:
        st = np.maximum(a - t, 0.0)
        if not np.any(st):
            # threshold reached the tied maximum: the limit direction
            st = (a == a.max()).astype(float)
        x = np.copysign(st, c) / np.linalg.norm(st)
    return EstimateReport(x, float(np.dot(c, x)), "sparse", extra={"threshold": float(t)})


def generic_argmax(c, project: Callable, *, step0: Optional[float] = None, tol: float = ASCENT_TOL,
                   patience: int = ASCENT_PATIENCE, max_iter: int = ASCENT_MAX_ITER,
                   x0=None, schedule: str = "sqrt") -> EstimateReport:
    """Projected gradient ascent ``x <- P_K(x + eta_k c)`` for a linear objective.

    Steps are ``eta_k = step0 / sqrt(k + 1)`` (``schedule="sqrt"``) or
    constant (``"constant"``), with ``step0 = 1 / ||c||`` by default. The
    best iterate is tracked and returned once the best objective improves by
    less than ``tol * ||c||`` over ``patience`` iterations.
    """
    c = _nonzero_direction(c)
    shape = c.shape
    cv = c.ravel()
    cn = float(np.linalg.norm(cv))
    eta0 = 1.0 / cn if step0 is None else float(step0)
    if schedule not in ("sqrt", "constant"):
        raise ParameterError(f"unknown step schedule {schedule!r}")

    def proj(v):
        return np.ravel(project(v.reshape(shape)))

    x = proj(np.zeros_like(cv) if x0 is None else np.asarray(x0, dtype=float).ravel())
    best_x = x
    best = float(np.dot(cv, x))
    trail = [best]
    for k in range(max_iter):
        eta = eta0 / math.sqrt(k + 1.0) if schedule == "sqrt" else eta0
        x = proj(x + eta * cv)
        obj = float(np.dot(cv, x))
        if obj > best:
            best, best_x = obj, x
        trail.append(best)
        if k + 1 >= patience and trail[-1] - trail[-1 - patience] < tol * cn:
            return EstimateReport(best_x.reshape(shape), best, "generic", k + 1)
    gap = trail[-1] - trail[-1 - min(patience, len(trail) - 1)]
    raise NumericalError(f"projected ascent did not stabilize in {max_iter} iterations",
                         last_improvement=gap, objective=best)


def correlated_argmax(c, cov: CovarianceSpec, s: float, **ascent) -> EstimateReport:
    """Maximizer of ``<c, x>`` over ``||x||_1 <= sqrt(s / lambda_min), ||Sigma^{1/2} x|| <= 1``."""
    c = np.asarray(c, dtype=float)
    if c.shape != (cov.n,):
        raise ParameterError(f"direction of shape {c.shape} does not match covariance dimension {cov.n}")
    rep = generic_argmax(c, CorrelatedSparse(cov, s).projection(), **ascent)
    rep.solver_tag = "correlated"
    return rep


def lowrank_argmax(C, r: float, svd_cap: int = SVD_CAP) -> EstimateReport:
    """Maximizer of ``<C, X>`` over ``||X||_* <= sqrt(r), ||X||_F <= 1``.

    Both constraints depend only on the singular values, and the trace inner
    product is maximized by sharing the singular vectors of ``C``, so the
    problem reduces to :func:`sparse_argmax` on the spectrum.
    """
    C = _nonzero_direction(C)
    if C.ndim != 2:
        raise ParameterError("lowrank_argmax expects a matrix")
    if min(C.shape) > svd_cap:
        raise ParameterError(f"min dimension {min(C.shape)} exceeds the SVD cap {svd_cap}")
    U, sv, Vt = np.linalg.svd(C, full_matrices=False)
    inner = sparse_argmax(sv, r)
    X = (U * inner.x_hat) @ Vt
    return EstimateReport(X, float(np.sum(C * X)), "lowrank", inner.iterations,
                          extra={"singular_values": inner.x_hat})


def support_value(constraint, g) -> float:
    """Support function ``h_K(g) = max_{x in K} <g, x>`` of a constraint set."""
    return solve_direction(g, constraint).objective


def solve_direction(c, constraint) -> EstimateReport:
    """Dispatch ``c`` to the solver for ``constraint``."""
    if isinstance(constraint, SparseBall):
        return sparse_argmax(c, constraint.s)
    if isinstance(constraint, CorrelatedSparse):
        return correlated_argmax(c, constraint.cov, constraint.s)
    if isinstance(constraint, NuclearFrobenius):
        return lowrank_argmax(np.reshape(c, (constraint.n1, constraint.n2)), constraint.r)
    if isinstance(constraint, OracleSet):
        return generic_argmax(c, constraint.project)
    raise ParameterError(f"unsupported constraint {constraint!r}")


def _dimension(constraint) -> Optional[int]:
    if isinstance(constraint, NuclearFrobenius):
        return constraint.n1 * constraint.n2
    if isinstance(constraint, CorrelatedSparse):
        return constraint.cov.n
    return None


def error_bound(lam: float, m: int, w: float, beta: float) -> float:
    """Fixed-signal error bound ``8 (w + beta) / (lambda sqrt(m))``."""
    if not lam > 0:
        raise ParameterError(f"bound needs lambda > 0, got {lam}")
    return 8.0 * (w + beta) / (lam * math.sqrt(m))


def estimate(record: MeasurementRecord, constraint, truth=None, *, bound: bool = False,
             beta: float = 1.0, width_samples: int = 500, width_rng: Optional[RngSpec] = None,
             w_hat: Optional[float] = None) -> EstimateReport:
    """Solve the program for a measurement record and score it against ``truth``.

    ``error_sq`` is ``||x_hat - x||^2`` with ``x`` as given (unit norm, or
    Sigma-normalized on the correlated path). With ``bound=True`` the report
    carries ``8 (w + beta) / (lambda sqrt(m))`` where ``lambda`` is the
    analytic correlation of the record's model and ``w`` a Monte Carlo
    mean width of the set (or ``w_hat`` when supplied).
    """
    if record.c is None:
        raise ParameterError("record has no direction vector")
    c = np.asarray(record.c, dtype=float)
    dim = _dimension(constraint)
    if dim is not None and dim != c.shape[0]:
        raise ParameterError(f"constraint dimension {dim} does not match measurement dimension {c.shape[0]}")
    rep = solve_direction(c, constraint)

    if truth is not None:
        x = truth.values if isinstance(truth, Signal) else np.asarray(truth, dtype=float)
        x = np.ravel(x)
        if x.shape != c.shape:
            raise ParameterError(f"truth of length {x.shape[0]} does not match dimension {c.shape[0]}")
        xh = np.ravel(rep.x_hat)
        d = xh - x
        rep.error_sq = float(np.dot(d, d))
        nx = np.linalg.norm(xh)
        if nx > 0:
            dn = xh / nx - x / np.linalg.norm(x)
            rep.normalized_error_sq = float(np.dot(dn, dn))
        if isinstance(constraint, CorrelatedSparse):
            rep.sigma_metric_error_sq = constraint.cov.sigma_norm(d) ** 2

    if bound:
        lam = lambda_analytic(record.model)
        if w_hat is None:
            n = c.shape[0]
            rng = width_rng or RngSpec(0, 0)
            w_hat = mean_width_mc(partial(support_value, constraint), n, width_samples, rng,
                                  constraint.tag).w_hat
        rep.lambda_used = lam
        rep.w_hat = float(w_hat)
        rep.beta = float(beta)
        rep.bound_value = error_bound(lam, record.m, w_hat, beta)
    return rep
