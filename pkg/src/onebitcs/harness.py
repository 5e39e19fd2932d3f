"""Monte Carlo sweeps over the number of measurements.

Every row is reproducible from ``(base_seed, m, trial)``: the trial seed is
derived from those three numbers only, so configs that differ only in the
link model or corruption share signals and measurement matrices, which
makes cross-model comparisons paired.
"""
from __future__ import annotations

import csv
import json
import math
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .errors import NumericalError, ParameterError
from .geometry import mean_width_mc
from .measure import (CovarianceSpec, corrupt, lambda_analytic, model_from_dict, model_to_dict,
                      synthesize, with_bits)
from .sampling import RngSpec, derive_seed, sample_signal
from .solve import (CorrelatedSparse, NuclearFrobenius, SparseBall, estimate, support_value,
                    error_bound)

COLUMNS = ("n", "s", "m", "model", "p", "sigma", "alpha", "tau", "strategy", "trial", "seed",
           "error_sq", "sigma_err_sq", "objective", "lambda", "w_hat", "bound_thm11", "beta",
           "bound_thm13", "wall_time_s")
# JSON rows also carry the failure tag (null for successful cells); in CSV a
# failed cell shows up as blank metric columns.
JSON_KEYS = COLUMNS + ("error",)

_SIGNAL, _MEASURE, _CORRUPT = 1, 2, 3
_WIDTH_STREAM = 0xB1D7


@dataclass
class SweepConfig:
    n: int
    s: float
    m_grid: list
    model: dict = field(default_factory=lambda: {"name": "noiseless"})
    constraint: str = "sparse"
    kind: str = "exact-sparse"
    r: Optional[float] = None
    n1: Optional[int] = None
    n2: Optional[int] = None
    tau: float = 0.0
    strategy: str = "random"
    trials: int = 1
    base_seed: int = 0
    covariance: Optional[dict] = None
    beta: float = 1.0
    width_samples: int = 200
    calibration_C: float = 1.0
    workers: int = 1
    record_wall_time: bool = False
    outputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.m_grid:
            raise ParameterError("m_grid must be non-empty")
        if any(int(m) <= 0 for m in self.m_grid):
            raise ParameterError("every m in m_grid must be positive")
        self.m_grid = [int(m) for m in self.m_grid]
        if self.trials < 1:
            raise ParameterError("trials must be >= 1")
        if not 0.0 <= self.tau <= 1.0:
            raise ParameterError("tau must lie in [0, 1]")
        if self.constraint not in ("sparse", "correlated", "lowrank"):
            raise ParameterError(f"unknown constraint {self.constraint!r}")
        if self.constraint == "lowrank":
            if self.r is None or self.n1 is None or self.n2 is None:
                raise ParameterError("lowrank sweeps need r, n1 and n2")
            if self.n1 * self.n2 != self.n:
                raise ParameterError("lowrank sweeps need n = n1 * n2")
        if self.constraint == "correlated" and self.covariance is None:
            raise ParameterError("correlated sweeps need a covariance")
        model_from_dict(self.model)

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known - {"command"}
        if unknown:
            raise ParameterError(f"unknown sweep config keys: {sorted(unknown)}")
        for key in ("n", "s", "m_grid"):
            if key not in d:
                raise ParameterError(f"sweep config is missing {key!r}")
        return cls(**{k: v for k, v in d.items() if k in known})

    def to_dict(self) -> dict:
        return asdict(self)

    def build_model(self):
        return model_from_dict(self.model)

    def build_covariance(self) -> Optional[CovarianceSpec]:
        return CovarianceSpec.from_dict(self.covariance) if self.covariance else None

    def build_constraint(self):
        if self.constraint == "sparse":
            return SparseBall(self.s)
        if self.constraint == "correlated":
            return CorrelatedSparse(self.build_covariance(), self.s)
        return NuclearFrobenius(self.r, self.n1, self.n2)


# ---------------------------------------------------------------------------
# bound overlays


def delta_term(delta: float) -> float:
    """``delta sqrt(log(e / delta))``; 0 at 0, undefined (nan) above e."""
    if delta == 0:
        return 0.0
    if not 0 < delta <= math.e:
        return float("nan")
    return delta * math.sqrt(math.log(math.e / delta))


def tau_term(tau: float) -> float:
    """``11 tau sqrt(log(e / tau))``, the adversarial part of the uniform bound."""
    return 11.0 * delta_term(tau)


def uniform_delta(m: int, w: float, C: float = 1.0) -> float:
    """Accuracy ``delta`` at which ``m = C delta^-6 w^2`` holds."""
    return (C * w * w / m) ** (1.0 / 6.0)


def bound_thm11(lam: float, m: int, w: float, beta: float) -> float:
    """Fixed-signal bound on the squared error."""
    return error_bound(lam, m, w, beta)


def bound_thm13(m: int, w: float, tau: float, C: float = 1.0) -> float:
    """Uniform/adversarial bound with ``delta`` calibrated from ``m`` via constant ``C``."""
    return delta_term(uniform_delta(m, w, C)) + tau_term(tau)


def bound_overlay(kind: str, **params) -> float:
    """Literal bound value: ``kind="thm11"`` (lam, m, w, beta) or ``"thm13"`` (m, w, tau, C)."""
    if kind == "thm11":
        return bound_thm11(params["lam"], params["m"], params["w"], params["beta"])
    if kind == "thm13":
        return bound_thm13(params["m"], params["w"], params["tau"], params.get("C", 1.0))
    raise ParameterError(f"unknown bound {kind!r}")


# ---------------------------------------------------------------------------
# sweeps


def _truth(config: SweepConfig, rng: RngSpec, cov):
    if config.constraint == "lowrank":
        gen = rng.generator()
        k = max(1, int(math.floor(config.r)))
        X = gen.standard_normal((config.n1, k)) @ gen.standard_normal((k, config.n2))
        return (X / np.linalg.norm(X)).ravel()
    x = sample_signal(rng, config.n, config.s, config.kind).values
    if cov is not None:
        x = x / cov.sigma_norm(x)
    return x


def _params(model) -> tuple:
    d = model_to_dict(model)
    return d.get("p"), d.get("sigma"), d.get("alpha")


def mean_width_for(config: SweepConfig) -> float:
    """Monte Carlo mean width of the sweep's constraint set (fixed stream)."""
    constraint = config.build_constraint()
    rng = RngSpec(config.base_seed, _WIDTH_STREAM)
    return mean_width_mc(partial(support_value, constraint), config.n, config.width_samples, rng,
                         config.constraint).w_hat


def run_trial(config: SweepConfig, m: int, trial: int, w_hat: float, lam: float) -> dict:
    model = config.build_model()
    cov = config.build_covariance()
    constraint = config.build_constraint()
    seed = derive_seed(config.base_seed, m, trial)
    root = RngSpec(seed)
    p, sigma, alpha = _params(model)
    row = {"n": config.n, "s": config.r if config.constraint == "lowrank" else config.s, "m": m,
           "model": model.name, "p": p, "sigma": sigma, "alpha": alpha, "tau": config.tau,
           "strategy": config.strategy if config.tau > 0 else None, "trial": trial, "seed": seed,
           "error_sq": None, "sigma_err_sq": None, "objective": None, "lambda": lam, "w_hat": w_hat,
           "bound_thm11": None, "beta": config.beta, "bound_thm13": None, "wall_time_s": None,
           "error": None}
    start = time.perf_counter()
    try:
        x = _truth(config, root.child(_SIGNAL), cov)
        greedy = config.tau > 0 and config.strategy != "random"
        rec = synthesize(x, model, m, root.child(_MEASURE), covariance=cov, keep_projections=greedy)
        if config.tau > 0:
            y = corrupt(rec.y, config.tau, config.strategy, root.child(_CORRUPT), rec.projections)
            rec = with_bits(rec, y)
        rep = estimate(rec, constraint, x)
        row["error_sq"] = rep.error_sq
        row["sigma_err_sq"] = rep.sigma_metric_error_sq
        row["objective"] = rep.objective
        if lam > 0:
            row["bound_thm11"] = bound_thm11(lam, m, w_hat, config.beta)
        if config.tau > 0:
            row["bound_thm13"] = bound_thm13(m, w_hat, config.tau, config.calibration_C)
    except (ParameterError, NumericalError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    if config.record_wall_time:
        row["wall_time_s"] = time.perf_counter() - start
    return row


def run_sweep(config: SweepConfig, w_hat: Optional[float] = None) -> list:
    """Run every (m, trial) cell; rows come back sorted by (m, trial)."""
    if w_hat is None:
        w_hat = mean_width_for(config)
    lam = lambda_analytic(config.build_model())
    jobs = [(m, t) for m in config.m_grid for t in range(config.trials)]
    work = partial(_run_job, config, w_hat, lam)
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            rows = list(pool.map(work, jobs))
    else:
        rows = [work(job) for job in jobs]
    rows.sort(key=lambda r: (r["m"], r["trial"]))
    if config.outputs:
        write_outputs(rows, config)
    return rows


def _run_job(config, w_hat, lam, job):
    return run_trial(config, job[0], job[1], w_hat, lam)


# ---------------------------------------------------------------------------
# aggregation


def cell_medians(rows, x_field: str, y_field: str) -> dict:
    """Median of ``y_field`` per distinct ``x_field`` value (failed rows skipped)."""
    groups = {}
    for r in rows:
        y = r.get(y_field)
        if r.get("error") or y is None or not math.isfinite(y):
            continue
        groups.setdefault(r[x_field], []).append(y)
    return {x: float(np.median(v)) for x, v in sorted(groups.items())}


def fit_scaling(rows, x_field: str = "m", y_field: str = "error_sq"):
    """Slope and intercept of least squares on (log x, log median y)."""
    med = cell_medians(rows, x_field, y_field)
    xs = np.array([x for x, y in med.items() if x > 0 and y > 0], dtype=float)
    ys = np.array([y for x, y in med.items() if x > 0 and y > 0], dtype=float)
    if np.unique(xs).size < 3:
        raise ParameterError("scaling fit needs at least three distinct positive x values")
    lx, ly = np.log(xs), np.log(ys)
    A = np.column_stack([lx, np.ones_like(lx)])
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    return float(slope), float(intercept)


# ---------------------------------------------------------------------------
# output


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else repr(v))
    return str(v)


def write_csv(rows, dest):
    """RFC 4180 CSV (CRLF line ends) to a path or an open text stream."""
    if hasattr(dest, "write"):
        _write_csv(rows, dest)
        return
    with open(dest, "w", newline="") as fh:
        _write_csv(rows, fh)


def _write_csv(rows, fh):
    w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in COLUMNS])


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def git_hash() -> str:
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], capture_output=True, text=True, timeout=5,
                             cwd=Path(__file__).resolve().parent)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() if out.returncode == 0 else "unknown"


def metadata(config: SweepConfig) -> dict:
    echo = config.to_dict()
    # the worker count never changes results, so it stays out of the sidecar
    echo.pop("workers")
    return {
        "config": echo,
        "version": __version__,
        "git_hash": git_hash(),
        "columns": list(JSON_KEYS),
        "notes": "Absolute constants (C in the uniform-bound delta calibration) are reported, "
                 "not fitted. The uniform-bound delta regime is not reachable at desk scale; "
                 "the sign embedding is audited directly instead.",
    }


def write_json(rows, path, config: SweepConfig):
    path = Path(path)
    data = [{c: _jsonable(r.get(c)) for c in JSON_KEYS} for r in rows]
    path.write_text(json.dumps(data, indent=1) + "\n")
    meta = path.with_name(path.stem + ".meta.json")
    meta.write_text(json.dumps(metadata(config), indent=1, sort_keys=True) + "\n")


def write_outputs(rows, config: SweepConfig):
    out = config.outputs
    if out.get("csv"):
        write_csv(rows, out["csv"])
    if out.get("json"):
        write_json(rows, out["json"], config)
