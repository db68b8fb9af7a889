"""Independent brute-force oracles used as ground truth by the test suites.

Three tools, all restricted to d <= 2 where exhaustive computation is
affordable:

* Gibbs-measure expectations by tensor-grid quadrature with a certified
  truncation radius and a resolution-doubling self check.
* Closed-form second moments of the Ornstein-Uhlenbeck process.
* Exhaustive grid minimization with one local polish step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .errors import NumericError, UsageError
from .losses import LossModel, SampleSet


@dataclass(frozen=True)
class GibbsSpec:
    """Quadrature plan for a Gibbs measure ``exp(-beta L_n) dw``."""

    beta: float
    r_trunc: float
    resolution: int
    model: LossModel
    sample: SampleSet


def make_gibbs_spec(model: LossModel, sample: SampleSet, beta: float,
                    resolution: int = 513, mass_tol: float = 1e-10) -> GibbsSpec:
    """Choose a truncation radius from the dissipativity tail bound.

    The sandwich inequality at ``c = 1/sqrt(2)`` plus nonnegativity of the
    loss gives ``L_n(x) >= m |x|^2 / 4 - (b/2) log 2``, so the density outside
    radius R is dominated by a Gaussian tail.  R is pushed out until that tail
    bound falls below ``mass_tol`` times a certified lower bound on the
    partition function.
    """
    if model.dim > 2:
        raise UsageError("Gibbs quadrature oracle is restricted to d <= 2")
    if beta <= 0:
        raise UsageError("beta must be positive")
    if resolution < 256:
        raise UsageError("resolution must be >= 256 points per axis")
    m = model.constants.m
    b = model.constants.b
    d = model.dim

    # lower bound on the partition function from a small ball at the minimizer
    coarse = grid_min(lambda W: model.empirical_loss(W, sample),
                      lo=-np.full(d, 8.0 * (1.0 + model.zmax)),
                      hi=np.full(d, 8.0 * (1.0 + model.zmax)),
                      resolution=201)
    lstar = coarse.value
    grad_bound = model.constants.A + model.constants.M * (
        np.linalg.norm(coarse.argmin) + 1.0)
    rho = min(1.0, 1.0 / (beta * grad_bound)) if grad_bound > 0 else 1.0
    vol_ball = 2.0 * rho if d == 1 else math.pi * rho**2
    log_z_lower = -beta * lstar - 1.0 + math.log(vol_ball)

    def log_tail(R: float) -> float:
        # exp(beta b log2 / 2) * int_{|x|>R} exp(-beta m |x|^2 / 4) dx
        rate = beta * m / 4.0
        if d == 1:
            tail = 2.0 * math.sqrt(math.pi / rate) * 0.5 * math.erfc(R * math.sqrt(rate))
            tail = max(tail, 1e-300)
        else:
            tail = math.pi / rate * math.exp(-rate * R * R)
            tail = max(tail, 1e-300)
        return beta * b * math.log(2.0) / 2.0 + math.log(tail)

    target = math.log(mass_tol) + log_z_lower
    R = max(1.0, math.sqrt((4.0 / (beta * m)) * (1.0 + beta * b)))
    while log_tail(R) > target:
        R *= 1.25
        if R > 1e6:
            raise NumericError("Gibbs truncation radius did not converge")
    return GibbsSpec(beta=beta, r_trunc=R, resolution=resolution,
                     model=model, sample=sample)


def _gibbs_value(spec: GibbsSpec, observable: Callable[[np.ndarray], np.ndarray],
                 resolution: int) -> tuple[float, float]:
    d = spec.model.dim
    axis = np.linspace(-spec.r_trunc, spec.r_trunc, resolution)
    if d == 1:
        pts = axis[:, None]
    else:
        xx, yy = np.meshgrid(axis, axis, indexing="ij")
        pts = np.column_stack([xx.ravel(), yy.ravel()])
    log_w = -spec.beta * spec.model.empirical_loss(pts, spec.sample)
    log_w -= log_w.max()
    weights = np.exp(log_w)
    # composite Simpson weights on the tensor grid
    sw = _simpson_weights(resolution)
    if d == 1:
        quad_w = sw
    else:
        quad_w = np.outer(sw, sw).ravel()
    obs = np.asarray(observable(pts), dtype=float)
    denom = float(np.sum(quad_w * weights))
    if denom <= 0 or not np.isfinite(denom):
        raise NumericError("Gibbs normalization vanished on the grid")
    value = float(np.sum(quad_w * weights * obs) / denom)
    abs_value = float(np.sum(quad_w * weights * np.abs(obs)) / denom)
    return value, abs_value


def _simpson_weights(n: int) -> np.ndarray:
    if n < 3 or n % 2 == 0:
        raise UsageError("Simpson resolution must be odd and >= 3")
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w


def gibbs_expectation(spec: GibbsSpec,
                      observable: Callable[[np.ndarray], np.ndarray] | None = None,
                      rtol: float = 1e-6) -> float:
    """Expectation of ``observable`` under the Gibbs measure of the spec.

    Defaults to the empirical loss itself.  The value is recomputed at double
    resolution; disagreement beyond ``rtol`` raises a numeric error.
    """
    if observable is None:
        observable = lambda W: spec.model.empirical_loss(W, spec.sample)
    coarse, _ = _gibbs_value(spec, observable, spec.resolution)
    fine, fine_abs = _gibbs_value(spec, observable, 2 * spec.resolution - 1)
    # near-zero expectations (odd observables) are judged against the scale
    # of |observable| rather than the vanishing value itself
    scale = max(abs(fine), fine_abs, 1e-12)
    if abs(fine - coarse) > rtol * scale:
        raise NumericError(
            f"Gibbs quadrature did not converge: {coarse} vs {fine} at "
            f"resolution {spec.resolution}"
        )
    return fine


def ou_second_moment(x0, rate: float, noise_variance: float, t: float) -> float:
    """E|Z_t|^2 for ``dZ = -rate Z dt + sqrt(noise_variance) dW`` from x0."""
    if rate <= 0:
        raise UsageError("rate must be positive")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    d = x0.size
    decay = math.exp(-2.0 * rate * t)
    return float(x0 @ x0) * decay + d * noise_variance / (2.0 * rate) * (1.0 - decay)


@dataclass(frozen=True)
class GridMinResult:
    argmin: np.ndarray
    value: float
    grid_value: float
    cell_diagonal: float


def grid_min(fn: Callable[[np.ndarray], np.ndarray], lo, hi,
             resolution: int = 1001, polish: bool = True) -> GridMinResult:
    """Exhaustive minimization of ``fn`` over a box grid, d <= 2.

    ``fn`` must accept an (N, d) array and return (N,) values.  A local
    polish from the best grid point follows; the polished value is only kept
    when it does not exceed the grid value.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    d = lo.size
    if d > 2:
        raise UsageError("grid_min is restricted to d <= 2")
    if np.any(hi <= lo):
        raise UsageError("empty box")
    axes = [np.linspace(lo[i], hi[i], resolution) for i in range(d)]
    if d == 1:
        pts = axes[0][:, None]
    else:
        xx, yy = np.meshgrid(*axes, indexing="ij")
        pts = np.column_stack([xx.ravel(), yy.ravel()])
    vals = np.asarray(fn(pts), dtype=float)
    idx = int(np.argmin(vals))
    best = pts[idx]
    grid_value = float(vals[idx])
    value, argmin = grid_value, best
    if polish:
        res = minimize(lambda w: float(fn(w[None, :])[0]), best,
                       method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 400})
        if res.fun <= grid_value and np.all(res.x >= lo) and np.all(res.x <= hi):
            value, argmin = float(res.fun), np.asarray(res.x, dtype=float)
    cell = float(np.linalg.norm((hi - lo) / (resolution - 1)))
    return GridMinResult(argmin=argmin, value=value,
                         grid_value=grid_value, cell_diagonal=cell)


def empirical_min_multistart(model: LossModel, sample: SampleSet,
                             n_starts: int = 32, seed: int = 0,
                             radius: float | None = None) -> GridMinResult:
    """Multi-start descent minimum for d > 2: an upper bound on the infimum."""
    rng = np.random.default_rng(seed)
    d = model.dim
    if radius is None:
        ln0 = model.empirical_loss(np.zeros(d), sample)
        m, b = model.constants.m, model.constants.b
        radius = math.sqrt((4.0 / m) * (ln0 + 0.5 * b * math.log(2.0))) + 1e-9
    best_val = math.inf
    best_x = np.zeros(d)
    starts = rng.standard_normal((n_starts, d))
    starts *= (radius * rng.random((n_starts, 1)) ** (1.0 / d)
               / np.maximum(np.linalg.norm(starts, axis=1, keepdims=True), 1e-12))
    for x0 in starts:
        res = minimize(lambda w: float(model.empirical_loss(w, sample)), x0,
                       jac=lambda w: model.empirical_grad(w, sample),
                       method="L-BFGS-B")
        if res.fun < best_val:
            best_val, best_x = float(res.fun), np.asarray(res.x, dtype=float)
    return GridMinResult(argmin=best_x, value=best_val,
                         grid_value=best_val, cell_diagonal=math.nan)


def empirical_min(model: LossModel, sample: SampleSet,
                  resolution: int = 2001) -> GridMinResult:
    """Certified-box grid minimum of the empirical loss.

    The box radius comes from the level-set inequality at the level
    ``L_n(0)``: any minimizer satisfies
    ``|x|^2 <= (4/m)(L_n(0) + (b/2) log 2)`` because the infimum is
    nonnegative.
    """
    if model.dim > 2:
        raise UsageError("empirical_min oracle is restricted to d <= 2")
    ln0 = model.empirical_loss(np.zeros(model.dim), sample)
    m, b = model.constants.m, model.constants.b
    radius = math.sqrt((4.0 / m) * (ln0 + 0.5 * b * math.log(2.0))) + 1e-9
    return grid_min(lambda W: model.empirical_loss(W, sample),
                    lo=-np.full(model.dim, radius),
                    hi=np.full(model.dim, radius),
                    resolution=resolution)
