"""Loss families with certified dissipativity and smoothness constants.

Every family is nonnegative, continuously differentiable in the parameter,
globally gradient-Lipschitz, and dissipative: ``<grad l(w;z), w> >= m|w|^2 - b``
for declared positive constants ``(m, b)``.  The constants ``(m, b, M, A, B)``
are derived analytically per family (see the factory docstrings) and checked
empirically by :func:`verify_regularity` rather than estimated, so downstream
bound formulas can use them verbatim.

Built-in families:

* ``quadratic-data``: ``l(w; z) = 0.5 |w - z|^2``, the convex baseline with
  every closed form known.
* ``ripple``: ``l(w; z) = 0.5 mu |w|^2 + eps (1 - cos <z, w>)``, non-convex,
  globally smooth, dissipative.
* ``smoothed-double-well`` (d = 1, data independent): quartic
  ``0.25 (w^2 - 1)^2`` inside ``|w| <= w_cut`` continued with a C^2-matched
  quadratic tail, which restores a global gradient-Lipschitz constant.

The data space is a ball of radius ``zmax``; draws come from a declared
distribution (uniform ball, uniform cube, or a point mass).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import j1

from .errors import UsageError

_DISTRIBUTIONS = ("uniform-ball", "uniform-cube", "point-mass")


@dataclass(frozen=True)
class RegularityConstants:
    """Declared constants of the regularity assumption.

    ``m, b``: dissipativity; ``M``: gradient Lipschitz constant;
    ``A``: bound on ``|grad l(0; z)|``; ``B``: bound on ``|l(0; z)|``.
    All positive.
    """

    m: float
    b: float
    M: float
    A: float
    B: float

    def __post_init__(self):
        for name in ("m", "b", "M", "A", "B"):
            if getattr(self, name) <= 0:
                raise UsageError(f"constant {name} must be positive")


@dataclass(frozen=True)
class SampleSet:
    """A data sample ``z_1..z_n`` with provenance.

    Points live in the ball of radius ``zmax``.  ``distribution`` and ``seed``
    record how the points were drawn (``seed`` is None for hand-built sets).
    """

    points: np.ndarray
    distribution: str
    zmax: float
    seed: int | None = None

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", pts)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise UsageError("SampleSet needs an (n, d) array with n >= 1")
        norms = np.linalg.norm(pts, axis=1)
        if norms.max(initial=0.0) > self.zmax * (1 + 1e-12) + 1e-12:
            raise UsageError("sample point outside the data ball of radius zmax")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def to_dict(self) -> dict:
        return {
            "points": self.points.tolist(),
            "distribution": self.distribution,
            "zmax": self.zmax,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(d: dict) -> "SampleSet":
        return SampleSet(
            points=np.asarray(d["points"], dtype=float),
            distribution=d["distribution"],
            zmax=float(d["zmax"]),
            seed=d.get("seed"),
        )


@dataclass(frozen=True)
class LossModel:
    """A loss family instance with certified regularity constants."""

    family: str
    dim: int
    params: dict
    constants: RegularityConstants
    zmax: float
    distribution: str

    # -- pointwise loss and gradient -------------------------------------

    def loss(self, w, z) -> float:
        """Loss l(w; z) for a single parameter/data pair."""
        w = self._check_param(w)
        z = self._check_data(z)
        return float(self._loss_many(w[None, :], z[None, :])[0, 0])

    def grad(self, w, z) -> np.ndarray:
        """Gradient of l(.; z) at w."""
        w = self._check_param(w)
        z = self._check_data(z)
        return self._grad_w(w[None, :], z[None, :])[0]

    # -- empirical quantities (vectorized over a batch of parameters) ----

    def empirical_loss(self, w, sample: SampleSet):
        """Mean loss over the sample.  ``w`` may be (d,) or (..., d)."""
        W, squeeze = self._as_batch(w)
        self._check_sample(sample)
        out = self._loss_many(W, sample.points).mean(axis=-1)
        return float(out[0]) if squeeze else out.reshape(np.shape(w)[:-1])

    def empirical_grad(self, w, sample: SampleSet):
        """Mean gradient over the sample.  ``w`` may be (d,) or (..., d)."""
        W, squeeze = self._as_batch(w)
        self._check_sample(sample)
        out = self._empirical_grad(W, sample.points)
        return out[0] if squeeze else out.reshape(np.shape(w))

    # -- sign-weighted sums (Rademacher sup objective) --------------------

    def weighted_loss(self, w, sample: SampleSet, weights) -> np.ndarray:
        """``sum_i weights_i l(w; z_i)`` for each row of a parameter batch."""
        W, squeeze = self._as_batch(w)
        self._check_sample(sample)
        wts = np.asarray(weights, dtype=float)
        if wts.shape != (sample.n,):
            raise UsageError("weights must have one entry per sample point")
        out = self._loss_many(W, sample.points) @ wts
        return float(out[0]) if squeeze else out.reshape(np.shape(w)[:-1])

    def weighted_grad(self, w, sample: SampleSet, weights) -> np.ndarray:
        """Gradient of :meth:`weighted_loss` in w."""
        W, squeeze = self._as_batch(w)
        self._check_sample(sample)
        wts = np.asarray(weights, dtype=float)
        if wts.shape != (sample.n,):
            raise UsageError("weights must have one entry per sample point")
        Z = sample.points
        total = wts.sum()
        if self.family == "quadratic-data":
            out = total * W - wts @ Z
        elif self.family == "ripple":
            mu, eps = self.params["mu"], self.params["eps"]
            inner = W @ Z.T
            out = mu * total * W + eps * (np.sin(inner) * wts) @ Z
        elif self.family == "smoothed-double-well":
            out = total * _dw_grad(W[:, 0], self.params["w_cut"])[:, None]
        else:
            raise UsageError(f"unknown family {self.family!r}")
        return out[0] if squeeze else out.reshape(np.shape(w))

    # -- expected quantities under the declared distribution -------------

    def expected_loss(self, w):
        """Expected loss under the declared data distribution (closed form)."""
        W, squeeze = self._as_batch(w)
        out = self._expected_loss(W)
        return float(out[0]) if squeeze else out.reshape(np.shape(w)[:-1])

    def min_expected_loss(self) -> float:
        """Minimum of the expected loss over the whole parameter space."""
        if self.family == "quadratic-data":
            mean, second = self._data_moments()
            return 0.5 * (second - float(mean @ mean))
        # ripple and the double well are nonnegative and vanish at known points
        return 0.0

    # -- sampling ---------------------------------------------------------

    def draw_sample(self, n: int, seed: int) -> SampleSet:
        """Draw an IID sample of size n from the declared distribution."""
        if n < 1:
            raise UsageError("sample size must be >= 1")
        rng = np.random.default_rng(seed)
        d = self.dim
        if self.distribution == "uniform-ball":
            g = rng.standard_normal((n, d))
            norm = np.linalg.norm(g, axis=1, keepdims=True)
            norm[norm == 0] = 1.0
            radii = self.zmax * rng.random((n, 1)) ** (1.0 / d)
            pts = g / norm * radii
        elif self.distribution == "uniform-cube":
            hw = self.params["cube_half_width"]
            pts = rng.uniform(-hw, hw, size=(n, d))
        elif self.distribution == "point-mass":
            pts = np.tile(np.asarray(self.params["point"], dtype=float), (n, 1))
        else:
            raise UsageError(f"unknown distribution {self.distribution!r}")
        return SampleSet(points=pts, distribution=self.distribution,
                         zmax=self.zmax, seed=seed)

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "dim": self.dim,
            "params": dict(self.params),
            "zmax": self.zmax,
            "distribution": self.distribution,
        }

    @staticmethod
    def from_dict(d: dict) -> "LossModel":
        family = d["family"]
        kwargs = dict(d.get("params", {}))
        if family == "quadratic-data":
            return quadratic_data(d["dim"], zmax=d.get("zmax", 1.0),
                                  distribution=d.get("distribution", "uniform-ball"),
                                  **kwargs)
        if family == "ripple":
            return ripple(d["dim"], zmax=d.get("zmax", 1.0),
                          distribution=d.get("distribution", "uniform-ball"),
                          **kwargs)
        if family == "smoothed-double-well":
            return smoothed_double_well(**kwargs)
        raise UsageError(f"unknown family {family!r}")

    # -- internals ---------------------------------------------------------

    def _check_param(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float).reshape(-1)
        if w.shape != (self.dim,):
            raise UsageError(f"parameter must have dimension {self.dim}")
        return w

    def _check_data(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float).reshape(-1)
        if z.shape != (self.dim,):
            raise UsageError(f"data point must have dimension {self.dim}")
        if np.linalg.norm(z) > self.zmax * (1 + 1e-12) + 1e-12:
            raise UsageError("data point outside the ball of radius zmax")
        return z

    def _check_sample(self, sample: SampleSet):
        if sample.dim != self.dim:
            raise UsageError("sample dimension does not match the model")

    def _as_batch(self, w) -> tuple[np.ndarray, bool]:
        arr = np.asarray(w, dtype=float)
        if arr.ndim == 1:
            if arr.shape != (self.dim,):
                raise UsageError(f"parameter must have dimension {self.dim}")
            return arr[None, :], True
        if arr.shape[-1] != self.dim:
            raise UsageError(f"parameter batch must end with dimension {self.dim}")
        return arr.reshape(-1, self.dim), False

    def _loss_many(self, W: np.ndarray, Z: np.ndarray) -> np.ndarray:
        """(R, d) x (n, d) -> (R, n) losses."""
        if self.family == "quadratic-data":
            diff = W[:, None, :] - Z[None, :, :]
            return 0.5 * np.einsum("rnk,rnk->rn", diff, diff)
        if self.family == "ripple":
            mu, eps = self.params["mu"], self.params["eps"]
            inner = W @ Z.T
            return 0.5 * mu * np.sum(W * W, axis=1)[:, None] + eps * (1.0 - np.cos(inner))
        if self.family == "smoothed-double-well":
            v = _dw_value(W[:, 0], self.params["w_cut"])
            return np.broadcast_to(v[:, None], (W.shape[0], Z.shape[0])).copy()
        raise UsageError(f"unknown family {self.family!r}")

    def _grad_w(self, W: np.ndarray, Z: np.ndarray) -> np.ndarray:
        """Gradient wrt w for matched rows: (R, d) x (R, d) -> (R, d)."""
        if self.family == "quadratic-data":
            return W - Z
        if self.family == "ripple":
            mu, eps = self.params["mu"], self.params["eps"]
            inner = np.sum(W * Z, axis=1)
            return mu * W + eps * np.sin(inner)[:, None] * Z
        if self.family == "smoothed-double-well":
            return _dw_grad(W[:, 0], self.params["w_cut"])[:, None]
        raise UsageError(f"unknown family {self.family!r}")

    def _empirical_grad(self, W: np.ndarray, Z: np.ndarray) -> np.ndarray:
        """(R, d) x (n, d) -> (R, d) mean gradient."""
        if self.family == "quadratic-data":
            return W - Z.mean(axis=0)
        if self.family == "ripple":
            mu, eps = self.params["mu"], self.params["eps"]
            inner = W @ Z.T                      # (R, n)
            return mu * W + (eps / Z.shape[0]) * np.sin(inner) @ Z
        if self.family == "smoothed-double-well":
            return _dw_grad(W[:, 0], self.params["w_cut"])[:, None]
        raise UsageError(f"unknown family {self.family!r}")

    def _data_moments(self) -> tuple[np.ndarray, float]:
        """(mean of z, E|z|^2) for the declared distribution."""
        d = self.dim
        if self.distribution == "uniform-ball":
            return np.zeros(d), self.zmax**2 * d / (d + 2.0)
        if self.distribution == "uniform-cube":
            hw = self.params["cube_half_width"]
            return np.zeros(d), d * hw**2 / 3.0
        if self.distribution == "point-mass":
            z0 = np.asarray(self.params["point"], dtype=float)
            return z0, float(z0 @ z0)
        raise UsageError(f"unknown distribution {self.distribution!r}")

    def _char_cos(self, W: np.ndarray) -> np.ndarray:
        """E[cos <z, w>] per row of W under the declared distribution."""
        if self.distribution == "point-mass":
            z0 = np.asarray(self.params["point"], dtype=float)
            return np.cos(W @ z0)
        if self.distribution == "uniform-cube":
            hw = self.params["cube_half_width"]
            return np.prod(np.sinc(hw * W / np.pi), axis=1)
        if self.distribution == "uniform-ball":
            r = self.zmax * np.linalg.norm(W, axis=1)
            if self.dim == 1:
                return np.sinc(r / np.pi)
            if self.dim == 2:
                out = np.ones_like(r)
                nz = r > 0
                out[nz] = 2.0 * j1(r[nz]) / r[nz]
                return out
            raise UsageError("closed-form characteristic function only for d <= 2")
        raise UsageError(f"unknown distribution {self.distribution!r}")

    def _expected_loss(self, W: np.ndarray) -> np.ndarray:
        if self.family == "quadratic-data":
            mean, second = self._data_moments()
            return 0.5 * np.sum(W * W, axis=1) - W @ mean + 0.5 * second
        if self.family == "ripple":
            mu, eps = self.params["mu"], self.params["eps"]
            return 0.5 * mu * np.sum(W * W, axis=1) + eps * (1.0 - self._char_cos(W))
        if self.family == "smoothed-double-well":
            return _dw_value(W[:, 0], self.params["w_cut"])
        raise UsageError(f"unknown family {self.family!r}")


# -- smoothed double well helpers ------------------------------------------


def _dw_value(w: np.ndarray, w_cut: float) -> np.ndarray:
    a = np.abs(w)
    inner = 0.25 * (w * w - 1.0) ** 2
    v_c = 0.25 * (w_cut**2 - 1.0) ** 2
    g_c = w_cut**3 - w_cut
    h_c = 3.0 * w_cut**2 - 1.0
    excess = a - w_cut
    tail = v_c + g_c * excess + 0.5 * h_c * excess**2
    return np.where(a <= w_cut, inner, tail)


def _dw_grad(w: np.ndarray, w_cut: float) -> np.ndarray:
    a = np.abs(w)
    inner = w * (w * w - 1.0)
    g_c = w_cut**3 - w_cut
    h_c = 3.0 * w_cut**2 - 1.0
    tail = np.sign(w) * (g_c + h_c * (a - w_cut))
    return np.where(a <= w_cut, inner, tail)


# -- factories ---------------------------------------------------------------


def quadratic_data(dim: int, zmax: float = 1.0, distribution: str = "uniform-ball",
                   **dist_params) -> LossModel:
    """Quadratic family ``l(w; z) = 0.5 |w - z|^2``.

    Constants: Young's inequality gives ``<w - z, w> >= 0.5 |w|^2 - 0.5 |z|^2``,
    so ``(m, b) = (1/2, zmax^2 / 2)``; the Hessian is the identity, ``M = 1``;
    at the origin ``|grad| = |z| <= zmax = A`` and ``l(0; z) <= zmax^2 / 2 = B``.
    """
    _check_dist(distribution, dist_params, dim, zmax)
    c = RegularityConstants(m=0.5, b=0.5 * zmax**2, M=1.0, A=zmax, B=0.5 * zmax**2)
    return LossModel("quadratic-data", dim, dict(dist_params), c, zmax, distribution)


def ripple(dim: int, mu: float = 1.0, eps: float = 0.5, zmax: float = 1.0,
           distribution: str = "uniform-ball", **dist_params) -> LossModel:
    """Non-convex family ``l(w; z) = 0.5 mu |w|^2 + eps (1 - cos <z, w>)``.

    Constants: bounding the sine term by Cauchy-Schwarz and Young gives
    ``(m, b) = (mu / 2, eps^2 zmax^2 / (2 mu))``; the Hessian is
    ``mu I + eps cos(<z, w>) z z^T``, so ``M = mu + eps zmax^2``.  Both the
    loss and its gradient vanish at the origin, so any positive ``A, B`` are
    valid; we declare the natural scales ``A = eps * zmax`` and ``B = eps``.
    """
    if mu <= 0 or eps <= 0:
        raise UsageError("ripple needs mu > 0 and eps > 0")
    _check_dist(distribution, dist_params, dim, zmax)
    c = RegularityConstants(m=0.5 * mu, b=eps**2 * zmax**2 / (2.0 * mu),
                            M=mu + eps * zmax**2, A=eps * zmax, B=eps)
    p = {"mu": mu, "eps": eps, **dist_params}
    return LossModel("ripple", dim, p, c, zmax, distribution)


def smoothed_double_well(w_cut: float = 3.0, zmax: float = 1.0,
                         distribution: str = "uniform-ball") -> LossModel:
    """One-dimensional double well, data independent.

    ``0.25 (w^2 - 1)^2`` for ``|w| <= w_cut``, continued with the C^2-matched
    quadratic tail.  Constants: ``w V'(w) = w^2 (w^2 - 1) >= w^2 - 1`` inside
    (the gap is ``(w^2 - 1)^2``) and the tail only strengthens the inequality
    for ``w_cut >= 1``, so ``(m, b) = (1, 1)``; ``M = sup |V''| = 3 w_cut^2 - 1``;
    ``B = V(0) = 1/4`` exactly, and the gradient at the origin vanishes, so the
    declared ``A = 1`` is a valid conservative bound.
    """
    if w_cut < 1.0:
        raise UsageError("w_cut must be >= 1")
    c = RegularityConstants(m=1.0, b=1.0, M=3.0 * w_cut**2 - 1.0, A=1.0, B=0.25)
    return LossModel("smoothed-double-well", 1, {"w_cut": w_cut}, c, zmax, distribution)


def _check_dist(distribution: str, params: dict, dim: int, zmax: float):
    if distribution not in _DISTRIBUTIONS:
        raise UsageError(f"unknown distribution {distribution!r}")
    if distribution == "uniform-cube":
        hw = params.get("cube_half_width")
        if hw is None or hw <= 0:
            raise UsageError("uniform-cube needs cube_half_width > 0")
        if hw * np.sqrt(dim) > zmax * (1 + 1e-12):
            raise UsageError("cube corners exceed the data ball; increase zmax")
    if distribution == "point-mass":
        pt = params.get("point")
        if pt is None:
            raise UsageError("point-mass needs a 'point'")
        if np.linalg.norm(np.asarray(pt, dtype=float)) > zmax * (1 + 1e-12):
            raise UsageError("point mass outside the data ball")


BUILTIN_FAMILIES = ("quadratic-data", "ripple", "smoothed-double-well")


def builtin_models() -> list[LossModel]:
    """One canonical instance per built-in family (used by the lemma suite)."""
    return [
        quadratic_data(1),
        ripple(1),
        smoothed_double_well(),
    ]


# -- regularity verification -------------------------------------------------


@dataclass(frozen=True)
class RegularityReport:
    """Result of probing the declared constants on random points."""

    m_emp: float
    b_emp: float
    M_emp: float
    A_emp: float
    B_emp: float
    passed: bool
    violations: tuple[str, ...] = field(default=())


def verify_regularity(model: LossModel, probe_count: int = 1000, seed: int = 0,
                      radius: float = 100.0, tol: float = 1e-9) -> RegularityReport:
    """Probe the declared (m, b, M, A, B) on random (w, v, z) triples.

    Samples parameters uniformly in the ball of the given radius and data from
    the model's distribution, then checks nonnegativity, the origin bounds, the
    dissipativity inequality against the declared ``(m, b)``, and gradient
    Lipschitz continuity against the declared ``M``.  A probe fails only when
    the violation exceeds ``tol``.
    """
    if probe_count < 1:
        raise UsageError("probe_count must be >= 1")
    rng = np.random.default_rng(seed)
    d = model.dim
    c = model.constants

    def ball(n):
        g = rng.standard_normal((n, d))
        norms = np.linalg.norm(g, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        return g / norms * (radius * rng.random((n, 1)) ** (1.0 / d))

    W = ball(probe_count)
    V = ball(probe_count)
    Z = model.draw_sample(probe_count, seed=int(rng.integers(2**31))).points

    violations: list[str] = []

    # nonnegativity and origin bounds
    losses = np.array([model.loss(W[i], Z[i]) for i in range(probe_count)])
    if losses.min() < -tol:
        violations.append("loss negativity")
    loss0 = np.array([model.loss(np.zeros(d), Z[i]) for i in range(probe_count)])
    grad0 = np.array([model.grad(np.zeros(d), Z[i]) for i in range(probe_count)])
    B_emp = float(np.abs(loss0).max())
    A_emp = float(np.linalg.norm(grad0, axis=1).max())
    if B_emp > c.B + tol:
        violations.append("origin loss bound B")
    if A_emp > c.A + tol:
        violations.append("origin gradient bound A")

    # dissipativity: <grad, w> >= m |w|^2 - b
    grads = np.array([model.grad(W[i], Z[i]) for i in range(probe_count)])
    inner = np.einsum("ik,ik->i", grads, W)
    wsq = np.einsum("ik,ik->i", W, W)
    slack = inner - (c.m * wsq - c.b)
    if slack.min() < -tol:
        violations.append("dissipativity (m, b)")
    keep = wsq > 1e-6
    m_emp = float(((inner[keep] + c.b) / wsq[keep]).min()) if keep.any() else c.m
    b_emp = float((c.m * wsq - inner).max())

    # smoothness: |grad(w) - grad(v)| <= M |w - v|
    grads_v = np.array([model.grad(V[i], Z[i]) for i in range(probe_count)])
    dg = np.linalg.norm(grads - grads_v, axis=1)
    dw = np.linalg.norm(W - V, axis=1)
    keep = dw > 1e-12
    ratios = dg[keep] / dw[keep]
    M_emp = float(ratios.max()) if ratios.size else 0.0
    if M_emp > c.M + tol:
        violations.append("gradient Lipschitz constant M")

    return RegularityReport(m_emp=m_emp, b_emp=b_emp, M_emp=M_emp,
                            A_emp=A_emp, B_emp=B_emp,
                            passed=not violations,
                            violations=tuple(violations))
