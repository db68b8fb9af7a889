"""Explicit constants and functions from the moment and coupling bounds.

Covers four groups:

* Lyapunov constants ``lambda(p) = m p / 2`` and
  ``C(p) = lambda(p) {(2/m)((d + p - 2)/gamma(0) + b)}^{p/2}``, which drive the
  p-th moment bound ``E|Z_t|^p <= e^{-lambda t} E|Z_0|^p + (C/lambda)(1 - e^{-lambda t})``.
* Level-set thresholds ``r0``, ``r1``, ``epsilon`` that locate the sublevel
  sets used in the exit-time analysis, plus the inverse-temperature threshold
  ``4 M d / (m b)`` and the flow-vs-diffusion divergence tail bound.
* The contraction apparatus: diameters R1 <= R2 of the product sublevel
  sets, the clamp ``kappa <= 1/2``, the weight ``Q = 2 sqrt(kappa - kappa^2)``,
  the kernels ``phi(r) = exp(-(M gamma/8) r^2 - 2 Q r)`` and ``Phi = int phi``,
  rates ``zeta, xi`` defined through ``int Phi/phi``, the decay rate
  ``c = min(zeta/gamma, lambda/2, 2 C lambda kappa)``, and the semi-metric
  ``rho2(x, y) = f(|x - y|) (1 + kappa V(x) + kappa V(y))`` with
  ``V(x) = 1 + |x|^2``.
* The covering-number generalization bound over a parameter ball.

All ``Phi/phi`` integrals are evaluated in the log domain: the integrand grows
like ``exp(a r^2 + q r)`` and would otherwise overflow for large
``gamma * R^2``.  The inner integral ``Phi`` uses a scaled-erfc closed form
(with a series fallback near zero); the outer integrals use panel-doubling
Gauss-Legendre quadrature refined to 1e-10 relative agreement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize_scalar
from scipy.special import erfcx

from .errors import NumericError, UsageError
from .losses import LossModel, SampleSet
from .reference import empirical_min

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(15)
_MAX_EXPONENT = 700.0  # past this, exp overflows float64


# -- Lyapunov constants -------------------------------------------------------


def lyapunov_constants(m: float, b: float, d: int, gamma0: float,
                       p: float) -> tuple[float, float]:
    """(lambda(p), C(p)) for the p-th moment bound."""
    if min(m, b, gamma0) <= 0 or d < 1 or p < 2:
        raise UsageError("lyapunov_constants needs positive inputs and p >= 2")
    lam = m * p / 2.0
    C = lam * ((2.0 / m) * ((d + p - 2.0) / gamma0 + b)) ** (p / 2.0)
    return lam, C


def moment_bound(x0_moment: float, lam: float, C: float, t) -> float | np.ndarray:
    """Right side of the moment bound at time(s) t."""
    t = np.asarray(t, dtype=float)
    out = np.exp(-lam * t) * x0_moment + (C / lam) * (1.0 - np.exp(-lam * t))
    return float(out) if out.ndim == 0 else out


# -- level-set thresholds -----------------------------------------------------


@dataclass(frozen=True)
class LevelThresholds:
    r0_tilde: float
    beta_threshold: float


def level_thresholds(model: LossModel, sample: SampleSet,
                     delta: float) -> LevelThresholds:
    """Threshold level r0(delta) and the inverse-temperature floor 4Md/(mb)."""
    if delta < 0:
        raise UsageError("delta must be >= 0")
    c = model.constants
    f0 = model.empirical_loss(np.zeros(model.dim), sample)
    g0 = float(np.linalg.norm(model.empirical_grad(np.zeros(model.dim), sample)))
    r0 = 0.5 * (c.M + 1.0) * delta + f0 + 0.5 * g0 * g0
    beta_thr = 4.0 * c.M * model.dim / (c.m * c.b)
    return LevelThresholds(r0_tilde=float(r0), beta_threshold=float(beta_thr))


def r1_threshold(model: LossModel, sample: SampleSet, r0: float, delta: float,
                 inf_f: float | None = None) -> float:
    """Smallest admissible second level r1 guaranteeing separation delta."""
    if r0 < 0 or delta < 0:
        raise UsageError("r0 and delta must be >= 0")
    c = model.constants
    if inf_f is None:
        inf_f = empirical_min(model, sample).value
    f0 = model.empirical_loss(np.zeros(model.dim), sample)
    g0 = float(np.linalg.norm(model.empirical_grad(np.zeros(model.dim), sample)))
    return float(
        f0 + 0.5 * g0 * g0
        + (4.0 * (c.M + 1.0) / c.m)
        * (r0 + c.m * delta**2 / 4.0 + 0.5 * c.b * math.log(2.0) - inf_f)
    )


def epsilon_of(model: LossModel, sample: SampleSet, r1: float,
               inf_f: float | None = None) -> float:
    """Short-horizon constant epsilon tied to the level r1."""
    c = model.constants
    if inf_f is None:
        inf_f = empirical_min(model, sample).value
    g0 = float(np.linalg.norm(model.empirical_grad(np.zeros(model.dim), sample)))
    brace = g0 * g0 + (4.0 * c.M**2 / c.m) * (
        r1 + 0.5 * c.b * math.log(2.0) - inf_f)
    if brace <= 0:
        raise NumericError("degenerate model: nonpositive brace in epsilon")
    return float(1.0 / (2.0 * math.sqrt(2.0)) * brace ** (-0.5))


def divergence_tail_bound(M: float, d: int, gamma_s: float, delta: float,
                          t: float) -> float:
    """Tail bound on the flow-vs-diffusion separation probability."""
    if min(delta, t, gamma_s) <= 0:
        raise UsageError("divergence_tail_bound needs delta, t, gamma_s > 0")
    pref = 4.0 * math.exp(M * t) * d * d / delta * math.sqrt(t / (math.pi * gamma_s))
    expo = -math.exp(-2.0 * M * t) * delta**2 * gamma_s / (4.0 * t * d * d)
    return pref * math.exp(expo)


# -- dissipative sandwich (shared by tests and the lemma suite) ---------------


def sandwich_lower(f_cx: float, m: float, b: float, c: float,
                   x_norm_sq: float) -> float:
    """Left side F(cx) + 0.5 (1 - c^2) m |x|^2 + b log c of the sandwich."""
    return f_cx + 0.5 * (1.0 - c * c) * m * x_norm_sq + b * math.log(c)


def sandwich_upper(f0: float, g0_norm: float, M: float, x_norm_sq: float) -> float:
    """Right side F(0) + 0.5 |grad F(0)|^2 + ((M + 1)/2) |x|^2 of the sandwich."""
    return f0 + 0.5 * g0_norm * g0_norm + 0.5 * (M + 1.0) * x_norm_sq


# -- covering-number generalization bound -------------------------------------


@dataclass(frozen=True)
class GenBound:
    rademacher: float
    gap: float  # 4x the Rademacher bound


def covering_gen_bound(model: LossModel, R: float, n: int) -> GenBound:
    """Closed-form Rademacher bound over the ball of radius R, and 4x it.

    ``1/n + (B + (A + M R) R) sqrt(2 d log(n R (A + M R) sqrt(d) + 1) / n)``.
    """
    if R <= 0 or n < 1:
        raise UsageError("covering_gen_bound needs R > 0 and n >= 1")
    c = model.constants
    d = model.dim
    lip = c.A + c.M * R
    env = c.B + lip * R
    val = 1.0 / n + env * math.sqrt(
        2.0 * d * math.log(n * R * lip * math.sqrt(d) + 1.0) / n)
    return GenBound(rademacher=float(val), gap=float(4.0 * val))


def covering_bound_theorem(model: LossModel, R: float, n: int) -> float:
    """Optimized covering bound: inf over eps of the two-term tradeoff.

    Uses the Lipschitz transfer from parameter balls to the function class, so
    the cover size at scale eps is ``((A + M R) R sqrt(d) / eps + 1)^d`` and
    the envelope constant is ``B + (A + M R) R``.  Never exceeds the
    closed-form bound, which is the eps = 1/n evaluation.
    """
    if R <= 0 or n < 1:
        raise UsageError("covering_bound_theorem needs R > 0 and n >= 1")
    c = model.constants
    d = model.dim
    lip = c.A + c.M * R
    env = c.B + lip * R

    def value(log_eps: float) -> float:
        eps = math.exp(log_eps)
        log_cover = d * math.log(lip * R * math.sqrt(d) / eps + 1.0)
        return eps + env * math.sqrt(2.0 * log_cover / n)

    res = minimize_scalar(value, bounds=(math.log(1e-14), math.log(max(env, 1.0))),
                          method="bounded", options={"xatol": 1e-12})
    best = min(float(res.fun), value(math.log(1.0 / n)))
    return best


def theorem_radius(m: float, b: float) -> float:
    """Ball radius sqrt(2 (2 + b log 2) / m) used by the generalization theorem."""
    if m <= 0 or b <= 0:
        raise UsageError("theorem_radius needs m, b > 0")
    return math.sqrt(2.0 * (2.0 + b * math.log(2.0)) / m)


def iterated_log(x: float, k: int) -> float:
    """k-fold composition of log (requires every intermediate be positive)."""
    v = float(x)
    for _ in range(k):
        if v <= 0:
            raise UsageError("iterated_log undefined: intermediate <= 0")
        v = math.log(v)
    return v


def theorem_bound_shape(kind: str, *, constants: tuple[float, ...] | None = None,
                        n: int | None = None, t: float | None = None,
                        beta: float | None = None, s: float | None = None,
                        x0_norm: float = 0.0) -> float:
    """Functional shape of the headline bounds with user-supplied constants.

    The analysis leaves the leading constants implicit, so these values are
    plot overlays only, never certified bounds.  ``kind = "thm1"`` needs
    (n, t, beta); ``kind = "thm2"`` needs (n, s) and uses the absolute value
    of the 4-fold iterated log, which is negative for desk-scale s.
    """
    if kind == "thm1":
        if n is None or t is None or beta is None:
            raise UsageError("thm1 shape needs n, t, beta")
        c1, c2, c3, c4, c5 = constants or (1.0, 1.0, 1.0, 1.0, 1.0)
        term1 = c1 * math.sqrt(math.log(n + 1.0) / n)
        term2 = c2 * (1.0 + x0_norm**3) * math.exp(-t / math.exp(c3 * beta) + c4 * beta)
        term3 = c5 * (1.0 + x0_norm**2) * math.sqrt(math.log(beta + 1.0) / beta)
        return term1 + term2 + term3
    if kind == "thm2":
        if n is None or s is None:
            raise UsageError("thm2 shape needs n, s")
        c1, c2 = (constants or (1.0, 1.0))[:2]
        log4 = iterated_log(s, 4) if s > math.exp(math.e) else None
        if log4 is None:
            raise UsageError("thm2 shape needs s > e^e")
        term1 = c1 * math.sqrt(math.log(n + 1.0) / n)
        term2 = c2 * (1.0 + x0_norm**4) / abs(log4)
        return term1 + term2
    raise UsageError(f"unknown theorem kind {kind!r}")


# -- coupling constants and the rho2 semi-metric ------------------------------


def _panel_gl(lo: np.ndarray, hi: np.ndarray, fn) -> np.ndarray:
    """15-point Gauss-Legendre integral of fn over each [lo_i, hi_i]."""
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    vals = fn(nodes.ravel()).reshape(nodes.shape)
    return (vals * _GL_WEIGHTS[None, :]).sum(axis=1) * half


class CouplingReport:
    """All coupling constants for one (model constants, gamma(t)) pair.

    Construction runs the full chain: Lyapunov pair, set diameters, kappa and
    its weight Q, the rates zeta and xi, and the decay constant c_t, and
    tabulates the concave distance transform f on [0, R2] so that rho2 can be
    evaluated cheaply for whole ensembles.
    """

    def __init__(self, m: float, b: float, M: float, d: int, gamma0: float,
                 gamma_t: float, panels: int = 512):
        if min(m, b, M, gamma0, gamma_t) <= 0 or d < 1:
            raise UsageError("CouplingReport needs positive constants")
        if gamma_t < gamma0 * (1 - 1e-12):
            raise UsageError("gamma_t must be >= gamma0 (gamma is increasing)")
        self.m, self.b, self.M, self.d = float(m), float(b), float(M), int(d)
        self.gamma0, self.gamma_t = float(gamma0), float(gamma_t)

        self.lam, self.C2 = lyapunov_constants(m, b, d, gamma0, 2.0)
        self.C = self.C2 + self.lam

        r1_sq = 2.0 * self.C / self.lam - 2.0
        r2_sq = 4.0 * self.C * (1.0 + 1.0 / self.lam) - 2.0
        # degenerate clamp: an empty sublevel set has zero diameter
        self.R1 = 2.0 * math.sqrt(r1_sq) if r1_sq > 0 else 0.0
        self.R2 = 2.0 * math.sqrt(r2_sq) if r2_sq > 0 else 0.0
        if self.R2 < self.R1:
            raise NumericError("R2 < R1: inconsistent Lyapunov constants")

        self.kappa = self._kappa()
        self.Q = 2.0 * math.sqrt(max(self.kappa - self.kappa**2, 0.0))
        self.a = self.M * self.gamma_t / 8.0
        self.q = 2.0 * self.Q

        self._build_tables(panels)
        self.zeta = 1.0 / self._J_R2 if self._J_R2 > 0 else math.inf
        self.xi = 1.0 / self._J_R1 if self._J_R1 > 0 else math.inf
        self.c_t = min(self.zeta / self.gamma_t, self.lam / 2.0,
                       2.0 * self.C * self.lam * self.kappa)

    # -- scalar pieces ----------------------------------------------------

    def _kappa(self) -> float:
        if self.R1 == 0.0:
            return 0.5
        r = self.R1
        if r < 0.5:
            log_denom = math.log(math.expm1(2.0 * r) - 2.0 * r)
        else:
            log_denom = 2.0 * r + math.log1p(-(1.0 + 2.0 * r) * math.exp(-2.0 * r))
        log_k = (math.log(2.0) - math.log(self.C) - math.log(self.gamma_t)
                 - log_denom - self.M * self.gamma_t / 8.0 * r * r)
        if log_k >= math.log(0.5):
            return 0.5
        return math.exp(log_k)

    # -- kernels ------------------------------------------------------------

    def phi(self, r):
        """Kernel exp(-a r^2 - q r); phi(0) = 1."""
        r = np.asarray(r, dtype=float)
        out = np.exp(-self.a * r * r - self.q * r)
        return float(out) if out.ndim == 0 else out

    def log_Phi(self, r):
        """log of Phi(r) = int_0^r phi, stable for all a r^2 + q r."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if np.any(r < 0):
            raise UsageError("Phi requires r >= 0")
        a, q = self.a, self.q
        sa = math.sqrt(a)
        bb = q / (2.0 * sa)
        out = np.full(r.shape, -np.inf)
        pos = r > 0
        small = pos & (a * r * r + q * r < 1e-2)
        large = pos & ~small
        if large.any():
            rl = r[large]
            t2 = np.exp(-a * rl * rl - q * rl) * erfcx(bb + sa * rl)
            out[large] = (math.log(math.sqrt(math.pi) / (2.0 * sa))
                          + np.log(erfcx(bb) - t2))
        if small.any():
            rs = r[small]
            mid = 0.5 * rs[:, None] * (_GL_NODES[None, :] + 1.0)
            vals = np.exp(-a * mid * mid - q * mid)
            out[small] = np.log((vals * _GL_WEIGHTS[None, :]).sum(axis=1)
                                * 0.5 * rs)
        return out

    def Phi(self, r):
        out = np.exp(self.log_Phi(r))
        return float(out[0]) if np.ndim(r) == 0 else out

    def _log_integrand(self, r: np.ndarray) -> np.ndarray:
        return self.log_Phi(r) + self.a * r * r + self.q * r

    def _integrand(self, r: np.ndarray) -> np.ndarray:
        le = self._log_integrand(np.asarray(r, dtype=float))
        if np.any(le > _MAX_EXPONENT):
            raise NumericError(
                "Phi/phi integrand overflows float64 for these constants; "
                "the rates zeta and xi are not representable (log-domain "
                "evaluation is already in use)")
        return np.exp(le)

    # -- tabulated integrals -----------------------------------------------

    def _build_tables(self, panels: int):
        if self.R2 == 0.0:
            self._J_R1 = 0.0
            self._J_R2 = 0.0
            self._knots = np.array([0.0])
            self._f_lo = self._f_hi = None
            return

        def knot_grid(n_per_seg: int) -> np.ndarray:
            segs = []
            if self.R1 > 0:
                segs.append(np.linspace(0.0, self.R1, n_per_seg + 1))
            start = self.R1
            tail = np.linspace(start, self.R2, n_per_seg + 1)
            segs.append(tail if not segs else tail[1:])
            return np.concatenate(segs)

        def j_of(knots: np.ndarray) -> np.ndarray:
            inc = _panel_gl(knots[:-1], knots[1:], self._integrand)
            return np.concatenate([[0.0], np.cumsum(inc)])

        n = max(64, panels // 2)
        knots = knot_grid(n)
        J = j_of(knots)
        while True:
            n2 = 2 * n
            knots2 = knot_grid(n2)
            J2 = j_of(knots2)
            rel = abs(J2[-1] - J[-1]) / max(J2[-1], 1e-300)
            if self.R1 > 0:
                rel = max(rel, abs(J2[n2] - J[n]) / max(J2[n2], 1e-300))
            knots, J, n = knots2, J2, n2
            if rel <= 1e-10 or n >= 1 << 14:
                if rel > 1e-8:
                    raise NumericError("zeta/xi quadrature did not converge")
                break

        self._knots = knots
        i_r1 = n if self.R1 > 0 else 0  # R1 sits at index n of the 2n+1 knots
        self._J_R1 = float(J[i_r1]) if self.R1 > 0 else 0.0
        self._J_R2 = float(J[-1])
        self._J_spline = CubicSpline(knots, J)

        zeta = 1.0 / self._J_R2 if self._J_R2 > 0 else math.inf
        xi = 1.0 / self._J_R1 if self._J_R1 > 0 else math.inf

        # f knots by nested Gauss-Legendre: inner partial J at outer nodes
        lo, hi = knots[:-1], knots[1:]
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        nodes = mid[:, None] + half[:, None] * _GL_NODES[None, :]   # (P, 15)
        inner_mid = 0.5 * (lo[:, None] + nodes)
        inner_half = 0.5 * (nodes - lo[:, None])
        inner_nodes = (inner_mid[:, :, None]
                       + inner_half[:, :, None] * _GL_NODES[None, None, :])
        inner_vals = self._integrand(inner_nodes.ravel()).reshape(inner_nodes.shape)
        partial = (inner_vals * _GL_WEIGHTS[None, None, :]).sum(axis=2) * inner_half
        J_nodes = J[:-1, None] + partial                            # (P, 15)

        g_nodes = self._g_from_J(J_nodes, zeta, xi)
        phi_nodes = np.exp(-self.a * nodes * nodes - self.q * nodes)
        f_inc = (phi_nodes * g_nodes * _GL_WEIGHTS[None, :]).sum(axis=1) * half
        f = np.concatenate([[0.0], np.cumsum(f_inc)])

        # g has a derivative kink at R1, so f is fitted piecewise
        if self.R1 > 0:
            self._f_lo = CubicSpline(knots[: i_r1 + 1], f[: i_r1 + 1])
            self._f_hi = CubicSpline(knots[i_r1:], f[i_r1:])
        else:
            self._f_lo = None
            self._f_hi = CubicSpline(knots, f)
        self._f_R2 = float(f[-1])

    def _g_from_J(self, J: np.ndarray, zeta: float, xi: float) -> np.ndarray:
        capped = np.minimum(J, self._J_R1) if self._J_R1 > 0 else 0.0
        z_term = 0.0 if math.isinf(zeta) else zeta / 4.0 * J
        x_term = 0.0 if math.isinf(xi) else xi / 4.0 * capped
        return 1.0 - z_term - x_term

    # -- public evaluations --------------------------------------------------

    def J(self, r):
        """int_0^min(r, R2) Phi/phi (tabulated)."""
        r = np.asarray(r, dtype=float)
        out = self._J_spline(np.clip(r, 0.0, self.R2)) if self.R2 > 0 else np.zeros_like(r)
        return float(out) if out.ndim == 0 else out

    def g(self, r):
        """Weight g(r) in [1/2, 1] entering the distance transform."""
        r = np.asarray(r, dtype=float)
        out = self._g_from_J(np.asarray(self.J(r)), self.zeta, self.xi)
        return float(out) if out.ndim == 0 else out

    def f(self, r):
        """Concave distance transform f(r) = int_0^min(r, R2) phi g."""
        r = np.asarray(r, dtype=float)
        if self.R2 == 0.0:
            out = np.zeros_like(r)
            return float(out) if out.ndim == 0 else out
        rc = np.clip(r, 0.0, self.R2)
        if self._f_lo is None:
            out = np.asarray(self._f_hi(rc))
        else:
            out = np.where(rc <= self.R1, self._f_lo(np.minimum(rc, self.R1)),
                           self._f_hi(np.maximum(rc, self.R1)))
        out = np.minimum(out, self._f_R2)
        return float(out) if out.ndim == 0 else out

    def U(self, x, y):
        """Lyapunov weight 1 + kappa V(x) + kappa V(y), V(x) = 1 + |x|^2."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.atleast_2d(np.asarray(y, dtype=float))
        vx = 1.0 + np.sum(x * x, axis=-1)
        vy = 1.0 + np.sum(y * y, axis=-1)
        out = 1.0 + self.kappa * vx + self.kappa * vy
        return float(out[0]) if out.size == 1 else out

    def rho2(self, x, y):
        """Semi-metric rho2(x, y) = f(|x - y|) U(x, y); rho2(x, x) = 0."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if x.shape != y.shape:
            raise UsageError("rho2 needs matching shapes")
        r = np.linalg.norm(x - y, axis=-1)
        out = self.f(r) * self.U(x, y)
        return float(out) if np.ndim(out) == 0 else (
            float(out[0]) if out.size == 1 else out)

    def to_dict(self) -> dict:
        return {
            "inputs": {"m": self.m, "b": self.b, "M": self.M, "d": self.d,
                       "gamma0": self.gamma0, "gamma_t": self.gamma_t},
            "lambda": self.lam,
            "C2": self.C2,
            "C": self.C,
            "R1": self.R1,
            "R2": self.R2,
            "kappa": self.kappa,
            "Q": self.Q,
            "zeta": self.zeta,
            "xi": self.xi,
            "c_t": self.c_t,
        }


def coupling_constants(m: float, b: float, M: float, d: int, gamma0: float,
                       gamma_t: float) -> CouplingReport:
    """Build the full coupling-constant report (see CouplingReport)."""
    return CouplingReport(m, b, M, d, gamma0, gamma_t)
