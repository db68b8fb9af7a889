"""Cooling and step-size schedules, and the time change between them.

The inverse temperature is the triple-iterated logarithm
``gamma(t) = log log log(t + c3)`` with ``c3 = e^(e^e)``, which is strictly
increasing from ``gamma(0) = 1`` and asymptotically equal to the plain
triple log.  Step sizes are ``eta_k = 1/k`` with cumulative grid times
``T_k = sum_{j<=k} 1/j`` (harmonic numbers).  The time change ``alpha(s, t)``
solves ``int_s^alpha gamma(s)/gamma(u) du = t`` and satisfies
``alpha(s, t) >= s + t`` always, and ``alpha(s, t) <= s + 2t`` for large
``s`` and ``t <= s``.

A constant-gamma test mode turns the annealed process into a fixed
temperature one; in that mode ``alpha(s, t) = s + t`` exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import NumericError, UsageError

E_CUBE = math.exp(math.exp(math.e))  # e^(e^e): offset making gamma(0) = 1

_EULER_GAMMA = 0.5772156649015328606
_EXACT_HARMONIC_LIMIT = 1_000_000


def _harmonic_table() -> np.ndarray:
    global _H_TABLE
    try:
        return _H_TABLE
    except NameError:
        _H_TABLE = np.concatenate(
            [[0.0], np.cumsum(1.0 / np.arange(1, _EXACT_HARMONIC_LIMIT + 1))]
        )
        return _H_TABLE


def harmonic(k) -> float | np.ndarray:
    """Harmonic number H_k = T_k (vectorized; asymptotic beyond 10^6)."""
    karr = np.asarray(k)
    scalar = karr.ndim == 0
    karr = np.atleast_1d(karr).astype(np.int64)
    if np.any(karr < 0):
        raise UsageError("harmonic index must be >= 0")
    table = _harmonic_table()
    out = np.empty(karr.shape, dtype=float)
    small = karr <= _EXACT_HARMONIC_LIMIT
    out[small] = table[karr[small]]
    big = ~small
    if big.any():
        kk = karr[big].astype(float)
        out[big] = np.log(kk) + _EULER_GAMMA + 0.5 / kk - 1.0 / (12.0 * kk * kk)
    return float(out[0]) if scalar else out


def harmonic_inverse(t) -> int | np.ndarray:
    """Largest k with T_k <= t (0 for t < 1).  Vectorized."""
    tarr = np.asarray(t, dtype=float)
    scalar = tarr.ndim == 0
    tarr = np.atleast_1d(tarr)
    table = _harmonic_table()
    out = np.empty(tarr.shape, dtype=np.int64)
    small = tarr < table[-1]
    # searchsorted(side=right) - 1 gives the last index with H <= t
    out[small] = np.searchsorted(table, tarr[small], side="right") - 1
    big = ~small
    if big.any():
        guess = np.floor(np.exp(tarr[big] - _EULER_GAMMA)).astype(np.int64)
        # fix up the floor by comparing the asymptotic H at neighbors
        for _ in range(3):
            too_high = harmonic(guess) > tarr[big]
            guess = np.where(too_high, guess - 1, guess)
            too_low = harmonic(guess + 1) <= tarr[big]
            guess = np.where(too_low, guess + 1, guess)
        out[big] = guess
    return int(out[0]) if scalar else out


@dataclass(frozen=True)
class Schedule:
    """Inverse-temperature schedule plus the 1/k step-size sequence.

    ``mode = "iterated-log"`` gives ``gamma(t) = scale * log^3(t + c3)`` with
    the scale chosen so ``gamma(0) = gamma0`` (identity scale for the default
    ``gamma0 = 1``).  ``mode = "constant"`` fixes ``gamma`` at ``gamma0``.
    """

    mode: str = "iterated-log"
    gamma0: float = 1.0
    c3: float = E_CUBE

    def __post_init__(self):
        if self.mode not in ("iterated-log", "constant"):
            raise UsageError(f"unknown schedule mode {self.mode!r}")
        if self.gamma0 <= 0:
            raise UsageError("gamma0 must be positive")
        if self.mode == "iterated-log" and math.log(math.log(self.c3)) <= 1.0:
            raise UsageError("c3 too small: triple log not positive at t = 0")

    @property
    def _scale(self) -> float:
        return self.gamma0 / math.log(math.log(math.log(self.c3)))

    def gamma(self, t):
        """gamma(t) for scalar, array, or (huge) integer times t >= 0."""
        if self.mode == "constant":
            if np.ndim(t) == 0:
                return self.gamma0
            return np.full(np.shape(t), self.gamma0)
        if isinstance(t, int):
            # arbitrary-precision integers survive t + c3 overflowing float
            try:
                tf = float(t)
            except OverflowError:
                # c3/t is far below resolution at this magnitude
                return self._scale * math.log(math.log(math.log(t)))
            return self._scale * math.log(math.log(math.log(tf + self.c3)))
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise UsageError("gamma requires t >= 0")
        out = self._scale * np.log(np.log(np.log(t + self.c3)))
        return float(out) if out.ndim == 0 else out

    def eta(self, k: int) -> float:
        """Step size eta_k = 1/k."""
        if k < 1:
            raise UsageError("eta index must be >= 1")
        return 1.0 / k

    def t_grid(self, k) -> float | np.ndarray:
        """Cumulative grid time T_k (T_0 = 0)."""
        return harmonic(k)

    def phi(self, t):
        """Last-grid-time map: T_k for t in (T_k, T_{k+1}], 0 for t <= T_1."""
        tarr = np.asarray(t, dtype=float)
        scalar = tarr.ndim == 0
        tarr = np.atleast_1d(tarr)
        if np.any(tarr < 0):
            raise UsageError("phi requires t >= 0")
        k = harmonic_inverse(tarr)
        # half-open on the left: t exactly at T_k belongs to (T_{k-1}, T_k]
        exact = (k >= 1) & (harmonic(np.maximum(k, 1)) == tarr)
        k = np.where(exact, k - 1, k)
        out = harmonic(k)
        return float(out[0]) if scalar else out

    def eta_tilde(self, k: int, epsabs: float = 1e-10) -> float:
        """Aggregated noise variance: integral of 2/gamma over (T_k, T_{k+1}].

        Accepts k >= 0; the k = 0 interval is (0, T_1].
        """
        if k < 0:
            raise UsageError("eta_tilde index must be >= 0")
        lo = harmonic(k)
        hi = harmonic(k + 1)
        val, err = quad(lambda u: 2.0 / self.gamma(u), lo, hi,
                        epsabs=epsabs, epsrel=1e-12, limit=200)
        if not math.isfinite(val) or err > max(epsabs, 1e-8 * abs(val)):
            raise NumericError(f"eta_tilde quadrature failed at k={k}: err={err}")
        return val

    def alpha(self, s: float, t: float, residual_tol: float = 1e-8,
              max_expansions: int = 200) -> float:
        """Time change: the unique r with ``int_s^r gamma(s)/gamma(u) du = t``.

        Root-found on the bracket ``[s + t, s + 2t]``, with the upper end
        doubled geometrically when the bracket is too short (only possible at
        small ``s``, where the two-sided bound of the large-``s`` lemma is not
        yet in force).
        """
        if s < 0 or t < 0:
            raise UsageError("alpha requires s >= 0 and t >= 0")
        if t == 0.0:
            return float(s)
        gs = self.gamma(s)
        tol = residual_tol * max(1.0, t)

        def G(r: float) -> float:
            val, _ = quad(lambda u: gs / self.gamma(u), s, r,
                          epsabs=1e-10 * max(1.0, t), epsrel=1e-13, limit=500)
            return val - t

        lo, hi = s + t, s + 2.0 * t
        g_lo = G(lo)
        if g_lo >= 0.0:
            # gamma constant on [s, lo] to quadrature precision; lo is the root
            if g_lo > tol:
                raise NumericError(f"alpha residual {g_lo} exceeds tolerance {tol}")
            return float(lo)
        g_hi = G(hi)
        expansions = 0
        while g_hi < 0.0:
            expansions += 1
            if expansions > max_expansions:
                raise NumericError("alpha bracket expansion did not converge")
            hi = s + 2.0 * (hi - s)
            g_hi = G(hi)
        root = brentq(G, lo, hi, xtol=1e-12, rtol=8.9e-16, maxiter=200)
        res = G(root)
        if abs(res) > tol:
            raise NumericError(f"alpha residual {res} exceeds tolerance {tol}")
        return float(root)
