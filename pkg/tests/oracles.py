"""Independent brute-force oracles used only by the tests.

Everything here avoids the code paths it checks: plain cumulative trapezoid
and Simpson rules on fine uniform grids, central finite differences, and
tensor-grid quadrature.  No adaptive quadrature, no closed-form special
functions.
"""

import numpy as np


def chain_oracle(m, b, M, d, gamma0, gamma_t, n1=1 << 18, n2=1 << 18):
    """Coupling-constant chain by fine-grid trapezoid quadrature."""
    lam = m
    C2 = lam * ((2.0 / m) * (d / gamma0 + b))
    C = C2 + lam
    r1sq = 2.0 * C / lam - 2.0
    R1 = 2.0 * np.sqrt(r1sq) if r1sq > 0 else 0.0
    r2sq = 4.0 * C * (1.0 + 1.0 / lam) - 2.0
    R2 = 2.0 * np.sqrt(r2sq) if r2sq > 0 else 0.0
    denom = C * gamma_t * (np.expm1(2.0 * R1) - 2.0 * R1)
    kappa = min(0.5, 2.0 / denom * np.exp(-M * gamma_t / 8.0 * R1**2))
    Q = 2.0 * np.sqrt(kappa - kappa**2)
    a = M * gamma_t / 8.0
    q = 2.0 * Q

    g1 = np.linspace(0.0, R1, n1 + 1)
    g2 = np.linspace(R1, R2, n2 + 1)
    s = np.concatenate([g1, g2[1:]])
    phi = np.exp(-a * s**2 - q * s)
    ds = np.diff(s)
    Phi = np.concatenate([[0.0], np.cumsum(0.5 * ds * (phi[1:] + phi[:-1]))])
    integrand = Phi / phi
    J = np.concatenate([[0.0], np.cumsum(0.5 * ds * (integrand[1:] + integrand[:-1]))])
    inv_xi = J[n1]
    inv_zeta = J[-1]
    zeta = 1.0 / inv_zeta
    xi = 1.0 / inv_xi
    c_t = min(zeta / gamma_t, lam / 2.0, 2.0 * C * lam * kappa)

    J_r1 = np.minimum(J, inv_xi)
    g = 1.0 - zeta / 4.0 * J - xi / 4.0 * J_r1
    fg = phi * g
    f = np.concatenate([[0.0], np.cumsum(0.5 * ds * (fg[1:] + fg[:-1]))])
    return {"lam": lam, "C2": C2, "C": C, "R1": R1, "R2": R2, "kappa": kappa,
            "Q": Q, "zeta": zeta, "xi": xi, "c_t": c_t, "grid": s, "f": f}


def rho2_oracle(x, y, chain) -> float:
    """rho2 from the tabulated chain oracle (1-d points)."""
    r = abs(float(x) - float(y))
    fval = np.interp(min(r, chain["R2"]), chain["grid"], chain["f"])
    U = (1.0 + chain["kappa"] * (1.0 + float(x)**2)
         + chain["kappa"] * (1.0 + float(y)**2))
    return float(fval * U)


def central_diff_grad(fn, w, step=1e-5):
    """Central finite-difference gradient of a scalar function."""
    w = np.asarray(w, dtype=float)
    out = np.empty_like(w)
    for i in range(w.size):
        e = np.zeros_like(w)
        e[i] = step
        out[i] = (fn(w + e) - fn(w - e)) / (2.0 * step)
    return out


def expected_loss_quadrature(model, w, n_grid=20001) -> float:
    """E_z l(w; z) by tensor-grid Simpson over the declared distribution."""
    d = model.dim
    w = np.asarray(w, dtype=float)
    if model.distribution == "uniform-ball" and d == 1:
        z = np.linspace(-model.zmax, model.zmax, n_grid)
        vals = np.array([model.loss(w, np.array([zi])) for zi in z])
        weights = _simpson(n_grid)
        return float((weights * vals).sum() / weights.sum())
    if model.distribution == "uniform-ball" and d == 2:
        n = 801
        ax = np.linspace(-model.zmax, model.zmax, n)
        xx, yy = np.meshgrid(ax, ax, indexing="ij")
        pts = np.column_stack([xx.ravel(), yy.ravel()])
        inside = np.einsum("ij,ij->i", pts, pts) <= model.zmax**2
        vals = model._loss_many(w[None, :], pts[inside])[0]
        return float(vals.mean())
    raise NotImplementedError


def _simpson(n):
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w


def harmonic_brute(k: int) -> float:
    return float(np.sum(1.0 / np.arange(1, k + 1)))
