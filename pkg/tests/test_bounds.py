import dataclasses
import math

import numpy as np
import pytest

from annealab import (
    NumericError,
    RegularityConstants,
    SampleSet,
    UsageError,
    coupling_constants,
    covering_bound_theorem,
    covering_gen_bound,
    divergence_tail_bound,
    epsilon_of,
    level_thresholds,
    lyapunov_constants,
    moment_bound,
    quadratic_data,
    r1_threshold,
    theorem_bound_shape,
    theorem_radius,
)

from oracles import chain_oracle, rho2_oracle


def _with_constants(model, **kw):
    base = dataclasses.asdict(model.constants)
    base.update(kw)
    return dataclasses.replace(model, constants=RegularityConstants(**base))


# -- Lyapunov constants ----------------------------------------------------------


def test_lambda_hand_value():
    lam, _ = lyapunov_constants(2.0, 1.0, 1, 1.0, 2.0)
    assert lam == 2.0


def test_C2_hand_value():
    _, C = lyapunov_constants(2.0, 1.0, 1, 1.0, 2.0)
    assert C == pytest.approx(4.0)


def test_C_power_structure():
    # C(p)/lambda(p) = {...}^(p/2); holding d + p - 2 fixed across (p=2, d=3)
    # and (p=4, d=1) makes the p=4 ratio the square of the p=2 ratio
    lam2, C2 = lyapunov_constants(1.5, 0.7, 3, 2.0, 2.0)
    lam4, C4 = lyapunov_constants(1.5, 0.7, 1, 2.0, 4.0)
    assert C4 / lam4 == pytest.approx((C2 / lam2) ** 2, rel=1e-12)


def test_moment_bound_shape():
    vals = moment_bound(9.0, 0.5, 3.0, np.array([0.0, 1.0, 1e9]))
    assert vals[0] == 9.0
    assert vals[-1] == pytest.approx(6.0)


# -- level thresholds -------------------------------------------------------------


def test_r0_hand_value(quad_model, origin_sample):
    # F(0) = 0, grad F(0) = 0, M = 1, delta = 2 -> r0 = 2
    th = level_thresholds(quad_model, origin_sample, delta=2.0)
    assert th.r0_tilde == pytest.approx(2.0)


def test_r0_at_zero_delta():
    model = quadratic_data(1)
    s = SampleSet(points=np.array([[1.0]]), distribution="uniform-ball", zmax=1.0)
    th = level_thresholds(model, s, delta=0.0)
    # F(0) = 1/2, |grad F(0)| = 1
    assert th.r0_tilde == pytest.approx(0.5 + 0.5)


def test_beta_threshold_hand_value(quad_model, origin_sample):
    model = _with_constants(quad_model, m=1.0, b=4.0, M=1.0)
    th = level_thresholds(model, origin_sample, delta=1.0)
    assert th.beta_threshold == pytest.approx(1.0)


def test_r1_hand_value(quad_model, origin_sample):
    # m = M = b = 1, r0 = 1, delta = 1, F(0) = gradF(0) = inf F = 0
    model = _with_constants(quad_model, m=1.0, b=1.0, M=1.0)
    val = r1_threshold(model, origin_sample, r0=1.0, delta=1.0, inf_f=0.0)
    assert val == pytest.approx(10.0 + 4.0 * math.log(2.0), rel=1e-12)


def test_r1_degenerate_zero(quad_model, origin_sample):
    model = _with_constants(quad_model, b=1e-300)
    val = r1_threshold(model, origin_sample, r0=0.0, delta=0.0, inf_f=0.0)
    assert val == pytest.approx(0.0, abs=1e-297)


def test_r1_monotone_in_r0(quad_model, origin_sample):
    vals = [r1_threshold(quad_model, origin_sample, r0=r0, delta=1.0, inf_f=0.0)
            for r0 in (0.5, 1.0, 2.0)]
    assert vals[0] < vals[1] < vals[2]


def test_epsilon_unit_brace(quad_model, origin_sample):
    # grad F(0) = 0; make (4 M^2/m)(r1 + b log2/2) = 1
    model = _with_constants(quad_model, m=4.0, M=1.0, b=1e-12)
    val = epsilon_of(model, origin_sample, r1=1.0, inf_f=0.0)
    assert val == pytest.approx(1.0 / (2.0 * math.sqrt(2.0)), rel=1e-9)


def test_epsilon_hand_value(quad_model, origin_sample):
    model = _with_constants(quad_model, m=1.0, M=1.0, b=1e-12)
    val = epsilon_of(model, origin_sample, r1=2.0, inf_f=0.0)
    assert val == pytest.approx(1.0 / 8.0, rel=1e-9)


def test_epsilon_decreasing_in_r1(quad_model, origin_sample):
    vals = [epsilon_of(quad_model, origin_sample, r1=r, inf_f=0.0)
            for r in (1.0, 2.0, 4.0)]
    assert vals[0] > vals[1] > vals[2]


def test_divergence_tail_hand_value():
    # 4 e sqrt(1/(50 pi)) exp(-e^{-2} 50/4), computed by hand before the build
    val = divergence_tail_bound(M=1.0, d=1, gamma_s=50.0, delta=1.0, t=1.0)
    assert val == pytest.approx(0.1598094477628890, rel=1e-12)


def test_theorem_radius_hand():
    assert theorem_radius(2.0, 1.0) == pytest.approx(
        math.sqrt((2.0 + math.log(2.0))))


# -- covering bound ----------------------------------------------------------------


def test_covering_gen_bound_hand_value():
    # A = B = M = d = R = 1, n = 1: 1 + {B + (A + M R) R} sqrt(2 log(2 + 1))
    # with B + (A + M R) R = 3
    model = _with_constants(quadratic_data(1), A=1.0, B=1.0, M=1.0)
    gb = covering_gen_bound(model, R=1.0, n=1)
    assert gb.rademacher == pytest.approx(1.0 + 3.0 * math.sqrt(2.0 * math.log(3.0)))
    assert gb.gap == pytest.approx(4.0 * gb.rademacher)


def test_covering_gen_bound_envelope():
    model = quadratic_data(1)
    ratios = []
    for n in (100, 1000, 10_000, 100_000, 1_000_000):
        gb = covering_gen_bound(model, R=2.0, n=n)
        ratios.append(gb.rademacher / math.sqrt(math.log(n + 1.0) / n))
    ratios = np.asarray(ratios)
    assert ratios.max() / ratios.min() < 3.0


def test_covering_gen_bound_increasing_in_R():
    model = quadratic_data(1)
    vals = [covering_gen_bound(model, R, 64).rademacher for R in (0.5, 1.0, 2.0)]
    assert vals[0] < vals[1] < vals[2]


def test_theorem_bound_below_closed_form():
    model = quadratic_data(1)
    for n in (8, 64, 1024):
        assert (covering_bound_theorem(model, 2.0, n)
                <= covering_gen_bound(model, 2.0, n).rademacher + 1e-12)


# -- theorem shapes ----------------------------------------------------------------


def test_thm2_shape_limit():
    s = 1e9
    full = theorem_bound_shape("thm2", n=10**12, s=s)
    log4 = math.log(math.log(math.log(math.log(s))))
    assert full == pytest.approx(1.0 / log4, rel=1e-4)


def test_thm1_shape_at_time_zero():
    val = theorem_bound_shape("thm1", constants=(0.0, 1.0, 1.0, 1.0, 0.0),
                              n=10, t=0.0, beta=2.0, x0_norm=0.0)
    assert val == pytest.approx(math.exp(2.0))


def test_thm2_second_term_decreasing_in_s():
    a = theorem_bound_shape("thm2", constants=(0.0, 1.0), n=10, s=1e7)
    b = theorem_bound_shape("thm2", constants=(0.0, 1.0), n=10, s=2e7)
    assert b < a


def test_shape_validation():
    with pytest.raises(UsageError):
        theorem_bound_shape("thm3", n=1, s=1.0)
    with pytest.raises(UsageError):
        theorem_bound_shape("thm2", n=10, s=2.0)


# -- coupling constants -------------------------------------------------------------


FROZEN = {
    # independent fine-grid trapezoid oracle, computed before the build
    1.0: dict(kappa=1.517913822321e-05, zeta=4.008628455211e-08,
              xi=5.397080579784e-02, c_t=4.008628455211e-08),
    2.0: dict(kappa=1.027136485363e-06, zeta=5.324455007267e-15,
              xi=1.805626052642e-02, c_t=2.662227503633e-15),
    5.0: dict(kappa=1.018406719531e-09, zeta=1.569810007045e-36,
              xi=1.908886278859e-04, c_t=3.139620014090e-37),
    10.0: dict(kappa=2.311779676816e-14, zeta=5.423351994722e-73,
               xi=2.531511660971e-08, c_t=5.423351994722e-74),
}


@pytest.mark.parametrize("gamma_t", sorted(FROZEN))
def test_chain_matches_frozen_oracle(gamma_t):
    rep = coupling_constants(2.0, 1.0, 1.0, 1, 1.0, gamma_t)
    exp = FROZEN[gamma_t]
    assert rep.kappa == pytest.approx(exp["kappa"], rel=1e-7)
    assert rep.zeta == pytest.approx(exp["zeta"], rel=1e-5)
    assert rep.xi == pytest.approx(exp["xi"], rel=1e-5)
    assert rep.c_t == pytest.approx(exp["c_t"], rel=1e-5)


def test_chain_hand_algebra():
    rep = coupling_constants(2.0, 1.0, 1.0, 1, 1.0, 1.0)
    assert rep.lam == 2.0
    assert rep.C == pytest.approx(6.0)
    assert rep.R1 == pytest.approx(4.0)
    assert rep.R2 == pytest.approx(2.0 * math.sqrt(34.0))


def test_chain_live_oracle():
    rep = coupling_constants(1.0, 0.5, 2.0, 2, 1.5, 3.0)
    orc = chain_oracle(1.0, 0.5, 2.0, 2, 1.5, 3.0)
    for key in ("R1", "R2", "kappa", "zeta", "xi", "c_t"):
        assert getattr(rep, key if key != "c_t" else "c_t") == pytest.approx(
            orc[key], rel=1e-5), key


def test_invariant_relations():
    rep = coupling_constants(2.0, 1.0, 1.0, 1, 1.0, 1.0)
    assert rep.kappa <= 0.5
    assert rep.Q == pytest.approx(2.0 * math.sqrt(rep.kappa - rep.kappa**2))
    assert rep.xi >= rep.zeta        # R1 <= R2
    assert rep.c_t <= rep.lam / 2.0


def test_monotone_in_gamma_t():
    gammas = [1.0, 2.0, 5.0, 10.0]
    reps = [coupling_constants(2.0, 1.0, 1.0, 1, 1.0, g) for g in gammas]
    kappas = [r.kappa for r in reps]
    cts = [r.c_t for r in reps]
    assert all(b <= a for a, b in zip(kappas, kappas[1:]))
    assert all(b <= a for a, b in zip(cts, cts[1:]))


def test_kappa_clamp_arithmetic():
    # the formula can never exceed 1/16 for valid inputs (C gamma R1^2 >= 16 d),
    # so the 1/2 clamp is a guard; confirm the value is strictly interior
    for args in ((2.0, 1.0, 1.0, 1, 1.0, 1.0), (0.1, 1e-3, 1e-3, 1, 200.0, 200.0)):
        rep = coupling_constants(*args)
        assert 0.0 < rep.kappa < 0.5


def test_kernel_properties():
    rep = coupling_constants(2.0, 1.0, 1.0, 1, 1.0, 1.0)
    assert rep.phi(0.0) == 1.0
    rs = np.linspace(0.0, rep.R2, 200)
    assert np.all(rep.Phi(rs) <= rs + 1e-12)
    g = rep.g(rs)
    assert g[0] == pytest.approx(1.0)
    assert np.all(np.diff(g) <= 1e-12)
    assert np.all(g >= 0.5 - 1e-9)
    f = rep.f(rs)
    assert np.all(np.diff(f) >= -1e-12)            # non-decreasing
    assert np.all(np.diff(np.diff(f)) <= 1e-9)     # concave
    # rho2 dominates a multiple of the distance below R2
    floor = rep.phi(rep.R2) * rep.g(rep.R2)
    assert np.all(f[1:] >= floor * rs[1:] * (1 - 1e-9))


def test_rho2_zero_and_symmetry():
    rep = coupling_constants(2.0, 1.0, 1.0, 1, 1.0, 1.0)
    x = np.array([0.7])
    y = np.array([-0.2])
    assert rep.rho2(x, x) == 0.0
    assert rep.rho2(x, y) == pytest.approx(rep.rho2(y, x), rel=1e-14)


def test_rho2_frozen_oracle_value():
    rep = coupling_constants(2.0, 1.0, 1.0, 1, 1.0, 1.0)
    # fine-grid Simpson/trapezoid oracle value computed before the build
    assert rep.rho2(np.array([0.0]), np.array([1.0])) == pytest.approx(
        9.504827487466e-01, rel=1e-6)


def test_rho2_live_oracle():
    rep = coupling_constants(1.0, 0.5, 2.0, 1, 1.5, 3.0)
    orc = chain_oracle(1.0, 0.5, 2.0, 1, 1.5, 3.0)
    for x, y in ((0.0, 1.0), (0.5, -0.5), (2.0, 2.5), (0.0, 50.0)):
        assert rep.rho2(np.array([x]), np.array([y])) == pytest.approx(
            rho2_oracle(x, y, orc), rel=1e-5)


def test_rho2_batch_evaluation():
    rep = coupling_constants(2.0, 1.0, 1.0, 1, 1.0, 1.0)
    X = np.array([[0.0], [1.0], [2.0]])
    Y = np.array([[0.0], [0.5], [-1.0]])
    vals = rep.rho2(X, Y)
    assert vals.shape == (3,)
    assert vals[0] == 0.0
    for i in range(3):
        assert vals[i] == pytest.approx(rep.rho2(X[i], Y[i]), rel=1e-12)


def test_coupling_validation():
    with pytest.raises(UsageError):
        coupling_constants(-1.0, 1.0, 1.0, 1, 1.0, 1.0)
    with pytest.raises(UsageError):
        coupling_constants(1.0, 1.0, 1.0, 1, 2.0, 1.0)  # gamma_t < gamma0


def test_overflow_raises_numeric_error():
    # extreme gamma_t makes exp(a R^2) exceed float64 range
    with pytest.raises(NumericError):
        coupling_constants(2.0, 1.0, 1.0, 1, 1.0, 500.0)


def test_report_serialization():
    rep = coupling_constants(2.0, 1.0, 1.0, 1, 1.0, 2.0)
    d = rep.to_dict()
    assert d["lambda"] == 2.0
    assert set(d) >= {"R1", "R2", "kappa", "zeta", "xi", "c_t", "inputs"}
