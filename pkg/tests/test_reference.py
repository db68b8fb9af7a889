import dataclasses
import math

import numpy as np
import pytest

from annealab import (
    SampleSet,
    UsageError,
    empirical_min,
    gibbs_expectation,
    grid_min,
    make_gibbs_spec,
    ou_second_moment,
    quadratic_data,
    ripple,
    smoothed_double_well,
)


# -- Gibbs quadrature -----------------------------------------------------------


@pytest.mark.parametrize("beta", [1.0, 5.0])
def test_gibbs_gaussian_energy(beta, quad_model, origin_sample):
    # L_n(w) = w^2/2, so the Gibbs measure is N(0, 1/beta) and E[L_n] = 1/(2 beta)
    spec = make_gibbs_spec(quad_model, origin_sample, beta=beta)
    val = gibbs_expectation(spec)
    assert val == pytest.approx(1.0 / (2.0 * beta), rel=1e-6)


def test_gibbs_normalization(quad_model, origin_sample):
    spec = make_gibbs_spec(quad_model, origin_sample, beta=2.0)
    assert gibbs_expectation(spec, lambda W: np.ones(W.shape[0])) == pytest.approx(1.0)


def test_gibbs_odd_observable_vanishes(quad_model, origin_sample):
    spec = make_gibbs_spec(quad_model, origin_sample, beta=2.0)
    val = gibbs_expectation(spec, lambda W: W[:, 0] ** 3)
    assert abs(val) <= 1e-8


def test_gibbs_truncation_bump(quad_model, origin_sample):
    spec = make_gibbs_spec(quad_model, origin_sample, beta=1.0)
    bumped = dataclasses.replace(spec, r_trunc=1.25 * spec.r_trunc)
    a = gibbs_expectation(spec)
    b = gibbs_expectation(bumped)
    assert abs(a - b) <= 1e-8 * max(abs(a), 1.0)


def test_gibbs_resolution_self_consistency(ripple_model):
    sample = ripple_model.draw_sample(8, seed=3)
    lo = make_gibbs_spec(ripple_model, sample, beta=3.0, resolution=257)
    hi = make_gibbs_spec(ripple_model, sample, beta=3.0, resolution=513)
    a = gibbs_expectation(lo)
    b = gibbs_expectation(hi)
    assert abs(a - b) <= 1e-6 * max(abs(b), 1e-12)


def test_gibbs_2d():
    model = quadratic_data(2)
    sample = SampleSet(points=np.zeros((1, 2)), distribution="uniform-ball",
                       zmax=1.0)
    spec = make_gibbs_spec(model, sample, beta=2.0, resolution=257)
    # independent coordinates: E[|w|^2/2] = d/(2 beta)
    assert gibbs_expectation(spec) == pytest.approx(2.0 / (2.0 * 2.0), rel=1e-5)


def test_gibbs_rejects_high_dimension():
    model = quadratic_data(3)
    sample = SampleSet(points=np.zeros((1, 3)), distribution="uniform-ball",
                       zmax=1.0)
    with pytest.raises(UsageError):
        make_gibbs_spec(model, sample, beta=1.0)


# -- OU closed form ---------------------------------------------------------------


def test_ou_moment_initial_and_stationary():
    assert ou_second_moment([3.0], rate=1.0, noise_variance=2.0, t=0.0) == 9.0
    limit = ou_second_moment([3.0], rate=1.0, noise_variance=2.0, t=1e9)
    assert limit == pytest.approx(1.0)  # d * nv / (2 rate)


def test_ou_moment_langevin_noise_scale():
    # noise sqrt(2/beta): stationary second moment d/beta
    beta = 4.0
    val = ou_second_moment(np.zeros(2), rate=1.0, noise_variance=2.0 / beta,
                           t=1e9)
    assert val == pytest.approx(2.0 / beta)


def test_ou_moment_monotone_from_large_start():
    vals = [ou_second_moment([3.0], 1.0, 2.0, t) for t in (0.0, 0.5, 1.0, 2.0)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


# -- grid minimization ---------------------------------------------------------


def test_grid_min_quadratic_exact(quad_model):
    s = SampleSet(points=np.array([[0.5]]), distribution="uniform-ball", zmax=1.0)
    res = grid_min(lambda W: quad_model.empirical_loss(W, s), [-2.0], [2.0],
                   resolution=401)
    assert res.value == pytest.approx(0.0, abs=1e-12)
    assert res.argmin[0] == pytest.approx(0.5, abs=1e-6)


def test_grid_min_double_well(dw_model, origin_sample):
    res = grid_min(lambda W: dw_model.empirical_loss(W, origin_sample),
                   [-4.0], [4.0], resolution=801)
    assert res.value == pytest.approx(0.0, abs=1e-10)
    assert abs(res.argmin[0]) == pytest.approx(1.0, abs=1e-5)


def test_grid_min_ripple_at_origin():
    model = ripple(1, mu=1.0, eps=0.5)
    s = SampleSet(points=np.array([[1.0]]), distribution="uniform-ball", zmax=1.0)
    res = grid_min(lambda W: model.empirical_loss(W, s), [-3.0], [3.0],
                   resolution=601)
    assert res.value == pytest.approx(0.0, abs=1e-12)
    assert res.argmin[0] == pytest.approx(0.0, abs=1e-8)


def test_grid_min_polish_never_increases(ripple_model):
    sample = ripple_model.draw_sample(16, seed=9)
    res = empirical_min(ripple_model, sample, resolution=501)
    assert res.value <= res.grid_value + 1e-15


def test_grid_min_below_probed_values(ripple_model):
    sample = ripple_model.draw_sample(16, seed=9)
    res = empirical_min(ripple_model, sample)
    rng = np.random.default_rng(0)
    probes = rng.uniform(-3, 3, size=(200, 1))
    assert np.all(ripple_model.empirical_loss(probes, sample) >= res.value - 1e-12)


def test_grid_min_2d():
    model = quadratic_data(2)
    s = SampleSet(points=np.array([[0.2, -0.3]]), distribution="uniform-ball",
                  zmax=1.0)
    res = grid_min(lambda W: model.empirical_loss(W, s),
                   [-1.0, -1.0], [1.0, 1.0], resolution=201)
    np.testing.assert_allclose(res.argmin, [0.2, -0.3], atol=1e-5)


def test_grid_min_rejects_3d():
    with pytest.raises(UsageError):
        grid_min(lambda W: np.zeros(W.shape[0]), [-1.0] * 3, [1.0] * 3)
