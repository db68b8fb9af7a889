import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from annealab import (
    RegularityConstants,
    SampleSet,
    UsageError,
    quadratic_data,
    ripple,
    smoothed_double_well,
    verify_regularity,
)
from annealab.losses import builtin_models

from oracles import central_diff_grad, expected_loss_quadrature


# -- pointwise loss -----------------------------------------------------------


def test_quadratic_loss_at_coincident_points(quad_model):
    assert quad_model.loss([0.0], [0.0]) == 0.0


def test_ripple_loss_vanishes_at_origin():
    model = ripple(1, mu=1.0, eps=0.5)
    for z in ([0.3], [-0.9], [1.0]):
        assert model.loss([0.0], z) == 0.0


def test_quadratic_loss_hand_value(quad_model):
    # 0.5 (w - z)^2 at w=2, z=1; z outside the unit ball is rejected, so zmax=2
    model = quadratic_data(1, zmax=2.0)
    assert model.loss([2.0], [1.0]) == pytest.approx(0.5, abs=0.0)


def test_loss_dimension_mismatch(quad_model):
    with pytest.raises(UsageError):
        quad_model.loss([1.0, 2.0], [0.0])
    with pytest.raises(UsageError):
        quad_model.loss([1.0], [0.0, 0.0])


def test_data_outside_ball_rejected(quad_model):
    with pytest.raises(UsageError):
        quad_model.loss([0.0], [2.0])


# -- gradients ----------------------------------------------------------------


def test_quadratic_grad_zero_at_minimum(quad_model):
    assert np.allclose(quad_model.grad([0.7], [0.7]), 0.0)


def test_ripple_grad_zero_at_origin():
    model = ripple(1, mu=1.0, eps=0.5)
    assert model.grad([0.0], [1.0]) == pytest.approx(0.0)


def test_quadratic_grad_hand_value():
    model = quadratic_data(2)
    np.testing.assert_allclose(model.grad([1.0, 1.0], [0.0, 0.0]), [1.0, 1.0])


@pytest.mark.parametrize("factory", [
    lambda: quadratic_data(1),
    lambda: quadratic_data(2),
    lambda: ripple(1, mu=1.0, eps=0.5),
    lambda: ripple(2, mu=0.8, eps=0.3),
    lambda: smoothed_double_well(),
])
def test_gradient_matches_finite_differences(factory):
    model = factory()
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(1000):
        w = rng.uniform(-4, 4, size=model.dim)
        z = model.draw_sample(1, seed=int(rng.integers(2**31))).points[0]
        grad = model.grad(w, z)
        fd = central_diff_grad(lambda v: model.loss(v, z), w, step=1e-5)
        scale = max(np.linalg.norm(grad), 1.0)
        worst = max(worst, np.linalg.norm(grad - fd) / scale)
    assert worst <= 1e-5


# -- empirical quantities ------------------------------------------------------


def test_empirical_singleton_equals_pointwise(quad_model, origin_sample):
    w = [0.4]
    assert quad_model.empirical_loss(w, origin_sample) == quad_model.loss(
        w, origin_sample.points[0])


def test_empirical_loss_hand_value(quad_model):
    s = SampleSet(points=np.array([[-1.0], [1.0]]),
                  distribution="uniform-ball", zmax=1.0)
    assert quad_model.empirical_loss([0.0], s) == pytest.approx(0.5)


def test_empirical_mean_invariance_under_duplication():
    model = ripple(1)
    pts = np.array([[0.3], [-0.8]])
    s1 = SampleSet(points=pts, distribution="uniform-ball", zmax=1.0)
    s2 = SampleSet(points=np.vstack([pts, pts]),
                   distribution="uniform-ball", zmax=1.0)
    w = [1.2]
    assert model.empirical_loss(w, s1) == pytest.approx(
        model.empirical_loss(w, s2), rel=1e-14)


def test_empirical_batch_matches_scalar(quad_model, small_sample):
    W = np.array([[0.1], [0.5], [-2.0]])
    batch = quad_model.empirical_loss(W, small_sample)
    for i, w in enumerate(W):
        assert batch[i] == pytest.approx(
            quad_model.empirical_loss(w, small_sample), rel=1e-12)
    gbatch = quad_model.empirical_grad(W, small_sample)
    for i, w in enumerate(W):
        np.testing.assert_allclose(gbatch[i],
                                   quad_model.empirical_grad(w, small_sample))


def test_weighted_loss_and_grad_match_manual(small_sample):
    model = ripple(1, mu=0.7, eps=0.4)
    rng = np.random.default_rng(3)
    sample = model.draw_sample(6, seed=5)
    wts = rng.choice([-1.0, 1.0], size=6)
    w = np.array([0.8])
    manual = sum(wt * model.loss(w, z) for wt, z in zip(wts, sample.points))
    assert model.weighted_loss(w, sample, wts) == pytest.approx(manual)
    manual_g = sum(wt * model.grad(w, z) for wt, z in zip(wts, sample.points))
    np.testing.assert_allclose(model.weighted_grad(w, sample, wts), manual_g,
                               rtol=1e-12)


def test_empty_sample_rejected():
    with pytest.raises(UsageError):
        SampleSet(points=np.empty((0, 1)), distribution="uniform-ball", zmax=1.0)


# -- expected loss --------------------------------------------------------------


def test_quadratic_expected_loss_interval(quad_model):
    # uniform on [-1, 1]: E[z^2]/2 = 1/6
    assert quad_model.expected_loss([0.0]) == pytest.approx(1.0 / 6.0)


def test_quadratic_min_expected_loss_cube_d2():
    model = quadratic_data(2, zmax=math.sqrt(2.0), distribution="uniform-cube",
                           cube_half_width=1.0)
    assert model.min_expected_loss() == pytest.approx(1.0 / 3.0)


def test_ripple_expected_loss_zero_at_origin():
    for model in (ripple(1), ripple(2), ripple(1, distribution="point-mass",
                                               point=[0.5])):
        assert model.expected_loss(np.zeros(model.dim)) == pytest.approx(0.0)
        assert model.min_expected_loss() == 0.0


@pytest.mark.parametrize("dim", [1, 2])
def test_ripple_expected_loss_matches_quadrature(dim):
    model = ripple(dim, mu=1.0, eps=0.5)
    rng = np.random.default_rng(19)
    for _ in range(5):
        w = rng.uniform(-3, 3, size=dim)
        brute = expected_loss_quadrature(model, w)
        tol = 1e-8 if dim == 1 else 2e-3  # d=2 oracle is a coarse disk average
        assert model.expected_loss(w) == pytest.approx(brute, abs=tol)


def test_quadratic_expected_loss_matches_quadrature():
    model = quadratic_data(1)
    brute = expected_loss_quadrature(model, [0.7])
    assert model.expected_loss([0.7]) == pytest.approx(brute, abs=1e-9)


# -- regularity verification -----------------------------------------------------


@pytest.mark.parametrize("factory", [
    lambda: quadratic_data(1),
    lambda: quadratic_data(2),
    lambda: ripple(1),
    lambda: ripple(2, mu=0.5, eps=1.0),
    lambda: smoothed_double_well(),
])
def test_declared_constants_verify(factory):
    report = verify_regularity(factory(), probe_count=800, seed=2)
    assert report.passed, report.violations


def test_overclaimed_dissipativity_fails():
    model = quadratic_data(1)
    import dataclasses
    bad = dataclasses.replace(
        model, constants=RegularityConstants(m=10.0, b=0.5, M=1.0, A=1.0, B=0.5))
    report = verify_regularity(bad, probe_count=800, seed=2)
    assert not report.passed
    assert "dissipativity" in ",".join(report.violations)


def test_report_carries_empirical_constants(quad_model):
    report = verify_regularity(quad_model, probe_count=500, seed=0)
    assert report.M_emp <= quad_model.constants.M + 1e-9
    assert report.A_emp <= quad_model.constants.A + 1e-9
    assert report.B_emp <= quad_model.constants.B + 1e-9


# -- dissipative sandwich and level sets -----------------------------------------


@pytest.mark.parametrize("factory", [
    lambda: quadratic_data(1),
    lambda: ripple(1),
    lambda: smoothed_double_well(),
])
def test_dissipative_sandwich_probes(factory):
    from annealab.experiments import sandwich_check
    model = factory()
    sample = model.draw_sample(16, seed=4)
    ok, margin = sandwich_check(model, sample, probes=2000, seed=8)
    assert ok, f"sandwich margin {margin}"


def test_level_set_radius_probes(ripple_model):
    from annealab.experiments import level_set_radius_check
    from annealab.reference import empirical_min
    sample = ripple_model.draw_sample(16, seed=4)
    inf_f = empirical_min(ripple_model, sample).value
    ok, margin = level_set_radius_check(ripple_model, sample,
                                        level=inf_f + 2.0, inf_f=inf_f,
                                        probes=2000, seed=9)
    assert ok, f"level-set margin {margin}"


# -- sampling and serialization ---------------------------------------------------


@given(n=st.integers(min_value=1, max_value=64),
       seed=st.integers(min_value=0, max_value=2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_draw_sample_respects_ball(n, seed):
    model = ripple(2, zmax=1.5)
    s = model.draw_sample(n, seed=seed)
    assert s.n == n
    assert np.all(np.linalg.norm(s.points, axis=1) <= 1.5 + 1e-12)


def test_draw_sample_deterministic(quad_model):
    a = quad_model.draw_sample(10, seed=123)
    b = quad_model.draw_sample(10, seed=123)
    np.testing.assert_array_equal(a.points, b.points)


def test_model_round_trip(ripple_model):
    from annealab.losses import LossModel
    clone = LossModel.from_dict(ripple_model.to_dict())
    assert clone == ripple_model


def test_sample_set_round_trip(small_sample):
    clone = SampleSet.from_dict(small_sample.to_dict())
    np.testing.assert_array_equal(clone.points, small_sample.points)
    assert clone.distribution == small_sample.distribution
