"""Posterior update, likelihood weighting, and termination logic.

Oracle cases are evaluated by hand: for a single measurement (n = 1) the
log-likelihood is -(1/2)(1/2)(e - m)^2 / (2 s^2) = -(e - m)^2 / (4 s^2)
when both error std devs equal s.
"""

import math

import numpy as np
import pytest

from gasloc.ste import (
    CONTINUE,
    CONVERGED,
    MAX_ITER,
    EstimationError,
    NoiseModel,
    Posterior,
    TerminationConfig,
    check_termination,
    estimate_source,
    log_likelihood,
    log_likelihood_many,
    make_prior,
    mass_bounding_diagonal,
    noise_for,
    update_posterior,
)
from gasloc.world import Environment, ValidationError, rasterize_rectangles


def make_env(width=6, height=5, cell_size=0.5, rects=()):
    mask = rasterize_rectangles(width, height, cell_size, rects)
    return Environment(width_cells=width, height_cells=height, cell_size=cell_size,
                       obstacle_mask=mask)


def test_log_likelihood_hand_case():
    noise = NoiseModel(sigma_M=0.2, sigma_E=0.2)
    # n=1: -(1/2) * (1/2) * (0.5)^2 / 0.08 = -0.78125
    got = log_likelihood([1.0], [1.5], noise)
    assert got == pytest.approx(-0.5 * 0.5 * 0.25 / 0.08)


def test_log_likelihood_weight_grows_with_n():
    noise = NoiseModel(sigma_M=0.2, sigma_E=0.2)
    # same per-sample residual, increasing n: weight n/(n+1) -> 1
    single = log_likelihood([1.0], [1.5], noise)
    ten = log_likelihood([1.0] * 10, [1.5] * 10, noise)
    assert ten == pytest.approx(single * 10 * (10 / 11) / (1 / 2))


def test_log_likelihood_many_matches_scalar_loop():
    rng = np.random.default_rng(9)
    m = rng.normal(size=17)
    e = rng.normal(size=(23, 17))
    noise = NoiseModel(sigma_M=0.3, sigma_E=0.1)
    got = log_likelihood_many(m, e, noise)
    expected = [log_likelihood(m, e[j], noise) for j in range(23)]
    np.testing.assert_allclose(got, expected)


def test_log_likelihood_shape_errors():
    noise = NoiseModel(sigma_M=0.2, sigma_E=0.2)
    with pytest.raises(ValidationError):
        log_likelihood([1.0, 2.0], [1.0], noise)
    with pytest.raises(ValidationError):
        log_likelihood_many([1.0], [1.0, 2.0, 3.0], noise)  # E must be 2-D
    with pytest.raises(ValidationError):
        log_likelihood([], [], noise)


def test_noise_model_validation():
    with pytest.raises(ValidationError):
        NoiseModel(sigma_M=-0.1, sigma_E=0.2)
    with pytest.raises(ValidationError):
        NoiseModel(sigma_M=0.0, sigma_E=0.0)
    assert noise_for("rank").sigma_M == 0.2
    assert noise_for("value", value_scale=1.5).combined_variance == pytest.approx(4.5)
    with pytest.raises(ValidationError):
        noise_for("value")


def test_prior_is_uniform_on_free_interior():
    env = make_env(rects=[(1.0, 0.5, 1.5, 1.0)])  # blocks interior cell (2, 1)
    prior = make_prior(env)
    support = env.interior_mask()
    n = support.sum()
    assert prior.probability[support].min() == prior.probability[support].max() == 1.0 / n
    assert (prior.probability[~support] == 0.0).all()
    prior.validate(support)


def test_update_posterior_matches_direct_bayes():
    env = make_env()
    prior = make_prior(env)
    rng = np.random.default_rng(2)
    ll = rng.normal(size=env.shape)
    post = update_posterior(prior, ll)
    expected = prior.probability * np.exp(ll)
    expected /= expected.sum()
    np.testing.assert_allclose(post.probability, expected, atol=1e-15)
    post.validate(env.interior_mask())


def test_update_posterior_invariant_to_constant_shift():
    env = make_env()
    prior = make_prior(env)
    rng = np.random.default_rng(3)
    ll = rng.normal(size=env.shape)
    a = update_posterior(prior, ll)
    b = update_posterior(prior, ll + 1234.5)
    np.testing.assert_allclose(a.probability, b.probability, atol=1e-15)


def test_update_posterior_is_stable_at_extreme_magnitudes():
    env = make_env()
    prior = make_prior(env)
    ll = np.full(env.shape, -50_000.0)
    ll[2, 2] = -49_990.0
    post = update_posterior(prior, ll)
    post.validate(env.interior_mask())
    assert post.argmax_cell == (2, 2)


def test_update_posterior_keeps_zero_cells_zero():
    env = make_env()
    prior = make_prior(env)
    ll = np.zeros(env.shape)
    ll[0, 0] = 100.0  # boundary cell: zero prior must override
    post = update_posterior(prior, ll)
    assert post.probability[0, 0] == 0.0


def test_chained_updates_equal_single_joint_update():
    # recomputing from the uniform prior with summed log-likelihoods equals
    # sequential Bayes with the per-batch pieces
    env = make_env()
    prior = make_prior(env)
    rng = np.random.default_rng(4)
    ll1, ll2 = rng.normal(size=(2,) + env.shape)
    seq = update_posterior(update_posterior(prior, ll1), ll2)
    joint = update_posterior(prior, ll1 + ll2)
    np.testing.assert_allclose(seq.probability, joint.probability, atol=1e-15)


def test_vanished_posterior_raises():
    env = make_env()
    prior = make_prior(env)
    ll = np.full(env.shape, -np.inf)
    with pytest.raises((EstimationError, ValidationError)):
        update_posterior(prior, ll)


def test_posterior_entropy_and_argmax():
    p = np.zeros((2, 3))
    p[0, 1] = 0.5
    p[1, 2] = 0.5
    post = Posterior(p)
    assert post.entropy == pytest.approx(math.log(2))
    assert post.argmax_cell == (1, 0)  # first maximum in row-major order
    assert estimate_source(post) == (1, 0)
    certain = np.zeros((2, 3))
    certain[1, 0] = 1.0
    assert Posterior(certain).entropy == 0.0


def test_posterior_validate_catches_bad_grids():
    with pytest.raises(ValidationError):
        Posterior(np.full((2, 2), 0.3)).validate()  # sums to 1.2
    p = np.zeros((2, 2))
    p[0, 0] = 1.0
    support = np.zeros((2, 2), dtype=bool)
    support[1, 1] = True
    with pytest.raises(ValidationError):
        Posterior(p).validate(support)


def test_mass_bounding_diagonal():
    p = np.zeros((5, 5))
    p[1, 1] = 0.5
    p[3, 4] = 0.45
    p[0, 0] = 0.05
    post = Posterior(p)
    # the two heavy cells cover 0.9: bbox spans (3 cols, 2 rows) * 0.5 m
    assert mass_bounding_diagonal(post, 0.9, 0.5) == pytest.approx(math.hypot(1.5, 1.0))
    # a single cell suffices for 0.5
    assert mass_bounding_diagonal(post, 0.5, 0.5) == 0.0


def test_termination_requires_both_conditions():
    env = make_env(width=20, height=20)
    config = TerminationConfig().resolved(env, n_support=int(env.interior_mask().sum()))

    confident = np.zeros(env.shape)
    confident[10, 10] = 1.0
    assert check_termination(Posterior(confident), 3, config) == CONVERGED

    # low entropy but mass split across distant corners: keep going
    split = np.zeros(env.shape)
    split[1, 1] = 0.5
    split[18, 18] = 0.5
    assert check_termination(Posterior(split), 3, config) == CONTINUE

    uniform = np.full(env.shape, 1.0 / env.n_cells)
    assert check_termination(Posterior(uniform), 3, config) == CONTINUE
    assert check_termination(Posterior(uniform), 30, config) == MAX_ITER
    # convergence wins over the iteration cap
    assert check_termination(Posterior(confident), 30, config) == CONVERGED


def test_termination_config_resolution():
    env = make_env(cell_size=0.5)
    config = TerminationConfig().resolved(env, n_support=100)
    assert config.entropy_threshold == pytest.approx(0.1 * math.log(100))
    assert config.confinement_radius == pytest.approx(4 * math.sqrt(2) * 0.5)
    assert config.cell_size == 0.5
    with pytest.raises(ValidationError):
        check_termination(Posterior(np.full(env.shape, 1.0 / env.n_cells)), 0,
                          TerminationConfig())
