import numpy as np
import pytest
from numpy.testing import assert_allclose

from beliefkit.engine.kernel import (
    gaussian_compensation,
    jump_compensation,
    jump_p_second_moment,
    logistic_maps,
    logit,
    rn_drift,
    sigmoid,
    simulate_ensemble,
    simulate_path,
)
from beliefkit.models import JumpFamily, JumpLaw, KernelParams, StepSizeError


def test_logistic_maps_match_finite_differences():
    x = np.linspace(-6.0, 6.0, 41)
    h = 1e-5
    p, sprime, ssecond = logistic_maps(x)
    assert_allclose(p, sigmoid(x))
    assert_allclose(sprime, (sigmoid(x + h) - sigmoid(x - h)) / (2 * h), atol=1e-9)
    k = 1e-4
    assert_allclose(ssecond, (sigmoid(x + k) - 2 * sigmoid(x) + sigmoid(x - k)) / k**2, atol=1e-6)
    assert_allclose(logit(p), x, atol=1e-9)


def test_sigmoid_is_clamped():
    assert sigmoid(1e6) == sigmoid(30.0)
    assert 0.0 < sigmoid(-1e6) < 1e-12


def test_drift_vanishes_at_even_odds(diffusive_params, gaussian_params):
    assert rn_drift(0.0, 0.05, 0.0, diffusive_params.jump_law, diffusive_params) == pytest.approx(0.0, abs=1e-15)
    law = gaussian_params.jump_law
    assert rn_drift(0.0, 0.05, 0.01, law, gaussian_params) == pytest.approx(0.0, abs=1e-15)


def test_pure_diffusion_drift_at_two():
    params = KernelParams.constant(0.1)
    mu = rn_drift(2.0, 0.1, 0.0, params.jump_law, params)
    assert_allclose(mu, 0.5 * 0.01 * np.tanh(1.0), rtol=1e-12)
    assert_allclose(mu, 0.0038080, atol=1e-7)


def test_drift_is_odd_for_symmetric_jumps(gaussian_params):
    x = np.linspace(-5.0, 5.0, 21)
    mu = rn_drift(x, 0.08, 0.01, gaussian_params.jump_law, gaussian_params)
    assert_allclose(mu, -mu[::-1], atol=1e-14)


def test_drift_is_capped():
    params = KernelParams.constant(2.0, drift_cap=0.25)
    mu = rn_drift(np.array([-8.0, 8.0]), 2.0, 0.0, params.jump_law, params)
    assert_allclose(np.abs(mu), 0.25)
    raw = rn_drift(8.0, 2.0, 0.0, params.jump_law, params, clamp=False)
    assert raw > 0.25


def test_quadrature_compensation_matches_monte_carlo():
    x = np.array([-2.0, -0.5, 0.7, 2.5])
    law = JumpLaw.gaussian(0.5)
    quad = jump_compensation(x, law)
    mc = jump_compensation(x, law, n_draws=400_000, seed=1, method="mc")
    assert_allclose(quad, mc, atol=2e-3)
    assert_allclose(gaussian_compensation(x, 0.5), quad, atol=1e-12)


def test_double_exponential_compensation_matches_monte_carlo():
    law = JumpLaw(family=JumpFamily.DOUBLE_EXPONENTIAL, eta_up=3.0, eta_down=2.0)
    x = np.array([-1.0, 0.0, 1.5])
    quad = jump_compensation(x, law)
    mc = jump_compensation(x, law, n_draws=400_000, seed=2, method="mc")
    assert_allclose(quad, mc, atol=3e-3)


def test_degenerate_law_has_no_jump_terms():
    law = JumpLaw.gaussian(0.0)
    x = np.array([-1.0, 0.0, 1.0])
    assert_allclose(jump_compensation(x, law), 0.0)
    assert_allclose(jump_p_second_moment(x, law), 0.0)


def test_jump_p_second_moment_at_even_odds():
    law = JumpLaw.gaussian(0.5)
    z = np.random.default_rng(0).normal(0.0, 0.5, 1_000_000)
    brute = np.mean((sigmoid(z) - 0.5) ** 2)
    assert_allclose(jump_p_second_moment(0.0, law), brute, rtol=5e-3)


def test_probability_is_a_martingale(gaussian_params):
    x, _, _ = simulate_ensemble(gaussian_params, 0.4, n_steps=300, n_paths=2000, seed=11)
    p_T = sigmoid(x[:, -1])
    se = p_T.std(ddof=1) / np.sqrt(p_T.size)
    assert abs(p_T.mean() - 0.4) < 4 * se


def test_antithetic_pairs_mirror_the_brownian_driver(diffusive_params):
    x, _, _ = simulate_ensemble(diffusive_params, 0.5, n_steps=5, n_paths=4, seed=0, antithetic=True)
    # At even odds the drift is odd in x, so mirrored drivers give mirrored paths.
    assert_allclose(x[:2], -x[2:], atol=1e-12)


def test_simulation_is_deterministic_per_seed(gaussian_params):
    first = simulate_path(gaussian_params, 0.3, 200, seed=5)
    second = simulate_path(gaussian_params, 0.3, 200, seed=5)
    other = simulate_path(gaussian_params, 0.3, 200, seed=6)
    assert_allclose(first.x, second.x)
    assert not np.allclose(first.x, other.x)
    frame = first.to_frame()
    assert list(frame.columns) == ["t", "x", "p", "jump", "jump_size"]
    assert len(frame) == 201


def test_jump_marks_line_up_with_sizes():
    params = KernelParams.constant(0.05, 0.05, JumpLaw.gaussian(0.5))
    path = simulate_path(params, 0.5, 500, seed=3)
    assert path.jump_marks.sum() > 0
    assert np.all(path.jump_sizes[~path.jump_marks] == 0.0)
    assert np.all(path.jump_sizes[path.jump_marks] != 0.0)


def test_step_size_error_when_jump_probability_reaches_one():
    params = KernelParams.constant(0.05, 2.0, JumpLaw.gaussian(0.5))
    with pytest.raises(StepSizeError) as info:
        simulate_path(params, 0.5, 10)
    assert info.value.exit_code == 2


@pytest.mark.parametrize("p0", [0.0, 1.0, -0.1])
def test_rejects_degenerate_start(diffusive_params, p0):
    with pytest.raises(ValueError):
        simulate_path(diffusive_params, p0, 10)


def test_rejects_odd_antithetic_ensemble(diffusive_params):
    with pytest.raises(ValueError):
        simulate_ensemble(diffusive_params, 0.5, 10, 3, seed=0, antithetic=True)
