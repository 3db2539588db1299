"""Smoke tests for the python bindings: each exposed operation runs and
agrees with an easily stated reference value."""

import math

import numpy as np
import pytest

import gpnash


def test_cdf_matches_independent_orthant():
    value, error = gpnash.mvn_cdf_at_zero(np.zeros(2), np.eye(2))
    assert abs(value - 0.25) <= max(error, 1e-6)


def test_cdf_univariate_closed_form():
    value, _ = gpnash.mvn_cdf_at_zero(np.array([-1.0]), np.array([[4.0]]))
    # P(Z <= 0), Z ~ N(-1, 4)  =  Phi(1/2)
    assert value == pytest.approx(0.5 * (1 + math.erf(0.5 / math.sqrt(2))), abs=1e-9)


def test_sampling_is_deterministic_and_well_scaled():
    mean = np.array([1.0, -2.0])
    cov = np.array([[2.0, 0.5], [0.5, 1.0]])
    a = gpnash.mvn_sample(mean, cov, 4000, seed=9)
    b = gpnash.mvn_sample(mean, cov, 4000, seed=9)
    np.testing.assert_array_equal(a, b)
    assert np.allclose(a.mean(axis=0), mean, atol=0.15)
    assert np.allclose(np.cov(a.T), cov, atol=0.2)


def test_gp_fit_predicts_held_out_sine():
    rng = np.random.default_rng(0)
    x = np.sort(rng.uniform(0, 2 * np.pi, 40)).reshape(-1, 1)
    y = np.sin(x[:, 0])
    model = gpnash.GpModel.fit(x, y, seed=1)
    xt = np.linspace(0.5, 5.5, 25).reshape(-1, 1)
    mu, var = model.predict(xt)
    assert np.max(np.abs(mu - np.sin(xt[:, 0]))) < 0.05
    assert np.all(var >= 0)


def test_nash_extract_matches_numpy_brute_force():
    prob = gpnash.make_problem("p1")
    grid = gpnash.build_factorial_grid(prob, [7, 7])
    values = np.array([prob.evaluate(grid.point(f)) for f in range(grid.size)])
    indices, _ = gpnash.nash_extract(grid, values)

    tensor = values.reshape(7, 7, 2)
    brute = [
        i * 7 + j
        for i in range(7)
        for j in range(7)
        if tensor[i, j, 0] <= tensor[:, j, 0].min() + 1e-12
        and tensor[i, j, 1] <= tensor[i, :, 1].min() + 1e-12
    ]
    assert list(indices) == brute
    assert len(brute) >= 1


def test_p1_values_at_known_point():
    prob = gpnash.make_problem("p1")
    assert prob.block_dims == [1, 1]
    y = prob.evaluate(np.array([0.0, 0.0]))
    assert y.shape == (2,)
    assert np.all(np.isfinite(y))


def test_prob_equilibrium_sums_and_run_recovers_quadratic_ne():
    prob = gpnash.make_problem(
        "quadratic", {"players": 2, "block_dims": [1, 1], "seed": 11}
    )
    grid = gpnash.build_factorial_grid(prob, [5, 5])
    log = gpnash.run(prob, grid, n0=8, n_max=14, seed=2, N_sim=25, N_cand=12)
    assert log["eval_count"] <= 14
    x = grid.point(log["final_index"])
    spacing = 10.0 / 4.0
    assert np.max(np.abs(x - prob.known_ne)) <= spacing + 1e-9


def test_run_rejects_unknown_option():
    prob = gpnash.make_problem("p1")
    grid = gpnash.build_factorial_grid(prob, [4, 4])
    with pytest.raises(ValueError):
        gpnash.run(prob, grid, n0=4, n_max=5, bogus=1)
