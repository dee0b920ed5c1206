import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anonlearn.game import Profile, exploitability, profile_pushforward
from anonlearn.population import (
    PopulationError,
    PopulationGame,
    best_response_finite,
    brute_force_equilibrium,
    cost_table,
    max_gap,
    project_simplex,
)

from oracles import population_exploitability, simplex_grid


def congestion(n=3, K=100, **kw):
    return PopulationGame(n, cost_table("congestion-linear", n), n_players=K, **kw)


@pytest.mark.parametrize("costs,expected", [([3, 1, 2], 1), ([1, 1], 0), ([0.7, 0.2, 0.1], 2)])
def test_best_response_finite(costs, expected):
    assert best_response_finite(costs) == expected


def test_best_response_rejects_nonfinite():
    with pytest.raises(ValueError):
        best_response_finite([1.0, np.nan])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=8), st.floats(-1e3, 1e3))
def test_best_response_shift_invariant(costs, shift):
    # exact ties can appear or vanish under float rounding; compare on values with a margin
    c = np.asarray(costs)
    j = best_response_finite(c + shift)
    assert c[j] <= c.min() + 1e-9 * (1 + abs(shift))


def test_brute_force_symmetric_congestion():
    m, gap = brute_force_equilibrium(congestion(), 60)
    np.testing.assert_allclose(m, [1 / 3, 1 / 3, 1 / 3])
    assert gap == pytest.approx(0.0, abs=1e-15)


def test_brute_force_affine_two_actions():
    game = PopulationGame(2, cost_table("congestion-affine", 2, slopes=[1, 1], offsets=[0, 0.5]))
    m, gap = brute_force_equilibrium(game, 100)
    np.testing.assert_allclose(m, [0.75, 0.25])
    # independent scan of the whole grid
    gaps = [(max(c for c, mm in zip([g[0], g[1] + 0.5], g) if mm > 0) - min(g[0], g[1] + 0.5), tuple(g)) for g in simplex_grid(2, 100)]
    assert min(gaps)[1] == pytest.approx((0.75, 0.25))


def test_brute_force_constant_costs():
    game = PopulationGame(3, cost_table("constant", 3, values=[1.0, 1.0, 1.0]))
    _, gap = brute_force_equilibrium(game, 10)
    assert gap == 0.0


def test_brute_force_gap_bound():
    # gap <= 2/grid * Lipschitz constant of the costs
    game = PopulationGame(3, cost_table("congestion-affine", 3, slopes=[1.0, 2.0, 0.5], offsets=[0.1, 0.0, 0.3]))
    for grid in (7, 13, 40):
        _, gap = brute_force_equilibrium(game, grid)
        assert gap <= 2.0 / grid * game.table.lipschitz + 1e-12


def test_brute_force_within_one_cell_of_analytic():
    # c = (m1 + 0.1, 2 m2, m3 + 0.2): interior equilibrium solves equal costs
    slopes, offsets = np.array([1.0, 2.0, 1.0]), np.array([0.1, 0.0, 0.2])
    game = PopulationGame(3, cost_table("congestion-affine", 3, slopes=slopes, offsets=offsets))
    lam = (1 + (offsets / slopes).sum()) / (1 / slopes).sum()
    exact = (lam - offsets) / slopes
    for grid in (30, 90):
        m, _ = brute_force_equilibrium(game, grid)
        assert np.abs(m - exact).max() <= 1.0 / grid + 1e-12


def test_brute_force_size_limits():
    with pytest.raises(PopulationError):
        brute_force_equilibrium(congestion(6), 10)
    with pytest.raises(PopulationError):
        brute_force_equilibrium(congestion(), 201)


def test_max_gap_matches_definition():
    table = cost_table("congestion-linear", 3)
    M = np.array([[0.7, 0.2, 0.1], [0.5, 0.5, 0.0]])
    np.testing.assert_allclose(max_gap(table, M), [0.6, 0.5])


def test_exploitability_matches_enumeration_at_uniform():
    game = congestion(K=90)
    counts = [30, 30, 30]
    psi = Profile(np.repeat(game.eye, counts, axis=0))
    eta = profile_pushforward(game, psi)
    assert exploitability(game, eta, psi) == pytest.approx(population_exploitability(game.table, [1 / 3] * 3, counts), abs=1e-15)


def test_exploitability_matches_enumeration_off_equilibrium():
    game = congestion(K=10)
    counts = [6, 3, 1]
    psi = Profile(np.repeat(game.eye, counts, axis=0))
    eta = profile_pushforward(game, psi)
    # c = (0.6, 0.3, 0.1): gains 0.5 * 0.6 + 0.2 * 0.3
    expected = population_exploitability(game.table, [0.6, 0.3, 0.1], counts)
    assert expected == pytest.approx(0.36)
    assert exploitability(game, eta, psi) == pytest.approx(expected, abs=1e-15)


def test_state_and_distance():
    game = congestion(K=4)
    eta = profile_pushforward(game, Profile(game.eye[[0, 0, 1, 2]]))
    np.testing.assert_allclose(game.state(eta), [0.5, 0.25, 0.25])
    nu = profile_pushforward(game, Profile(game.eye[[0, 1, 1, 2]]))
    assert game.distance(eta, nu) == pytest.approx(0.25)


def test_contains_simplex():
    game = congestion()
    assert game.contains(0, [0.2, 0.3, 0.5])
    assert not game.contains(0, [0.2, 0.3, 0.6])
    assert not game.contains(0, [-0.1, 0.6, 0.5])


def test_simplex_projection_properties():
    rng = np.random.default_rng(0)
    Y = rng.normal(size=(200, 4)) * 3
    P = project_simplex(Y)
    assert np.all(P >= 0)
    np.testing.assert_allclose(P.sum(1), 1.0, atol=1e-12)
    np.testing.assert_allclose(project_simplex(P), P, atol=1e-15)
    # nonexpansive
    d_in = np.linalg.norm(Y[:100] - Y[100:], axis=1)
    d_out = np.linalg.norm(P[:100] - P[100:], axis=1)
    assert np.all(d_out <= d_in + 1e-12)


def test_unknown_cost_table():
    with pytest.raises(PopulationError):
        cost_table("nope", 3)
    with pytest.raises(PopulationError):
        cost_table("congestion-linear", 3, slope=2)
