"""Finite-action single-population anonymous games.

Each player's action set is the probability simplex over ``n_actions`` pure
actions; pure actions are its vertices. A player using the mixed action ``p``
against a population in state ``m`` pays ``p . c(m)``, so best responses are
vertices and the cost is linear in the player's own action. The ground metric
is total variation, which coincides with the discrete metric on vertices.
"""

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

from .game import GameInstance
from .measure import TOTAL_VARIATION


class PopulationError(ValueError):
    pass


@dataclass(frozen=True)
class CostTable:
    """Cost vector ``c(m)`` as a function of the population state.

    ``fn`` maps an array of states ``(..., n)`` to costs of the same shape.
    ``lipschitz`` bounds ``max_j |c_j(m) - c_j(m')|`` by ``lipschitz * ||m - m'||_inf``.
    """

    name: str
    fn: object
    lipschitz: float
    monotone: bool = True

    def __call__(self, m):
        return self.fn(np.asarray(m, dtype=float))


def cost_table(name, n_actions, **params):
    """Builtin cost tables by name."""
    if name == "congestion-linear":
        s = float(params.pop("scale", 1.0))
        table = CostTable(name, lambda m: s * m, abs(s), s >= 0)
    elif name == "congestion-affine":
        slopes = np.asarray(params.pop("slopes", np.ones(n_actions)), dtype=float)
        offsets = np.asarray(params.pop("offsets", np.zeros(n_actions)), dtype=float)
        if slopes.shape != (n_actions,) or offsets.shape != (n_actions,):
            raise PopulationError(f"slopes and offsets need {n_actions} entries")
        table = CostTable(name, lambda m: slopes * m + offsets, float(np.abs(slopes).max()), bool(np.all(slopes >= 0)))
    elif name == "constant":
        values = np.asarray(params.pop("values", np.zeros(n_actions)), dtype=float)
        if values.shape != (n_actions,):
            raise PopulationError(f"values needs {n_actions} entries")
        table = CostTable(name, lambda m: np.broadcast_to(values, m.shape).copy(), 0.0)
    elif name == "anti-congestion":
        s = float(params.pop("scale", 1.0))
        table = CostTable(name, lambda m: -s * m, abs(s), s <= 0)
    else:
        raise PopulationError(f"unknown cost table {name!r}")
    if params:
        raise PopulationError(f"unknown parameters for {name}: {sorted(params)}")
    return table


COST_TABLES = ("congestion-linear", "congestion-affine", "constant", "anti-congestion")


def best_response_finite(costs):
    """Index of the cheapest action; ties go to the lowest index."""
    c = np.asarray(costs, dtype=float)
    if c.size == 0:
        raise PopulationError("empty cost list")
    if not np.all(np.isfinite(c)):
        raise PopulationError("non-finite cost")
    return int(np.argmin(c))


def project_simplex(Y):
    """Euclidean projection of each row of ``Y`` onto the probability simplex."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    n = Y.shape[1]
    U = -np.sort(-Y, axis=1)
    css = np.cumsum(U, axis=1) - 1.0
    idx = np.arange(1, n + 1)
    cond = U - css / idx > 0
    rho = n - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(Y.shape[0]), rho] / (rho + 1)
    return np.maximum(Y - theta[:, None], 0.0)


class PopulationGame(GameInstance):
    supports_omd = True

    def __init__(self, n_actions, table, n_players=100, weights=None, init=None):
        if n_actions < 2:
            raise PopulationError("need at least two actions")
        self.n_actions = int(n_actions)
        self.table = table
        if weights is None:
            weights = np.full(n_players, 1.0 / n_players)
        weights = np.asarray(weights, dtype=float)
        if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise PopulationError("player weights must be positive and sum to 1")
        self.weights = weights / weights.sum()
        self.metric = TOTAL_VARIATION
        self.eye = np.eye(self.n_actions)
        # initial pure action per player (action 0 unless given)
        self.init = np.zeros(self.n_players, dtype=int) if init is None else np.asarray(init, dtype=int)

    def state(self, eta):
        """Population state ``m`` (mass on each pure action) induced by ``eta``."""
        m = eta._cache.get("state")
        if m is None:
            m = eta.weights @ np.asarray(eta.points).reshape(len(eta), self.n_actions)
            eta._cache["state"] = m
        return m

    def distance(self, mu, nu, cap=None):
        """Total variation between population states.

        Equals Wasserstein-1 for measures on pure actions; for mixed actions it
        compares what the cost sees, since distinct measures with the same
        state are equivalent in this game.
        """
        return 0.5 * float(np.abs(self.state(mu) - self.state(nu)).sum())

    def cost_vector(self, eta):
        c = self.table(self.state(eta))
        if not np.all(np.isfinite(c)):
            raise PopulationError("cost table is not finite at the current state")
        return c

    def costs(self, actions, eta):
        return np.asarray(actions, dtype=float).reshape(-1, self.n_actions) @ self.cost_vector(eta)

    def best_responses(self, eta, warm=None):
        j = best_response_finite(self.cost_vector(eta))
        return np.repeat(self.eye[j][None], self.n_players, axis=0)

    def contains(self, i, action, tol=1e-9):
        p = np.asarray(action, dtype=float)
        return p.shape == (self.n_actions,) and p.min() >= -tol and abs(p.sum() - 1.0) <= tol

    def default_profile(self):
        return self.eye[self.init]

    # mirror descent with h = |.|^2 / 2 on the simplex
    def subgradients(self, actions, eta):
        return np.repeat(self.cost_vector(eta)[None], len(actions), axis=0)

    def mirror_project(self, Y):
        return project_simplex(Y)

    def initial_dual(self):
        return self.default_profile().copy()

    def dual_norms(self, Y):
        return np.linalg.norm(Y, axis=1)

    def primal_norms(self, A):
        return np.linalg.norm(A, axis=1)

    def pairing(self, Y, A):
        return np.einsum("ij,ij->i", Y, A)


@lru_cache(maxsize=1024)
def _compositions(total, parts):
    """All nonnegative integer vectors of length ``parts`` summing to ``total``."""
    if parts == 1:
        out = np.array([[total]])
    elif parts == 2:
        k = np.arange(total + 1)
        out = np.stack([k, total - k], axis=1)
    else:
        blocks = []
        for k in range(total + 1):
            rest = _compositions(total - k, parts - 1)
            blocks.append(np.column_stack([np.full(len(rest), k), rest]))
        out = np.concatenate(blocks)
    out.setflags(write=False)
    return out


def max_gap(table, M):
    """``max_{j in supp m} c_j(m) - min_k c_k(m)`` for each row ``m`` of ``M``."""
    C = table(M)
    top = np.where(M > 0, C, -np.inf).max(axis=1)
    return top - C.min(axis=1)


def brute_force_equilibrium(game, grid):
    """Grid point of the simplex with the smallest equilibrium gap.

    Returns ``(m, gap)``; ties go to the first point in lexicographic order of
    the grid counts (largest mass on action 0 first).
    """
    n = game.n_actions
    if n > 5 or grid > 200 or grid < 1:
        raise PopulationError(f"brute force needs n_actions <= 5 and 1 <= grid <= 200 (got {n}, {grid})")
    best_gap, best_m = np.inf, None
    for k in range(grid, -1, -1):
        rest = _compositions(grid - k, n - 1)[::-1]
        M = np.column_stack([np.full(len(rest), k), rest]) / grid
        gaps = max_gap(game.table, M)
        j = int(np.argmin(gaps))
        if gaps[j] < best_gap:
            best_gap, best_m = float(gaps[j]), M[j]
    return best_m, best_gap


def grid_size(n_actions, grid):
    return comb(grid + n_actions - 1, n_actions - 1)


__all__ = [
    "CostTable",
    "cost_table",
    "COST_TABLES",
    "PopulationGame",
    "PopulationError",
    "best_response_finite",
    "project_simplex",
    "brute_force_equilibrium",
    "max_gap",
]
