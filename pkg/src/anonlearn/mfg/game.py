"""The mean field game as an anonymous game over path actions."""

import warnings

import numpy as np

from ..game import GameInstance
from ..measure import SUP_PATH
from .model import (
    SolverParams,
    VelocityBoundWarning,
    best_response_batch,
    cost_and_grad,
    flow_of,
    project_xv,
)
from .trajectory import Trajectory, h1_inner, h1_norm, nodes_from_xv, velocity_norm, xv_from_nodes


class MfgGame(GameInstance):
    """Players are the atoms of the discretised initial distribution.

    Actions are node arrays ``(N + 1, d)``; the ground metric is the sup distance
    between paths on the grid. Dual variables are H1 representers in xv layout.
    """

    supports_omd = True

    def __init__(self, cfg, solver=None):
        self.cfg = cfg
        self.solver = solver or SolverParams()
        self.x0s, self.weights = cfg.start_points()
        self.metric = SUP_PATH
        self.last_br = None
        self.bound_hits = 0
        for c in (cfg.f_coupling, cfg.g_coupling):
            if not c.monotone:
                warnings.warn(f"coupling {c.name!r} is not monotone; convergence guarantees do not apply", stacklevel=2)

    @property
    def dt(self):
        return self.cfg.dt

    def costs(self, actions, eta):
        G = np.asarray(actions, dtype=float).reshape(-1, self.cfg.n_steps + 1, self.cfg.d)
        J, _ = cost_and_grad(G, flow_of(eta), self.cfg, need_grad=False)
        return J

    def best_responses(self, eta, warm=None):
        V = None if warm is None else xv_from_nodes(warm, self.dt)[:, 1:]
        G, info = best_response_batch(self.x0s, flow_of(eta), self.cfg, self.solver, V)
        self.last_br = info
        if info.near_bound.any():
            self.bound_hits += 1
            warnings.warn(
                f"{int(info.near_bound.sum())} best responses are within 1% of the velocity bound",
                VelocityBoundWarning,
                stacklevel=2,
            )
        return G

    def contains(self, i, action, tol=1e-9):
        G = np.asarray(action, dtype=float)
        if G.shape != (self.cfg.n_steps + 1, self.cfg.d):
            return False
        if np.abs(G[0] - self.x0s[i]).max() > tol:
            return False
        return velocity_norm(xv_from_nodes(G, self.dt), self.dt) <= self.cfg.radius + tol

    def default_profile(self):
        return np.repeat(self.x0s[:, None, :], self.cfg.n_steps + 1, axis=1)

    def encode_action(self, action):
        return Trajectory.from_nodes(action, self.cfg.T).to_record()

    # mirror descent with h = |.|_{H1}^2 / 2
    def subgradients(self, actions, eta):
        _, R = cost_and_grad(np.asarray(actions, dtype=float), flow_of(eta), self.cfg)
        return R

    def mirror_project(self, Y):
        X = project_xv(Y, self.x0s, self.cfg)
        near = velocity_norm(X, self.dt) >= 0.99 * self.cfg.radius
        if near.any():
            self.bound_hits += 1
        return nodes_from_xv(X, self.dt)

    def initial_dual(self):
        Y = np.zeros((self.n_players, self.cfg.n_steps + 1, self.cfg.d))
        Y[:, 0] = self.x0s
        return Y

    def dual_norms(self, Y):
        return h1_norm(Y, self.dt)

    def primal_norms(self, A):
        return h1_norm(xv_from_nodes(A, self.dt), self.dt)

    def pairing(self, Y, A):
        return h1_inner(Y, xv_from_nodes(A, self.dt), self.dt)
