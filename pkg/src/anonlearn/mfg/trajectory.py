"""Discretised H1 paths.

Two array layouts of shape ``(..., N + 1, d)`` are used throughout:

* *nodes*: positions ``gamma(t_0), ..., gamma(t_N)`` on the uniform grid;
* *xv*: the start point followed by the ``N`` piecewise-constant velocities.

The H1 inner product in xv coordinates is ``x0 . y0 + dt * sum_k v_k . w_k``.
"""

from dataclasses import dataclass

import numpy as np


def nodes_from_xv(X, dt):
    X = np.asarray(X, dtype=float)
    x0 = X[..., :1, :]
    return np.concatenate([x0, x0 + dt * np.cumsum(X[..., 1:, :], axis=-2)], axis=-2)


def xv_from_nodes(G, dt):
    G = np.asarray(G, dtype=float)
    return np.concatenate([G[..., :1, :], np.diff(G, axis=-2) / dt], axis=-2)


def h1_inner(X, Y, dt):
    """Batched H1 inner product of xv arrays (reduces the last two axes)."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    return (X[..., 0, :] * Y[..., 0, :]).sum(-1) + dt * (X[..., 1:, :] * Y[..., 1:, :]).sum((-1, -2))


def h1_norm(X, dt):
    return np.sqrt(np.maximum(h1_inner(X, X, dt), 0.0))


def velocity_norm(X, dt):
    """Discrete L2 norm of the velocity part of xv arrays."""
    V = np.asarray(X, dtype=float)[..., 1:, :]
    return np.sqrt(dt * (V * V).sum((-1, -2)))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """A path with start ``x0`` (shape ``(d,)``) and velocities ``v`` (shape ``(N, d)``) on ``[0, T]``."""

    x0: np.ndarray
    v: np.ndarray
    T: float

    def __post_init__(self):
        x0 = np.array(self.x0, dtype=float).reshape(-1)
        v = np.array(self.v, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] != x0.size:
            raise ValueError(f"velocities of shape {v.shape} do not fit a start point in R^{x0.size}")
        if not (np.all(np.isfinite(x0)) and np.all(np.isfinite(v))):
            raise ValueError("trajectory has non-finite entries")
        if not self.T > 0:
            raise ValueError("T must be > 0")
        x0.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "T", float(self.T))

    @classmethod
    def from_xv(cls, X, T):
        X = np.asarray(X, dtype=float)
        return cls(X[0], X[1:], T)

    @classmethod
    def from_nodes(cls, G, T):
        G = np.asarray(G, dtype=float)
        if G.ndim == 1:
            G = G[:, None]
        return cls.from_xv(xv_from_nodes(G, T / (G.shape[0] - 1)), T)

    @classmethod
    def constant(cls, x0, n_steps, T):
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        return cls(x0, np.zeros((n_steps, x0.size)), T)

    @property
    def n_steps(self):
        return self.v.shape[0]

    @property
    def d(self):
        return self.x0.size

    @property
    def dt(self):
        return self.T / self.n_steps

    @property
    def xv(self):
        return np.concatenate([self.x0[None], self.v])

    @property
    def nodes(self):
        return nodes_from_xv(self.xv, self.dt)

    def _check(self, other):
        if other.v.shape != self.v.shape or other.T != self.T:
            raise ValueError("trajectories live on different grids")

    def __add__(self, other):
        self._check(other)
        return Trajectory(self.x0 + other.x0, self.v + other.v, self.T)

    def __sub__(self, other):
        self._check(other)
        return Trajectory(self.x0 - other.x0, self.v - other.v, self.T)

    def __mul__(self, c):
        return Trajectory(c * self.x0, c * self.v, self.T)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def inner(self, other):
        self._check(other)
        return float(h1_inner(self.xv, other.xv, self.dt))

    def norm(self):
        return float(h1_norm(self.xv, self.dt))

    def velocity_norm(self):
        return float(velocity_norm(self.xv, self.dt))

    def allclose(self, other, atol=1e-12):
        return self.v.shape == other.v.shape and np.allclose(self.xv, other.xv, rtol=0.0, atol=atol)

    def to_record(self):
        return {"x0": self.x0.tolist(), "v": self.v.tolist()}

    def __repr__(self):
        return f"Trajectory(d={self.d}, n_steps={self.n_steps}, T={self.T}, x0={self.x0.tolist()})"
