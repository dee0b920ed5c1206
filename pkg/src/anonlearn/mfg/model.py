"""First-order mean field game on discretised paths.

Players are indexed by start points ``x0``; the action of a player is a path
starting at its ``x0`` whose velocity has L2 norm at most ``sqrt(T) * M``. The
cost of a path against a flow of players is

    J = dt * sum_{k<N} [L(g_k, v_k) + f(g_k, m_k)] + g(g_N, m_N)

with ``m_k`` the time-``t_k`` marginal of the flow (left-endpoint rectangle rule).
Gradients are H1 representers computed with the same quadrature, so finite
differences of ``J`` match them to rounding error.
"""

import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import truncnorm

from .. import kernels
from ..measure import EUCLIDEAN, DiscreteMeasure
from .trajectory import Trajectory, h1_norm, nodes_from_xv, velocity_norm, xv_from_nodes


class MfgError(ValueError):
    pass


class ConfigError(MfgError):
    """Invalid model configuration; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class BestResponseError(RuntimeError):
    """Projected gradient hit its iteration cap.

    Carries the best iterates found (xv layout), their gradient-mapping
    residuals and the indices of players that did not converge.
    """

    def __init__(self, message, best, residuals, players):
        super().__init__(message)
        self.best = best
        self.residuals = residuals
        self.players = players


class VelocityBoundWarning(UserWarning):
    """A path is within 1% of the velocity bound, so optimality conditions need not hold."""


# -- flows -------------------------------------------------------------------


@dataclass
class Flow:
    """Time-marginal data of a measure on paths, cached on the measure."""

    nodes: np.ndarray  # (N + 1, A, d), node k of every atom
    weights: np.ndarray  # (A,)
    means: np.ndarray  # (N + 1, d)
    second: np.ndarray  # (N + 1,), integral of |y|^2 under each marginal


def flow_of(eta):
    """Cached marginal summary of a measure whose atoms are node arrays ``(N + 1, d)``."""
    fl = eta._cache.get("flow")
    if fl is None:
        P = np.asarray(eta.points, dtype=float)
        if P.ndim == 2:
            P = P[..., None]
        nodes = np.ascontiguousarray(P.transpose(1, 0, 2))
        w = np.asarray(eta.weights)
        means = np.einsum("a,kad->kd", w, nodes)
        second = np.einsum("a,kad,kad->k", w, nodes, nodes)
        fl = Flow(nodes, w, means, second)
        eta._cache["flow"] = fl
    return fl


def marginal_at(eta, k):
    """The time-``t_k`` marginal as a measure on R^d."""
    fl = flow_of(eta)
    if not 0 <= k < fl.nodes.shape[0]:
        raise IndexError(f"time index {k} outside 0..{fl.nodes.shape[0] - 1}")
    return DiscreteMeasure(fl.nodes[k], fl.weights, EUCLIDEAN)


# -- couplings ---------------------------------------------------------------


class Coupling:
    """Interaction cost ``f(x, m)``; evaluated on node stacks against flow marginals."""

    name = "abstract"
    monotone = True
    convex = True

    def __init__(self, **params):
        self.params = params

    def evaluate(self, X, flow, slots):
        """Values ``(P, S)`` and x-gradients ``(P, S, d)`` at positions ``X`` ``(P, S, d)``
        against the marginals with time indices ``slots``."""
        raise NotImplementedError

    def spec(self):
        return {"name": self.name, **self.params}


class ZeroCoupling(Coupling):
    name = "zero"

    def evaluate(self, X, flow, slots):
        return np.zeros(X.shape[:2]), np.zeros(X.shape)


class QuadraticCoupling(Coupling):
    """``(a/2)|x - c|^2 + kappa <x, mean(m)>``.

    Convex for ``a >= 0`` and monotone for ``kappa >= 0``: its interaction
    kernel ``kappa <x, y>`` is positive semidefinite.
    """

    name = "quadratic"

    def __init__(self, a=1.0, c=0.0, kappa=0.0):
        super().__init__(a=a, c=c, kappa=kappa)
        self.a = float(a)
        self.c = np.asarray(c, dtype=float)
        self.kappa = float(kappa)

    def evaluate(self, X, flow, slots):
        mu = flow.means[slots]  # (S, d)
        dx = X - self.c
        val = 0.5 * self.a * (dx * dx).sum(-1) + self.kappa * (X * mu).sum(-1)
        grad = self.a * dx + self.kappa * mu
        return val, grad


class GaussianCoupling(Coupling):
    """``A * integral exp(-|x - y|^2 / (2 sigma^2)) dm(y)``.

    Monotone (the Gaussian kernel is positive definite) but not convex in ``x``.
    """

    name = "gaussian"
    convex = False

    def __init__(self, amplitude=1.0, sigma=0.5):
        super().__init__(amplitude=amplitude, sigma=sigma)
        self.amplitude = float(amplitude)
        self.sigma = float(sigma)

    def evaluate(self, X, flow, slots):
        Y = flow.nodes[slots]  # (S, A, d)
        return kernels.gaussian_field(X, Y, flow.weights, self.sigma, self.amplitude)


class AggregationCoupling(Coupling):
    """``(kappa/2) integral |x - y|^2 dm(y)``: attraction towards the crowd.

    Convex in ``x`` but anti-monotone for ``kappa > 0``; kept as the toy that
    the monotonicity audit must flag.
    """

    name = "aggregation"
    monotone = False

    def __init__(self, kappa=1.0):
        super().__init__(kappa=kappa)
        self.kappa = float(kappa)

    def evaluate(self, X, flow, slots):
        mu = flow.means[slots]
        s2 = flow.second[slots]
        val = 0.5 * self.kappa * ((X * X).sum(-1) - 2.0 * (X * mu).sum(-1) + s2)
        grad = self.kappa * (X - mu)
        return val, grad


COUPLINGS = {
    "zero": ZeroCoupling,
    "quadratic": QuadraticCoupling,
    "gaussian": GaussianCoupling,
    "aggregation": AggregationCoupling,
}


def _coupling_errors(label, spec, d):
    errs = []
    if not isinstance(spec, dict) or "name" not in spec:
        return [f"{label}: expected a mapping with a 'name' key"]
    name = spec["name"]
    if name not in COUPLINGS:
        return [f"{label}: unknown coupling {name!r} (choose from {sorted(COUPLINGS)})"]
    allowed = {
        "zero": set(),
        "quadratic": {"a", "c", "kappa"},
        "gaussian": {"amplitude", "sigma"},
        "aggregation": {"kappa"},
    }[name]
    for key in spec:
        if key != "name" and key not in allowed:
            errs.append(f"{label}: unknown key {key!r} for coupling {name!r}")
    p = {k: v for k, v in spec.items() if k != "name"}
    if name == "quadratic":
        if p.get("a", 1.0) < 0:
            errs.append(f"{label}.a must be >= 0 (convexity)")
        if p.get("kappa", 0.0) < 0:
            errs.append(f"{label}.kappa must be >= 0 (positive semidefinite kernel)")
        c = np.asarray(p.get("c", 0.0), dtype=float)
        if c.ndim > 1 or (c.ndim == 1 and c.size != d):
            errs.append(f"{label}.c must be a scalar or a vector of length d={d}")
    if name == "gaussian":
        if not p.get("sigma", 0.5) > 0:
            errs.append(f"{label}.sigma must be > 0")
        if p.get("amplitude", 1.0) < 0:
            errs.append(f"{label}.amplitude must be >= 0 (positive definite kernel)")
    if name == "aggregation" and p.get("kappa", 1.0) < 0:
        errs.append(f"{label}.kappa must be >= 0")
    return errs


def make_coupling(spec):
    spec = dict(spec)
    name = spec.pop("name")
    return COUPLINGS[name](**spec)


# -- lagrangian ----------------------------------------------------------------


class QuadraticLagrangian:
    """``L(x, v) = (mass/2)|v|^2``."""

    name = "quadratic"

    def __init__(self, mass=1.0):
        self.mass = float(mass)

    def value(self, X, V):
        return 0.5 * self.mass * (V * V).sum(-1)

    def grad_x(self, X, V):
        return np.zeros_like(X)

    def grad_v(self, X, V):
        return self.mass * V


# -- configuration -------------------------------------------------------------


@dataclass
class MfgConfig:
    """Model data. Coupling and Lagrangian entries are ``{"name": ..., **params}`` mappings.

    ``m0`` selects the initial distribution of players: ``{"kind": "uniform"}`` on
    ``[-R, R]^d``, ``{"kind": "normal", "mean": .., "sd": ..}`` truncated to that
    box, or ``{"kind": "points", "points": [...]}``. In one dimension the first
    two use a deterministic quantile grid; otherwise points are sampled with ``seed``.
    """

    d: int = 1
    T: float = 1.0
    n_steps: int = 32
    M: float = 10.0
    lagrangian: dict = field(default_factory=lambda: {"name": "quadratic", "mass": 1.0})
    f: dict = field(default_factory=lambda: {"name": "zero"})
    g: dict = field(default_factory=lambda: {"name": "zero"})
    m0: dict = field(default_factory=lambda: {"kind": "uniform"})
    K: int = 50
    R: float = 1.0
    seed: int = 0

    def __post_init__(self):
        errs = self.validate()
        if errs:
            raise ConfigError(errs)
        self._f = make_coupling(self.f)
        self._g = make_coupling(self.g)
        lag = dict(self.lagrangian)
        lag.pop("name")
        self._L = QuadraticLagrangian(**lag)

    def validate(self):
        errs = []
        if not (isinstance(self.d, int) and self.d >= 1):
            errs.append("d must be an integer >= 1")
        if not self.T > 0:
            errs.append("T must be > 0")
        if not (isinstance(self.n_steps, int) and self.n_steps >= 1):
            errs.append("n_steps must be an integer >= 1")
        if not self.M > 0:
            errs.append("M must be > 0")
        if not (isinstance(self.K, int) and self.K >= 1):
            errs.append("K must be an integer >= 1")
        if not self.R > 0:
            errs.append("R must be > 0")
        lag = self.lagrangian
        if not isinstance(lag, dict) or lag.get("name") != "quadratic":
            errs.append("lagrangian: only the 'quadratic' Lagrangian is available")
        else:
            for key in lag:
                if key not in ("name", "mass"):
                    errs.append(f"lagrangian: unknown key {key!r}")
            if not lag.get("mass", 1.0) > 0:
                errs.append("lagrangian.mass must be > 0")
        d = self.d if isinstance(self.d, int) else 1
        errs += _coupling_errors("f", self.f, d)
        errs += _coupling_errors("g", self.g, d)
        errs += self._m0_errors()
        return errs

    def _m0_errors(self):
        m0 = self.m0
        if not isinstance(m0, dict) or m0.get("kind") not in ("uniform", "normal", "points"):
            return ["m0.kind must be one of 'uniform', 'normal', 'points'"]
        allowed = {"uniform": {"kind"}, "normal": {"kind", "mean", "sd"}, "points": {"kind", "points"}}[m0["kind"]]
        errs = [f"m0: unknown key {k!r}" for k in m0 if k not in allowed]
        if m0["kind"] == "normal" and not m0.get("sd", 1.0) > 0:
            errs.append("m0.sd must be > 0")
        if m0["kind"] == "points":
            pts = np.asarray(m0.get("points", []), dtype=float)
            if pts.size == 0:
                errs.append("m0.points must be nonempty")
        return errs

    @property
    def dt(self):
        return self.T / self.n_steps

    @property
    def radius(self):
        """Velocity bound ``sqrt(T) * M`` in discrete L2 norm."""
        return float(np.sqrt(self.T) * self.M)

    @property
    def f_coupling(self):
        return self._f

    @property
    def g_coupling(self):
        return self._g

    @property
    def lag(self):
        return self._L

    def to_dict(self):
        out = asdict(self)
        return out

    def start_points(self):
        """Start points ``(K, d)`` of the discretised initial distribution, with weights."""
        m0 = self.m0
        d, K, R = self.d, self.K, self.R
        if m0["kind"] == "points":
            pts = np.asarray(m0["points"], dtype=float).reshape(-1, d)
            return pts, np.full(len(pts), 1.0 / len(pts))
        q = (np.arange(K) + 0.5) / K
        if m0["kind"] == "uniform":
            if d == 1:
                pts = (-R + 2.0 * R * q)[:, None]
            else:
                pts = np.random.default_rng(self.seed).uniform(-R, R, size=(K, d))
        else:
            mean, sd = float(m0.get("mean", 0.0)), float(m0.get("sd", 1.0))
            a, b = (-R - mean) / sd, (R - mean) / sd
            if d == 1:
                pts = truncnorm.ppf(q, a, b, loc=mean, scale=sd)[:, None]
            else:
                pts = truncnorm.rvs(a, b, loc=mean, scale=sd, size=(K, d), random_state=np.random.default_rng(self.seed))
        return pts, np.full(K, 1.0 / K)


# -- cost and gradient -----------------------------------------------------------


def _as_nodes(gamma, cfg):
    if isinstance(gamma, Trajectory):
        _check_grid(gamma.n_steps, gamma.d, gamma.T, cfg)
        return gamma.nodes[None], True
    G = np.asarray(gamma, dtype=float)
    single = G.ndim == 2
    if single:
        G = G[None]
    _check_grid(G.shape[1] - 1, G.shape[2], cfg.T, cfg)
    return G, single


def _check_grid(n_steps, d, T, cfg):
    if n_steps != cfg.n_steps or d != cfg.d or abs(T - cfg.T) > 1e-12 * cfg.T:
        raise MfgError(f"path grid (N={n_steps}, d={d}, T={T}) does not match the model (N={cfg.n_steps}, d={cfg.d}, T={cfg.T})")


def _check_flow(flow, cfg):
    if flow.nodes.shape[0] != cfg.n_steps + 1 or flow.nodes.shape[2] != cfg.d:
        raise MfgError("flow and model use different grids")


def cost_and_grad(G, flow, cfg, need_grad=True):
    """Costs ``(P,)`` of node stacks ``G`` ``(P, N+1, d)`` and, optionally, H1 representers (xv layout)."""
    dt, N = cfg.dt, cfg.n_steps
    X = G[:, :N, :]
    V = np.diff(G, axis=1) / dt
    lag = cfg.lag
    fv, fx = cfg.f_coupling.evaluate(X, flow, slice(0, N))
    gv, gx = cfg.g_coupling.evaluate(G[:, N:, :], flow, slice(N, N + 1))
    J = dt * (lag.value(X, V) + fv).sum(1) + gv[:, 0]
    if not np.all(np.isfinite(J)):
        raise MfgError("non-finite cost (coupling overflow?)")
    if not need_grad:
        return J, None
    F = lag.grad_x(X, V) + fx  # (P, N, d)
    D = lag.grad_v(X, V)
    Gx = gx[:, 0, :]
    # tail[j] = sum_{k > j} F_k
    tail = np.zeros_like(F)
    tail[:, :-1] = np.cumsum(F[:, :0:-1], axis=1)[:, ::-1]
    R = np.empty_like(G)
    R[:, 0] = dt * F.sum(1) + Gx
    R[:, 1:] = D + dt * tail + Gx[:, None, :]
    return J, R


def cost_J(gamma, eta, cfg):
    G, single = _as_nodes(gamma, cfg)
    fl = flow_of(eta)
    _check_flow(fl, cfg)
    J, _ = cost_and_grad(G, fl, cfg, need_grad=False)
    return float(J[0]) if single else J


def grad_J(gamma, eta, cfg):
    """H1 representer of the derivative of ``J(., eta)`` at ``gamma``."""
    G, single = _as_nodes(gamma, cfg)
    fl = flow_of(eta)
    _check_flow(fl, cfg)
    _, R = cost_and_grad(G, fl, cfg)
    if single:
        return Trajectory.from_xv(R[0], cfg.T)
    return R


# -- projection ------------------------------------------------------------------


def project_xv(Y, x0s, cfg):
    """Mirror map for ``h = |.|^2/2`` in H1: restart at ``x0`` and shrink velocities into the ball."""
    Y = np.asarray(Y, dtype=float)
    out = np.empty_like(Y)
    out[..., 0, :] = x0s
    nrm = velocity_norm(Y, cfg.dt)
    R = cfg.radius
    scale = np.where(nrm <= R * (1.0 + 1e-12), 1.0, R / np.where(nrm > 0, nrm, 1.0))
    out[..., 1:, :] = Y[..., 1:, :] * np.asarray(scale)[..., None, None]
    return out


def mirror_project(y_repr, x0, cfg):
    if isinstance(y_repr, Trajectory):
        _check_grid(y_repr.n_steps, y_repr.d, y_repr.T, cfg)
        return Trajectory.from_xv(project_xv(y_repr.xv, np.asarray(x0, dtype=float), cfg), cfg.T)
    return project_xv(y_repr, x0, cfg)


def _ball(V, dt, R):
    nrm = np.sqrt(dt * (V * V).sum((-1, -2)))
    scale = np.where(nrm <= R, 1.0, R / np.where(nrm > 0, nrm, 1.0))
    return V * scale[:, None, None]


# -- best response -------------------------------------------------------------


@dataclass
class SolverParams:
    tol: float = 1e-8
    max_iter: int = 20000
    grow: float = 2.0
    armijo: float = 1e-4


@dataclass
class BestResponseInfo:
    iterations: int
    residuals: np.ndarray
    near_bound: np.ndarray


def best_response_batch(x0s, flow, cfg, solver=None, warm=None):
    """Projected gradient for all players at once with per-player Barzilai-Borwein
    steps safeguarded by Armijo backtracking.

    ``x0s`` is ``(P, d)``; ``warm`` optional velocities ``(P, N, d)``. Returns node
    stacks ``(P, N+1, d)`` and a :class:`BestResponseInfo`.
    """
    solver = solver or SolverParams()
    _check_flow(flow, cfg)
    dt, R = cfg.dt, cfg.radius
    x0s = np.asarray(x0s, dtype=float).reshape(-1, cfg.d)
    P = x0s.shape[0]
    if warm is None:
        V = np.zeros((P, cfg.n_steps, cfg.d))
    else:
        V = _ball(np.array(warm, dtype=float), dt, R)

    def evaluate(idx, Vs):
        G = nodes_from_xv(np.concatenate([x0s[idx, None, :], Vs], axis=1), dt)
        J, Rr = cost_and_grad(G, flow, cfg)
        return J, Rr[:, 1:]

    J, Gv = evaluate(np.arange(P), V)
    step = np.full(P, 1.0 / cfg.lag.mass)
    res = np.sqrt(dt * ((V - _ball(V - Gv, dt, R)) ** 2).sum((1, 2)))
    it = 0
    while True:
        active = np.nonzero(res > solver.tol)[0]
        if active.size == 0:
            break
        if it >= solver.max_iter:
            xv = np.concatenate([x0s[:, None, :], V], axis=1)
            raise BestResponseError(
                f"best response did not reach tolerance {solver.tol} in {solver.max_iter} iterations "
                f"(worst residual {res.max():.3e} for player {int(np.argmax(res))})",
                xv, res.copy(), active,
            )
        it += 1
        s = step[active]
        Va, Ga = V[active], Gv[active]
        trial = _ball(Va - s[:, None, None] * Ga, dt, R)
        Jt, Gt = evaluate(active, trial)
        dV = trial - Va
        slope = dt * (Ga * dV).sum((1, 2))
        ok = Jt <= J[active] + solver.armijo * slope + 1e-13 * (1.0 + np.abs(J[active]))
        acc = active[ok]
        if acc.size:
            sv = dV[ok]
            yg = Gt[ok] - Ga[ok]
            ss = (sv * sv).sum((1, 2))
            sy = (sv * yg).sum((1, 2))
            # Barzilai-Borwein step from the accepted move; grow cautiously if curvature is not positive
            bb = np.where(sy > 0, ss / np.where(sy > 0, sy, 1.0), step[acc] * solver.grow)
            step[acc] = np.clip(bb, 1e-10, 1e10)
            V[acc], J[acc], Gv[acc] = trial[ok], Jt[ok], Gt[ok]
            res[acc] = np.sqrt(dt * ((V[acc] - _ball(V[acc] - Gv[acc], dt, R)) ** 2).sum((1, 2)))
        step[active[~ok]] *= 0.5
    xv = np.concatenate([x0s[:, None, :], V], axis=1)
    near = velocity_norm(xv, dt) >= 0.99 * R
    return nodes_from_xv(xv, dt), BestResponseInfo(it, res, near)


def best_response_traj(x0, eta, cfg, solver=None, warm=None):
    """Minimiser of ``J(., eta)`` over paths from ``x0`` with bounded velocity."""
    fl = flow_of(eta)
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    w = None if warm is None else (warm.v[None] if isinstance(warm, Trajectory) else warm)
    G, info = best_response_batch(x0[None], fl, cfg, solver, w)
    if info.near_bound[0]:
        warnings.warn("best response is within 1% of the velocity bound", VelocityBoundWarning, stacklevel=2)
    return Trajectory.from_nodes(G[0], cfg.T)


# -- optimality check --------------------------------------------------------------


def euler_lagrange_defects(gamma, eta, cfg):
    """Interior and terminal defects of the discrete Euler-Lagrange system.

    Interior: ``max_j |(L_v(v_j) - L_v(v_{j-1}))/dt - (L_x + f_x)(g_j)|`` for ``j = 1..N-1``.
    Terminal: ``|L_v(v_{N-1}) + g_x(g_N)|``.
    """
    G, single = _as_nodes(gamma, cfg)
    fl = flow_of(eta)
    _check_flow(fl, cfg)
    dt, N = cfg.dt, cfg.n_steps
    X = G[:, :N]
    V = np.diff(G, axis=1) / dt
    _, fx = cfg.f_coupling.evaluate(X, fl, slice(0, N))
    _, gx = cfg.g_coupling.evaluate(G[:, N:], fl, slice(N, N + 1))
    F = cfg.lag.grad_x(X, V) + fx
    D = cfg.lag.grad_v(X, V)
    if N > 1:
        interior = np.linalg.norm((D[:, 1:] - D[:, :-1]) / dt - F[:, 1:], axis=-1).max(1)
    else:
        interior = np.zeros(G.shape[0])
    terminal = np.linalg.norm(D[:, -1] + gx[:, 0], axis=-1)
    nrm = velocity_norm(xv_from_nodes(G, dt), dt)
    if np.any(nrm >= 0.99 * cfg.radius):
        warnings.warn(
            "velocity bound is (nearly) active; Euler-Lagrange defects need not vanish",
            VelocityBoundWarning,
            stacklevel=3,
        )
    if single:
        return float(interior[0]), float(terminal[0])
    return interior, terminal


def euler_lagrange_residual(gamma, eta, cfg):
    interior, terminal = euler_lagrange_defects(gamma, eta, cfg)
    return interior + terminal


def dual_norm(Y, cfg):
    return h1_norm(Y, cfg.dt)
