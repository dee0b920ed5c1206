"""Independent reference computations used to derive frozen test values.

Nothing here imports the package's solvers; each oracle is written from the
defining formula so that agreement is meaningful.
"""

import itertools

import numpy as np
from scipy.optimize import linprog


def w1_line(x, a, y, b):
    """W1 on the real line as the L1 distance between the two CDFs."""
    x, a, y, b = (np.asarray(v, dtype=float).ravel() for v in (x, a, y, b))
    grid = np.union1d(x, y)
    Fa = np.array([a[x <= g].sum() for g in grid])
    Fb = np.array([b[y <= g].sum() for g in grid])
    return float((np.abs(Fa - Fb)[:-1] * np.diff(grid)).sum())


def w1_lp(a, b, D):
    """Dense transport LP with every equality kept (no redundant-row tricks)."""
    S, T = D.shape
    A = np.zeros((S + T, S * T))
    for i in range(S):
        A[i, i * T : (i + 1) * T] = 1.0
    for j in range(T):
        A[S + j, j::T] = 1.0
    res = linprog(D.ravel(), A_eq=A, b_eq=np.r_[a, b], bounds=(0, None), method="highs-ds")
    assert res.status == 0, res.message
    return float(res.fun)


def euclid_matrix(P, Q):
    P = np.asarray(P, dtype=float).reshape(len(P), -1)
    Q = np.asarray(Q, dtype=float).reshape(len(Q), -1)
    return np.array([[np.linalg.norm(p - q) for q in Q] for p in P])


def population_exploitability(costs_fn, m, profile_counts):
    """Sum over players of own cost minus the cheapest cost, by enumeration."""
    c = costs_fn(np.asarray(m, dtype=float))
    total = sum(profile_counts)
    gain = 0.0
    for j, count in enumerate(profile_counts):
        gain += count / total * (c[j] - min(c[k] for k in range(len(c))))
    return gain


def simplex_grid(n, grid):
    for counts in itertools.product(range(grid + 1), repeat=n):
        if sum(counts) == grid:
            yield np.array(counts, dtype=float) / grid


def lemma_recursion(phi1, eps, n_terms):
    """phi_{n+1} = phi_n - phi_n/(n+1) + eps_n/n at equality."""
    phi = [phi1]
    for n in range(1, n_terms):
        phi.append(phi[-1] - phi[-1] / (n + 1) + eps[n - 1] / n)
    return np.array(phi)


def discrete_cost(x0, V, dt, f_val, g_val):
    """Left-endpoint rectangle cost for the quadratic Lagrangian with fixed-field couplings."""
    X = x0 + dt * np.concatenate([[0.0], np.cumsum(V)])
    return dt * sum(0.5 * v * v + f_val(X[k], k) for k, v in enumerate(V)) + g_val(X[-1])


def quadratic_br_1d(x0, N, T, af=0.0, cf=0.0, ag=0.0, cg=0.0, lin_f=None, lin_g=0.0):
    """Exact minimiser of the discrete cost with
    f_k(x) = af/2 (x - cf)^2 + lin_f[k] x and g(x) = ag/2 (x - cg)^2 + lin_g x.

    The cost is a quadratic form in the velocities; solve its normal equations.
    """
    dt = T / N
    lin_f = np.zeros(N) if lin_f is None else np.asarray(lin_f, dtype=float)
    # x_k = x0 + dt * (L v)_k with L strictly lower triangular ones (k = 0..N)
    L = np.zeros((N + 1, N))
    for k in range(1, N + 1):
        L[k, :k] = 1.0
    L *= dt
    Lf = L[:N]
    Lg = L[N]
    H = dt * np.eye(N) + dt * af * Lf.T @ Lf + ag * np.outer(Lg, Lg)
    r = dt * Lf.T @ (af * (x0 - cf) + lin_f) + Lg * (ag * (x0 - cg) + lin_g)
    V = np.linalg.solve(H, -r)
    return x0 + L @ V


def cosh_path(x0, a, T, t):
    """Solution of x'' = a x, x(0) = x0, x'(T) = 0."""
    s = np.sqrt(a)
    return x0 * np.cosh(s * (T - t)) / np.cosh(s * T)


def straight_line_terminal(x0, T, a, c, shift=0.0):
    """Continuous minimiser of int v^2/2 + a/2 (x_T - c)^2 + shift * x_T: constant velocity."""
    v = -(a * (x0 - c) + shift) / (1.0 + a * T)
    return v


def central_difference(fun, x, z, eps):
    return (fun(x + eps * z) - fun(x - eps * z)) / (2.0 * eps)


def total_variation_states(m1, m2):
    return 0.5 * float(np.abs(np.asarray(m1) - np.asarray(m2)).sum())
