"""Pure-Python (numpy/scipy) versions of the compiled kernels.

Same signatures and return conventions as ``_ckernels``; used when the
extension is not built or when ``ANONLEARN_PURE_PYTHON=1``.
"""

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

_CHUNK = 1 << 20


def gaussian_field(X, Y, w, sigma, amplitude):
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    w = np.asarray(w, dtype=float)
    P, S, d = X.shape
    A = Y.shape[1]
    val = np.zeros((P, S))
    grad = np.zeros((P, S, d))
    step = max(1, _CHUNK // max(1, P * A * d))
    for s0 in range(0, S, step):
        s1 = min(S, s0 + step)
        diff = X[:, s0:s1, None, :] - Y[None, s0:s1, :, :]  # (P, s, A, d)
        e = w * np.exp(-np.einsum("psak,psak->psa", diff, diff) / (2.0 * sigma**2))
        val[:, s0:s1] = e.sum(axis=2)
        grad[:, s0:s1] = -np.einsum("psa,psak->psk", e, diff) / sigma**2
    return amplitude * val, amplitude * grad


def sup_distance(P1, P2):
    P1 = np.asarray(P1, dtype=float)
    P2 = np.asarray(P2, dtype=float)
    out = np.empty((P1.shape[0], P2.shape[0]))
    step = max(1, _CHUNK // max(1, P2.shape[0] * P1.shape[1] * P1.shape[2]))
    for i0 in range(0, P1.shape[0], step):
        diff = P1[i0 : i0 + step, None] - P2[None]
        out[i0 : i0 + step] = np.sqrt(np.einsum("ijsk,ijsk->ijs", diff, diff).max(axis=2))
    return out


def transport(a, b, C, max_pivots=-1):
    """Exact transport cost through the HiGHS LP solver; ``max_pivots`` is ignored."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    C = np.asarray(C, dtype=float)
    S, T = C.shape
    if S == 0 or T == 0:
        return 0.0, 0, 0
    cols = np.arange(S * T)
    rows_src = np.repeat(np.arange(S), T)
    rows_snk = S + np.tile(np.arange(T), S)
    A_eq = sp.csr_matrix(
        (np.ones(2 * S * T), (np.r_[rows_src, rows_snk], np.r_[cols, cols])),
        shape=(S + T, S * T),
    )
    # drop one redundant balance row; rescale demands to the exact supply total
    b = b * (a.sum() / b.sum())
    res = linprog(
        C.ravel(),
        A_eq=A_eq[:-1],
        b_eq=np.r_[a, b][:-1],
        bounds=(0, None),
        method="highs",
    )
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    return float(res.fun), 0, int(getattr(res, "nit", 0) or 0)
