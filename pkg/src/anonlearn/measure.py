"""Finite-support probability measures over a metric action space.

Atoms are stored as a stacked numpy array ``points`` of shape ``(A, *point_shape)``
together with a weight vector. The ground metric is a :class:`Metric` whose
``pairwise`` function maps two point stacks to a distance matrix.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels

DEDUP_TOL = 1e-12
PRUNE_TOL = 1e-14
DEFAULT_LP_CAP = 1024


class MeasureError(ValueError):
    """Invalid measure construction or operation."""


class IntegrationError(MeasureError):
    """An integrand produced a non-finite value."""

    def __init__(self, index, value):
        super().__init__(f"integrand is not finite at atom {index} (value {value!r})")
        self.index = index
        self.value = value


class SupportTooLarge(MeasureError):
    """The exact transport problem exceeds the configured size cap."""


@dataclass(eq=False, frozen=True)
class Metric:
    """Ground metric with a vectorised pairwise distance function.

    Metrics compare by identity: two measures share a metric only if they hold
    the same ``Metric`` object. With ``prefilter`` set, duplicate detection
    assumes ``d(p, q) >= max_k |p_k - q_k| / m`` over the ``m`` flattened
    coordinates (true for every builtin) and only compares points whose
    coordinate sums are close.
    """

    name: str
    pairwise: object
    prefilter: bool = True

    def __call__(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        return float(self.pairwise(a[None], b[None])[0, 0])


def _flat(P):
    P = np.asarray(P, dtype=float)
    return P.reshape(P.shape[0], -1)


def _euclid(P, Q):
    P, Q = _flat(P), _flat(Q)
    sq = (P * P).sum(1)[:, None] + (Q * Q).sum(1)[None, :] - 2.0 * P @ Q.T
    D = np.sqrt(np.maximum(sq, 0.0))
    # the expanded form loses precision for nearly equal points; redo those exactly
    near = D < 1e-6
    if near.any():
        i, j = np.nonzero(near)
        D[i, j] = np.linalg.norm(P[i] - Q[j], axis=1)
    return D


def _total_variation(P, Q):
    P, Q = _flat(P), _flat(Q)
    return 0.5 * np.abs(P[:, None, :] - Q[None, :, :]).sum(axis=2)


def _discrete(P, Q):
    P, Q = _flat(P), _flat(Q)
    return (np.abs(P[:, None, :] - Q[None, :, :]).max(axis=2) > DEDUP_TOL).astype(float)


def _sup_path(P, Q):
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if P.ndim == 2:  # paths in one space dimension stored as (n, S)
        P, Q = P[..., None], Q[..., None]
    return kernels.sup_distance(P, Q)


EUCLIDEAN = Metric("euclidean", _euclid)
TOTAL_VARIATION = Metric("total_variation", _total_variation)
DISCRETE = Metric("discrete", _discrete)
SUP_PATH = Metric("sup_path", _sup_path)


class DiscreteMeasure:
    """Immutable weighted finite support.

    Construction validates the weights, merges duplicate points (distance below
    ``dedup_tol``), drops atoms lighter than ``PRUNE_TOL`` and renormalises.
    Derived quantities may be memoised in ``_cache`` by the owning game.
    """

    __slots__ = ("points", "weights", "metric", "_cache")

    def __init__(self, points, weights, metric, dedup_tol=DEDUP_TOL, _trusted=False):
        points = np.array(points, dtype=float)
        weights = np.array(weights, dtype=float).reshape(-1)
        if not _trusted:
            if points.shape[0] == 0 or weights.size == 0:
                raise MeasureError("empty profile")
            if points.shape[0] != weights.size:
                raise MeasureError("points and weights differ in length")
            if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
                raise MeasureError("invalid weight")
            if not np.all(np.isfinite(points)):
                raise MeasureError("non-finite point")
            points, weights = _dedup(points, weights, metric, dedup_tol)
            keep = weights >= PRUNE_TOL * weights.sum()
            points, weights = points[keep], weights[keep]
            weights = weights / weights.sum()
        points.setflags(write=False)
        weights.setflags(write=False)
        self.points = points
        self.weights = weights
        self.metric = metric
        self._cache = {}

    def __len__(self):
        return self.weights.size

    def __repr__(self):
        return f"DiscreteMeasure({len(self)} atoms, metric={self.metric.name})"

    def atoms(self):
        return list(zip(self.points, self.weights))

    def same_as(self, other, atol=1e-12):
        """Equality of measures up to dedup tolerance and weight tolerance ``atol``."""
        if other.metric is not self.metric:
            return False
        D = self.metric.pairwise(self.points, other.points)
        match = D < DEDUP_TOL
        if not (match.any(axis=1).all() and match.any(axis=0).all()):
            return False
        w_other = match.astype(float) @ other.weights
        return bool(np.allclose(w_other, self.weights, rtol=0.0, atol=atol))


def _match(new, old, metric, tol=DEDUP_TOL):
    """For each point of ``new``, the index of a point of ``old`` within ``tol`` (or -1)."""
    out = np.full(new.shape[0], -1)
    if old.shape[0] == 0 or new.shape[0] == 0:
        return out
    if not metric.prefilter:
        D = metric.pairwise(new, old)
        j = np.argmin(D, axis=1)
        hit = D[np.arange(new.shape[0]), j] < tol
        out[hit] = j[hit]
        return out
    fn, fo = _flat(new), _flat(old)
    m = fn.shape[1]
    kn, ko = fn.sum(1), fo.sum(1)
    scale = max(np.abs(fn).max(), np.abs(fo).max(), 1.0)
    width = m * tol + 4.0 * m * np.finfo(float).eps * scale
    order = np.argsort(ko, kind="stable")
    ks = ko[order]
    lo = np.searchsorted(ks, kn - width, side="left")
    hi = np.searchsorted(ks, kn + width, side="right")
    for r in np.nonzero(hi > lo)[0]:
        cand = order[lo[r]:hi[r]]
        D = metric.pairwise(new[r : r + 1], old[cand])[0]
        k = int(np.argmin(D))
        if D[k] < tol:
            out[r] = cand[k]
    return out


def _candidate_groups(points, metric, tol):
    """Index groups (ascending) outside of which no two points can be within ``tol``."""
    n = points.shape[0]
    if not metric.prefilter:
        return [np.arange(n)]
    f = _flat(points)
    m = f.shape[1]
    key = f.sum(1)
    width = m * tol + 4.0 * m * np.finfo(float).eps * max(np.abs(f).max(), 1.0)
    order = np.argsort(key, kind="stable")
    breaks = np.nonzero(np.diff(key[order]) > width)[0] + 1
    return [np.sort(g) for g in np.split(order, breaks) if g.size > 1]


def _dedup(points, weights, metric, tol):
    n = weights.size
    if n == 1:
        return points, weights
    # exact duplicates first (cheap), then a tolerance pass over the survivors
    flat = points.reshape(n, -1)
    _, first, inverse = np.unique(flat, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    if first.size < n:
        order = np.argsort(first)
        remap = np.empty_like(order)
        remap[order] = np.arange(order.size)
        w = np.zeros(first.size)
        np.add.at(w, remap[inverse], weights)
        points, weights = points[np.sort(first)], w
        n = weights.size
    if n == 1 or tol <= 0:
        return points, weights
    owner = np.arange(n)
    for group in _candidate_groups(points, metric, tol):
        D = metric.pairwise(points[group], points[group])
        for a in range(1, group.size):
            for b in range(a):
                if D[a, b] < tol and owner[group[b]] == group[b]:
                    owner[group[a]] = group[b]
                    break
    if np.all(owner == np.arange(n)):
        return points, weights
    w = np.zeros(n)
    np.add.at(w, owner, weights)
    keep = owner == np.arange(n)
    return points[keep], w[keep]


def dirac(point, metric):
    return DiscreteMeasure(np.asarray(point, dtype=float)[None], [1.0], metric)


def pushforward(profile, metric, tol=1e-9):
    """Measure induced by a list of ``(action, weight)`` pairs, or a ``(points, weights)`` tuple."""
    if isinstance(profile, tuple) and len(profile) == 2 and hasattr(profile[1], "__len__"):
        points, weights = profile
    else:
        if len(profile) == 0:
            raise MeasureError("empty profile")
        points = [p for p, _ in profile]
        weights = [w for _, w in profile]
    weights = np.asarray(weights, dtype=float)
    if weights.size == 0:
        raise MeasureError("empty profile")
    if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
        raise MeasureError("invalid weight")
    if abs(weights.sum() - 1.0) > tol:
        raise MeasureError(f"weights sum to {weights.sum()!r}, expected 1")
    return DiscreteMeasure(np.asarray(points, dtype=float), weights, metric)


def mix(mu, nu, t):
    """The mixture ``(1 - t) mu + t nu``."""
    if not 0.0 <= t <= 1.0:
        raise MeasureError(f"mixing weight {t!r} outside [0, 1]")
    if mu.metric is not nu.metric:
        raise MeasureError("measures use different metrics")
    if t == 0.0:
        return mu
    if t == 1.0:
        return nu
    # match new atoms against the existing support so the merge stays linear in |nu|
    j = _match(nu.points, mu.points, mu.metric)
    hit = j >= 0
    w = (1.0 - t) * mu.weights
    w = w.copy()
    np.add.at(w, j[hit], t * nu.weights[hit])
    fresh = ~hit
    points = np.concatenate([mu.points, nu.points[fresh]]) if fresh.any() else mu.points
    w = np.concatenate([w, t * nu.weights[fresh]])
    keep = w >= PRUNE_TOL
    points, w = points[keep], w[keep]
    # nu is already deduplicated, so its fresh atoms are pairwise distinct
    return DiscreteMeasure(points, w / w.sum(), mu.metric, _trusted=True)


def integrate(mu, f, vectorized=False):
    """``sum_i w_i f(a_i)``; a vectorised ``f`` receives the whole point stack."""
    if vectorized:
        vals = np.asarray(f(mu.points), dtype=float).reshape(-1)
    else:
        vals = np.array([f(p) for p in mu.points], dtype=float)
    bad = ~np.isfinite(vals)
    if bad.any():
        k = int(np.argmax(bad))
        raise IntegrationError(k, vals[k])
    return float(vals @ mu.weights)


def wasserstein1(mu, nu, cap=DEFAULT_LP_CAP):
    """Exact Wasserstein-1 distance under the shared ground metric.

    Mass common to both measures is cancelled first (the distance only depends
    on ``mu - nu``); the remaining transport problem must have at most ``cap``
    atoms in total.
    """
    if mu.metric is not nu.metric:
        raise MeasureError("measures use different metrics")
    metric = mu.metric
    a = mu.weights.copy()
    b = nu.weights.copy()
    # cancel bit-identical atoms first so the cap applies to the reduced problem
    index = {p.tobytes(): k for k, p in enumerate(nu.points)}
    for k, p in enumerate(mu.points):
        q = index.get(p.tobytes())
        if q is not None:
            common = min(a[k], b[q])
            a[k] -= common
            b[q] -= common
    src = np.nonzero(a > PRUNE_TOL)[0]
    snk = np.nonzero(b > PRUNE_TOL)[0]
    if src.size == 0 or snk.size == 0:
        return 0.0
    if cap is not None and src.size + snk.size > cap:
        raise SupportTooLarge(
            f"transport problem has {src.size + snk.size} atoms, above the cap of {cap}; "
            "subsample the measures or raise the cap"
        )
    D = metric.pairwise(mu.points[src], nu.points[snk])
    a, b = a[src], b[snk]
    # then atoms that agree up to the dedup tolerance
    for p, q in zip(*np.nonzero(D < DEDUP_TOL)):
        common = min(a[p], b[q])
        a[p] -= common
        b[q] -= common
    src = a > PRUNE_TOL
    snk = b > PRUNE_TOL
    if not src.any() or not snk.any():
        return 0.0
    C = D[np.ix_(src, snk)]
    a, b = a[src], b[snk]
    return kernels.transport(a, b * (a.sum() / b.sum()), C)


def to_record(mu, encode=None):
    """JSON-ready ``{"atoms": [{"point": ..., "weight": ...}]}``."""
    if encode is None:
        encode = lambda p: np.asarray(p, dtype=float).reshape(-1).tolist()  # noqa: E731
    return {"atoms": [{"point": encode(p), "weight": float(w)} for p, w in zip(mu.points, mu.weights)]}


__all__ = [
    "DiscreteMeasure",
    "Metric",
    "MeasureError",
    "IntegrationError",
    "SupportTooLarge",
    "EUCLIDEAN",
    "TOTAL_VARIATION",
    "DISCRETE",
    "SUP_PATH",
    "dirac",
    "pushforward",
    "mix",
    "integrate",
    "wasserstein1",
    "to_record",
]
