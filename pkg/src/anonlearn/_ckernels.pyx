# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: kernel field sums, path distance matrices, exact transport."""

import numpy as np

from libc.math cimport exp, sqrt, fabs


def gaussian_field(const double[:, :, ::1] X, const double[:, :, ::1] Y,
                   const double[::1] w, double sigma, double amplitude):
    """Gaussian kernel sums over weighted atoms and their gradients in x.

    ``X`` holds query positions with shape (P, S, d) at S time slots and ``Y``
    the atoms with shape (S, A, d). Returns ``(values (P, S), grads (P, S, d))``.
    """
    cdef Py_ssize_t P = X.shape[0], S = X.shape[1], d = X.shape[2]
    cdef Py_ssize_t A = Y.shape[1]
    cdef Py_ssize_t p, s, a, k
    cdef double r2, t, e, acc
    cdef double inv2 = 1.0 / (2.0 * sigma * sigma)
    cdef double scale = amplitude / (sigma * sigma)
    val = np.zeros((P, S))
    grad = np.zeros((P, S, d))
    # weighted atom sums, so the gradient is (sum e) x - (sum e y), one pass over the atoms
    ey = np.zeros(d)
    cdef double[:, ::1] vv = val
    cdef double[:, :, ::1] gg = grad
    cdef double[::1] ey_ = ey
    with nogil:
        for p in range(P):
            for s in range(S):
                acc = 0.0
                for k in range(d):
                    ey_[k] = 0.0
                for a in range(A):
                    r2 = 0.0
                    for k in range(d):
                        t = X[p, s, k] - Y[s, a, k]
                        r2 = r2 + t * t
                    e = w[a] * exp(-r2 * inv2)
                    acc = acc + e
                    for k in range(d):
                        ey_[k] += e * Y[s, a, k]
                vv[p, s] = amplitude * acc
                for k in range(d):
                    gg[p, s, k] = -scale * (acc * X[p, s, k] - ey_[k])
    return val, grad


def sup_distance(const double[:, :, ::1] P1, const double[:, :, ::1] P2):
    """Matrix of max-over-nodes Euclidean distances between two path stacks."""
    cdef Py_ssize_t n1 = P1.shape[0], n2 = P2.shape[0]
    cdef Py_ssize_t S = P1.shape[1], d = P1.shape[2]
    cdef Py_ssize_t i, j, s, k
    cdef double best, r2, t
    out = np.empty((n1, n2))
    cdef double[:, ::1] oo = out
    with nogil:
        for i in range(n1):
            for j in range(n2):
                best = 0.0
                for s in range(S):
                    r2 = 0.0
                    for k in range(d):
                        t = P1[i, s, k] - P2[j, s, k]
                        r2 = r2 + t * t
                    if r2 > best:
                        best = r2
                oo[i, j] = sqrt(best)
    return out


cdef class _Tree:
    # Spanning-tree basis of a transportation problem with S sources, T sinks.
    cdef Py_ssize_t S, T, n, m
    cdef long[::1] arc_src, arc_snk
    cdef double[::1] flow, u, v
    cdef long[::1] deg, start, fill, adj_arc, adj_node
    cdef long[::1] parent, parent_arc, depth, queue

    def __init__(self, Py_ssize_t S, Py_ssize_t T):
        self.S = S
        self.T = T
        self.n = S + T
        self.m = S + T - 1
        self.arc_src = np.zeros(self.m, dtype=np.int64)
        self.arc_snk = np.zeros(self.m, dtype=np.int64)
        self.flow = np.zeros(self.m)
        self.u = np.zeros(S)
        self.v = np.zeros(T)
        self.deg = np.zeros(self.n, dtype=np.int64)
        self.start = np.zeros(self.n + 1, dtype=np.int64)
        self.fill = np.zeros(self.n, dtype=np.int64)
        self.adj_arc = np.zeros(2 * self.m, dtype=np.int64)
        self.adj_node = np.zeros(2 * self.m, dtype=np.int64)
        self.parent = np.zeros(self.n, dtype=np.int64)
        self.parent_arc = np.zeros(self.n, dtype=np.int64)
        self.depth = np.zeros(self.n, dtype=np.int64)
        self.queue = np.zeros(self.n, dtype=np.int64)

    cdef void rebuild(self, const double[:, ::1] C) noexcept nogil:
        cdef Py_ssize_t e, x, y, node, nb, k, head, tail, s, t
        for x in range(self.n):
            self.deg[x] = 0
            self.depth[x] = -1
        for e in range(self.m):
            self.deg[self.arc_src[e]] += 1
            self.deg[self.S + self.arc_snk[e]] += 1
        self.start[0] = 0
        for x in range(self.n):
            self.start[x + 1] = self.start[x] + self.deg[x]
            self.fill[x] = self.start[x]
        for e in range(self.m):
            x = self.arc_src[e]
            y = self.S + self.arc_snk[e]
            self.adj_arc[self.fill[x]] = e
            self.adj_node[self.fill[x]] = y
            self.fill[x] += 1
            self.adj_arc[self.fill[y]] = e
            self.adj_node[self.fill[y]] = x
            self.fill[y] += 1
        head = 0
        tail = 1
        self.queue[0] = 0
        self.depth[0] = 0
        self.parent[0] = -1
        self.parent_arc[0] = -1
        self.u[0] = 0.0
        while head < tail:
            node = self.queue[head]
            head += 1
            for k in range(self.start[node], self.start[node + 1]):
                nb = self.adj_node[k]
                if self.depth[nb] >= 0:
                    continue
                e = self.adj_arc[k]
                self.depth[nb] = self.depth[node] + 1
                self.parent[nb] = node
                self.parent_arc[nb] = e
                s = self.arc_src[e]
                t = self.arc_snk[e]
                if nb >= self.S:
                    self.v[t] = C[s, t] - self.u[s]
                else:
                    self.u[s] = C[s, t] - self.v[t]
                self.queue[tail] = nb
                tail += 1


def transport(const double[::1] a, const double[::1] b, const double[:, ::1] C,
              long max_pivots=-1):
    """Exact min-cost transport between supplies ``a`` and demands ``b``.

    Primal network simplex on the complete bipartite graph, started from the
    least-cost basis and using block search for the entering arc.
    Returns ``(cost, status, pivots)``; status 0 is optimal, 1 means the pivot
    cap was hit (the caller should fall back to a general LP solver).
    """
    cdef Py_ssize_t S = a.shape[0], T = b.shape[0]
    cdef Py_ssize_t i, j, e, k, q, nq, scanned, block, best_q, leave, x, y
    cdef Py_ssize_t na, nb_, slot
    cdef double ra, rb, amt, r, best, theta, scale, eps, cost
    cdef long pivots = 0
    cdef int status = 0
    if S == 0 or T == 0:
        return 0.0, 0, 0
    # least-cost (matrix minimum) starting basis
    cells = np.argsort(np.asarray(C).ravel(), kind="stable")
    cdef const long[::1] cell = cells
    row_open = np.ones(S, dtype=np.int8)
    col_open = np.ones(T, dtype=np.int8)
    cdef signed char[::1] ro = row_open
    cdef signed char[::1] co = col_open
    cdef Py_ssize_t n_rows = S, n_cols = T, c_idx
    tree = _Tree(S, T)
    cdef _Tree tr = tree
    rem_a = np.array(a, dtype=np.float64)
    rem_b = np.array(b, dtype=np.float64)
    cdef double[::1] ra_ = rem_a
    cdef double[::1] rb_ = rem_b
    path_a = np.zeros(S + T, dtype=np.int64)
    path_b = np.zeros(S + T, dtype=np.int64)
    cdef long[::1] pa = path_a
    cdef long[::1] pb = path_b

    scale = 0.0
    for i in range(S):
        for j in range(T):
            if fabs(C[i, j]) > scale:
                scale = fabs(C[i, j])
    eps = 1e-12 * (1.0 + scale)
    nq = S * T
    block = <Py_ssize_t>sqrt(<double>nq)
    if block < 16:
        block = 16
    if max_pivots < 0:
        max_pivots = 50 * (S + T) + 10000

    with nogil:
        e = 0
        for c_idx in range(nq):
            if e == S + T - 1:
                break
            i = cell[c_idx] // T
            j = cell[c_idx] - i * T
            if ro[i] == 0 or co[j] == 0:
                continue
            amt = ra_[i] if ra_[i] < rb_[j] else rb_[j]
            if amt < 0.0:
                amt = 0.0
            tr.arc_src[e] = i
            tr.arc_snk[e] = j
            tr.flow[e] = amt
            e += 1
            ra_[i] -= amt
            rb_[j] -= amt
            # cross out exactly one line so the basis stays a spanning tree
            if (ra_[i] <= rb_[j] and n_rows > 1) or n_cols == 1:
                ro[i] = 0
                n_rows -= 1
            else:
                co[j] = 0
                n_cols -= 1
        tr.rebuild(C)

        q = 0
        while True:
            best = -eps
            best_q = -1
            scanned = 0
            while scanned < nq:
                i = q // T
                j = q - i * T
                r = C[i, j] - tr.u[i] - tr.v[j]
                if r < best:
                    best = r
                    best_q = q
                q += 1
                if q == nq:
                    q = 0
                scanned += 1
                if best_q >= 0 and scanned % block == 0:
                    break
            if best_q < 0:
                break
            if pivots >= max_pivots:
                status = 1
                break
            pivots += 1
            i = best_q // T
            j = best_q - i * T
            # tree path from sink j to source i
            x = S + j
            y = i
            na = 0
            nb_ = 0
            while tr.depth[x] > tr.depth[y]:
                pa[na] = tr.parent_arc[x]
                na += 1
                x = tr.parent[x]
            while tr.depth[y] > tr.depth[x]:
                pb[nb_] = tr.parent_arc[y]
                nb_ += 1
                y = tr.parent[y]
            while x != y:
                pa[na] = tr.parent_arc[x]
                na += 1
                x = tr.parent[x]
                pb[nb_] = tr.parent_arc[y]
                nb_ += 1
                y = tr.parent[y]
            # cycle order: pa[0..na) then pb reversed; even positions lose flow
            theta = -1.0
            leave = -1
            for k in range(na + nb_):
                if k % 2 == 1:
                    continue
                e = pa[k] if k < na else pb[na + nb_ - 1 - k]
                if leave < 0 or tr.flow[e] < theta:
                    theta = tr.flow[e]
                    leave = e
            if theta < 0.0:
                theta = 0.0
            for k in range(na + nb_):
                e = pa[k] if k < na else pb[na + nb_ - 1 - k]
                if k % 2 == 0:
                    tr.flow[e] -= theta
                else:
                    tr.flow[e] += theta
            slot = leave
            tr.arc_src[slot] = i
            tr.arc_snk[slot] = j
            tr.flow[slot] = theta
            tr.rebuild(C)

        cost = 0.0
        for e in range(S + T - 1):
            if tr.flow[e] > 0.0:
                cost += tr.flow[e] * C[tr.arc_src[e], tr.arc_snk[e]]
    return cost, status, pivots
