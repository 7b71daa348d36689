# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops.

Every function here has a pure-Python twin in ``_pykernels`` with the same
signature and semantics; ``sdebounds.kernels`` picks one at import time.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, isfinite

cnp.import_array()


def euler_linear(const double[:, ::1] A, const double[::1] x0, double eta,
                 const double[:, ::1] noise, double guard):
    """Euler-Maruyama for dx = A x dt + db with pre-scaled increments.

    Returns ``(states, bad)`` where ``bad`` is the first step index whose
    state left the guard box (or -1).
    """
    cdef Py_ssize_t n = noise.shape[0], p = x0.shape[0]
    cdef Py_ssize_t t, i, j
    cdef double acc, val
    cdef Py_ssize_t bad = -1
    out = np.empty((n + 1, p), dtype=np.float64)
    cdef double[:, ::1] X = out
    for i in range(p):
        X[0, i] = x0[i]
    with nogil:
        for t in range(n):
            for i in range(p):
                acc = 0.0
                for j in range(p):
                    acc = acc + A[i, j] * X[t, j]
                val = X[t, i] + eta * acc + noise[t, i]
                X[t + 1, i] = val
                if not (fabs(val) <= guard):
                    bad = t + 1
            if bad >= 0:
                break
    return out, bad


cdef void _spring_force(const double[::1] q, const long[::1] ei, const long[::1] ej,
                        const double[::1] rest, Py_ssize_t d, double* force,
                        int* coincident) noexcept nogil:
    cdef Py_ssize_t e, a, m = ei.shape[0], pd = q.shape[0]
    cdef Py_ssize_t i, j
    cdef double dist, scale, diff
    for a in range(pd):
        force[a] = 0.0
    for e in range(m):
        i = ei[e]
        j = ej[e]
        dist = 0.0
        for a in range(d):
            diff = q[i * d + a] - q[j * d + a]
            dist = dist + diff * diff
        dist = sqrt(dist)
        if dist == 0.0:
            coincident[0] = 1
            return
        scale = 1.0 - rest[e] / dist
        for a in range(d):
            diff = scale * (q[i * d + a] - q[j * d + a])
            force[i * d + a] -= diff
            force[j * d + a] += diff


def spring_force(const double[::1] q, const long[::1] ei, const long[::1] ej,
                 const double[::1] rest, Py_ssize_t d):
    """Return -grad U(q) for springs listed as edges (ei, ej) with rest lengths."""
    out = np.empty(q.shape[0], dtype=np.float64)
    cdef double[::1] f = out
    cdef int coincident = 0
    with nogil:
        _spring_force(q, ei, ej, rest, d, &f[0], &coincident)
    if coincident:
        raise ZeroDivisionError("connected masses coincide")
    return out


def euler_mass_spring(const long[::1] ei, const long[::1] ej, const double[::1] rest,
                      Py_ssize_t d, double gamma, double eta,
                      const double[::1] x0, const double[:, ::1] noise, double guard):
    """Euler-Maruyama for the damped spring network; noise drives velocities only.

    State layout is ``[q, v]``; ``noise`` has shape (n, p*d) and is pre-scaled.
    """
    cdef Py_ssize_t n = noise.shape[0], dim = x0.shape[0]
    cdef Py_ssize_t pd = dim // 2
    cdef Py_ssize_t t, a
    cdef Py_ssize_t bad = -1
    cdef int coincident = 0
    cdef double qa, va
    out = np.empty((n + 1, dim), dtype=np.float64)
    cdef double[:, ::1] X = out
    force_buf = np.empty(pd, dtype=np.float64)
    cdef double[::1] force = force_buf
    for a in range(dim):
        X[0, a] = x0[a]
    with nogil:
        for t in range(n):
            _spring_force(X[t, :pd], ei, ej, rest, d, &force[0], &coincident)
            if coincident:
                bad = t
                break
            for a in range(pd):
                qa = X[t, a] + eta * X[t, pd + a]
                va = X[t, pd + a] + eta * (force[a] - gamma * X[t, pd + a]) + noise[t, a]
                X[t + 1, a] = qa
                X[t + 1, pd + a] = va
                if not (fabs(qa) <= guard and fabs(va) <= guard):
                    bad = t + 1
            if bad >= 0:
                break
    if coincident:
        raise ZeroDivisionError(f"connected masses coincide at step {bad}")
    return out, bad


def lasso_cd(const double[:, ::1] G, const double[:, ::1] C, double lam,
             double[:, ::1] B, double tol, Py_ssize_t max_sweeps):
    """Cyclic coordinate descent on 0.5 b'Gb - c'b + lam |b|_1, column by column.

    ``B`` (q x r) holds warm starts and is overwritten. Returns the largest
    sweep count used by any column.
    """
    cdef Py_ssize_t q = G.shape[0], r = C.shape[1]
    cdef Py_ssize_t col, j, l, sweep, worst = 0
    cdef double z, new, delta, biggest, gjj
    grad_buf = np.empty(q, dtype=np.float64)
    cdef double[::1] Gb = grad_buf
    with nogil:
        for col in range(r):
            for j in range(q):
                z = 0.0
                for l in range(q):
                    z = z + G[j, l] * B[l, col]
                Gb[j] = z
            sweep = 0
            while sweep < max_sweeps:
                sweep += 1
                biggest = 0.0
                for j in range(q):
                    gjj = G[j, j]
                    if gjj <= 0.0:
                        new = 0.0
                    else:
                        z = C[j, col] - Gb[j] + gjj * B[j, col]
                        if z > lam:
                            new = (z - lam) / gjj
                        elif z < -lam:
                            new = (z + lam) / gjj
                        else:
                            new = 0.0
                    delta = new - B[j, col]
                    if delta != 0.0:
                        B[j, col] = new
                        for l in range(q):
                            Gb[l] = Gb[l] + delta * G[l, j]
                        if fabs(delta) > biggest:
                            biggest = fabs(delta)
                if biggest < tol:
                    break
            if sweep > worst:
                worst = sweep
    return worst
