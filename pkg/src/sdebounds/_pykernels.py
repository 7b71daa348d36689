"""Pure numpy versions of the compiled kernels in ``_ckernels.pyx``.

Signatures and return values match the compiled module exactly so the two
can be swapped at import time.
"""
import numpy as np


def euler_linear(A, x0, eta, noise, guard):
    n, p = noise.shape
    out = np.empty((n + 1, p))
    out[0] = x0
    x = np.array(x0, dtype=float)
    for t in range(n):
        x = x + eta * (A @ x) + noise[t]
        out[t + 1] = x
        if not np.all(np.abs(x) <= guard):
            return out, t + 1
    return out, -1


def _spring_force(q, ei, ej, rest, d):
    qq = q.reshape(-1, d)
    delta = qq[ei] - qq[ej]
    dist = np.sqrt(np.einsum("ij,ij->i", delta, delta))
    if np.any(dist == 0.0):
        return None
    contrib = (1.0 - rest / dist)[:, None] * delta
    force = np.zeros_like(qq)
    np.add.at(force, ei, -contrib)
    np.add.at(force, ej, contrib)
    return force.ravel()


def spring_force(q, ei, ej, rest, d):
    f = _spring_force(np.asarray(q, dtype=float), ei, ej, rest, d)
    if f is None:
        raise ZeroDivisionError("connected masses coincide")
    return f


def euler_mass_spring(ei, ej, rest, d, gamma, eta, x0, noise, guard):
    n = noise.shape[0]
    dim = x0.shape[0]
    pd = dim // 2
    out = np.empty((n + 1, dim))
    out[0] = x0
    q = np.array(x0[:pd], dtype=float)
    v = np.array(x0[pd:], dtype=float)
    for t in range(n):
        force = _spring_force(q, ei, ej, rest, d)
        if force is None:
            raise ZeroDivisionError(f"connected masses coincide at step {t}")
        q_new = q + eta * v
        v = v + eta * (force - gamma * v) + noise[t]
        q = q_new
        out[t + 1, :pd] = q
        out[t + 1, pd:] = v
        if not (np.all(np.abs(q) <= guard) and np.all(np.abs(v) <= guard)):
            return out, t + 1
    return out, -1


def lasso_cd(G, C, lam, B, tol, max_sweeps):
    q, r = C.shape
    worst = 0
    diag = np.diag(G).copy()
    for col in range(r):
        b = B[:, col]
        Gb = G @ b
        sweep = 0
        while sweep < max_sweeps:
            sweep += 1
            biggest = 0.0
            for j in range(q):
                gjj = diag[j]
                if gjj <= 0.0:
                    new = 0.0
                else:
                    z = C[j, col] - Gb[j] + gjj * b[j]
                    if z > lam:
                        new = (z - lam) / gjj
                    elif z < -lam:
                        new = (z + lam) / gjj
                    else:
                        new = 0.0
                delta = new - b[j]
                if delta != 0.0:
                    b[j] = new
                    Gb += delta * G[:, j]
                    biggest = max(biggest, abs(delta))
            if biggest < tol:
                break
        worst = max(worst, sweep)
    return worst
