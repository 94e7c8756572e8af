"""Compiled inner loop of the oscillation fit.

The damped sinusoid columns are generated by complex rotation
(``z_{k+1} = z_k * exp((-lam + i omega) dt)``), which is exact up to
rounding for uniformly sampled signals and avoids per-sample exp/cos/sin.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def fill_design(lam, omega, lam_p, omega_p, ncomp, dt, sw, drift, A):
    n = A.shape[0]
    qr = math.exp(-lam * dt) * math.cos(omega * dt)
    qi = math.exp(-lam * dt) * math.sin(omega * dt)
    pr = math.exp(-lam_p * dt) * math.cos(omega_p * dt)
    pi = math.exp(-lam_p * dt) * math.sin(omega_p * dt)
    zr, zi, wr, wi = 1.0, 0.0, 1.0, 0.0
    for i in range(n):
        A[i, 0] = zr * sw[i]
        A[i, 1] = zi * sw[i]
        zr, zi = zr * qr - zi * qi, zr * qi + zi * qr
        j = 2
        if ncomp == 2:
            A[i, 2] = wr * sw[i]
            A[i, 3] = wi * sw[i]
            wr, wi = wr * pr - wi * pi, wr * pi + wi * pr
            j = 4
        A[i, j] = drift[i, 0]
        A[i, j + 1] = drift[i, 1]
        A[i, j + 2] = drift[i, 2]


@njit(cache=True)
def weighted_lsq(A, b, coef):
    """Solve min ||A c - b|| via Jacobi-scaled normal equations.

    Returns the squared residual, or -1.0 when the scaled Gram matrix has a
    pivot below 1e-12 (the caller then falls back to an SVD solve).
    """
    n, K = A.shape
    G = np.zeros((K, K))
    r = np.zeros(K)
    for i in range(n):
        for a in range(K):
            va = A[i, a]
            r[a] += va * b[i]
            for c in range(a + 1):
                G[a, c] += va * A[i, c]
    d = np.empty(K)
    for a in range(K):
        if G[a, a] <= 0.0:
            return -1.0
        d[a] = 1.0 / math.sqrt(G[a, a])
    L = np.zeros((K, K))
    for a in range(K):
        for c in range(a + 1):
            s = G[a, c] * d[a] * d[c]
            for k in range(c):
                s -= L[a, k] * L[c, k]
            if a == c:
                if s < 1e-12:
                    return -1.0
                L[a, a] = math.sqrt(s)
            else:
                L[a, c] = s / L[c, c]
    y = np.empty(K)
    for a in range(K):
        s = r[a] * d[a]
        for k in range(a):
            s -= L[a, k] * y[k]
        y[a] = s / L[a, a]
    for a in range(K - 1, -1, -1):
        s = y[a]
        for k in range(a + 1, K):
            s -= L[k, a] * coef[k]
        coef[a] = s / L[a, a]
    for a in range(K):
        coef[a] *= d[a]
    loss = 0.0
    for i in range(n):
        v = -b[i]
        for a in range(K):
            v += coef[a] * A[i, a]
        loss += v * v
    return loss
