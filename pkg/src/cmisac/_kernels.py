"""Hot inner loops, compiled with numba when available.

Set ``CMISAC_DISABLE_NUMBA=1`` to force the pure numpy/Python path. Both
variants of every kernel stay importable (``*_numba`` / ``*_numpy``) so tests
and the benchmark can compare them directly; the unsuffixed name is the one
selected at import time.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def _env_disabled() -> bool:
    return os.environ.get("CMISAC_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")


USE_NUMBA = HAVE_NUMBA and not _env_disabled()


def _jit(fn):
    if not HAVE_NUMBA:
        return fn
    return numba.njit(cache=True, nogil=True)(fn)


# ---------------------------------------------------------------------------
# phase-candidate scan: psl(theta) = max_side |P + e^{j theta} Q + e^{-j theta} R| / A0(theta)


def candidate_psl_numpy(P, Q, R, side, origin, thetas):
    rot = np.exp(1j * np.asarray(thetas))[:, None]
    Ps, Qs, Rs = P[side][None, :], Q[side][None, :], R[side][None, :]
    vals = np.abs(Ps + rot * Qs + np.conj(rot) * Rs)
    peak = vals.max(axis=1)
    a0 = (P[origin] + rot[:, 0] * Q[origin] + np.conj(rot[:, 0]) * R[origin]).real
    return peak / a0


def _candidate_psl_loop(P, Q, R, side, origin, thetas):
    nt = thetas.shape[0]
    out = np.empty(nt)
    for t in range(nt):
        c = np.cos(thetas[t])
        s = np.sin(thetas[t])
        best = 0.0
        for k in range(side.shape[0]):
            i = side[k]
            p = P[i]
            q = Q[i]
            r = R[i]
            # e^{j th} q + e^{-j th} r without allocating complex rotors
            re = p.real + c * (q.real + r.real) - s * (q.imag - r.imag)
            im = p.imag + c * (q.imag + r.imag) + s * (q.real - r.real)
            m = re * re + im * im
            if m > best:
                best = m
        p = P[origin]
        q = Q[origin]
        r = R[origin]
        a0 = p.real + c * (q.real + r.real) - s * (q.imag - r.imag)
        out[t] = np.sqrt(best) / a0
    return out


candidate_psl_numba = _jit(_candidate_psl_loop)


# smooth surrogate: log of the p-norm of the normalized sidelobes


def candidate_logpnorm_numpy(P, Q, R, side, origin, thetas, p):
    rot = np.exp(1j * np.asarray(thetas))[:, None]
    vals = np.abs(P[side][None, :] + rot * Q[side][None, :] + np.conj(rot) * R[side][None, :])
    a0 = (P[origin] + rot[:, 0] * Q[origin] + np.conj(rot[:, 0]) * R[origin]).real
    peak = vals.max(axis=1)
    ratio = vals / peak[:, None]
    return np.log(np.sum(ratio**p, axis=1)) / p + np.log(peak) - np.log(a0)


def _candidate_logpnorm_loop(P, Q, R, side, origin, thetas, p):
    nt = thetas.shape[0]
    n = side.shape[0]
    out = np.empty(nt)
    mag2 = np.empty(n)
    h = 0.5 * p
    # terms below 1e-17 of the peak term cannot change the sum in double precision
    floor = np.exp(-39.0 / h)
    for t in range(nt):
        c = np.cos(thetas[t])
        s = np.sin(thetas[t])
        best = 0.0
        for k in range(n):
            i = side[k]
            re = P[i].real + c * (Q[i].real + R[i].real) - s * (Q[i].imag - R[i].imag)
            im = P[i].imag + c * (Q[i].imag + R[i].imag) + s * (Q[i].real - R[i].real)
            m = re * re + im * im
            mag2[k] = m
            if m > best:
                best = m
        acc = 0.0
        cut = best * floor
        inv = 1.0 / best
        for k in range(n):
            if mag2[k] > cut:
                acc += (mag2[k] * inv) ** h
        a0 = P[origin].real + c * (Q[origin].real + R[origin].real) - s * (Q[origin].imag - R[origin].imag)
        out[t] = np.log(acc) / p + 0.5 * np.log(best) - np.log(a0)
    return out


candidate_logpnorm_numba = _jit(_candidate_logpnorm_loop)


# ---------------------------------------------------------------------------
# Hungarian algorithm (shortest augmenting path with potentials), minimization.
# Returns (row -> column assignment, row potentials u, column potentials v).


def _hungarian_min_loop(cost):
    n = cost.shape[0]
    inf = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)  # p[j]: row matched to column j (1-based, 0 = none)
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, inf)
        used = np.zeros(n + 1, dtype=np.bool_)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    assign = np.empty(n, dtype=np.int64)
    for j in range(1, n + 1):
        assign[p[j] - 1] = j - 1
    return assign, u[1:].copy(), v[1:].copy()


hungarian_min_numpy = _hungarian_min_loop
hungarian_min_numba = _jit(_hungarian_min_loop)


# ---------------------------------------------------------------------------
# exhaustive per-subpulse PSK search used by brute-force detection oracles


def best_psk_cells_numpy(Y, rot):
    """For each cell, ``max_k Re{conj(rot_k) Y}`` and its argmax (lowest index)."""
    proj = np.real(np.conj(rot)[None, None, :] * Y[:, :, None])
    return proj.max(axis=2), proj.argmax(axis=2)


def _best_psk_cells_loop(Y, rot):
    L, M = Y.shape
    K = rot.shape[0]
    best = np.empty((L, M))
    arg = np.empty((L, M), dtype=np.int64)
    for l in range(L):
        for m in range(M):
            y = Y[l, m]
            b = -np.inf
            a = 0
            for k in range(K):
                val = rot[k].real * y.real + rot[k].imag * y.imag
                if val > b:
                    b = val
                    a = k
            best[l, m] = b
            arg[l, m] = a
    return best, arg


best_psk_cells_numba = _jit(_best_psk_cells_loop)


if USE_NUMBA:
    candidate_psl = candidate_psl_numba
    candidate_logpnorm = candidate_logpnorm_numba
    hungarian_min = hungarian_min_numba
    best_psk_cells = best_psk_cells_numba
else:
    candidate_psl = candidate_psl_numpy
    candidate_logpnorm = candidate_logpnorm_numpy
    hungarian_min = hungarian_min_numpy
    best_psk_cells = best_psk_cells_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"
