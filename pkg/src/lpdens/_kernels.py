"""Hot numeric kernels, each with a numba and a pure-numpy implementation.

The numba versions are used by default.  Setting ``LPDENS_DISABLE_NUMBA=1``
in the environment (or running without numba installed) selects the numpy
versions instead.  Both implementations are importable side by side through
:data:`numba_impl` and :data:`numpy_impl` so they can be cross-checked.
"""
from __future__ import annotations

import math
import os
from types import SimpleNamespace

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_FLAG = os.environ.get("LPDENS_DISABLE_NUMBA", "").strip().lower()
USE_NUMBA = numba is not None and _FLAG not in ("1", "true", "yes", "on")


# --------------------------------------------------------------------------
# pure numpy path
# --------------------------------------------------------------------------

def _np_power_table(Z, max_deg):
    n, d = Z.shape
    P = np.empty((max_deg + 1, n, d))
    P[0] = 1.0
    for p in range(1, max_deg + 1):
        P[p] = P[p - 1] * Z
    return P


def _np_monomials(Z, exps):
    Z = np.asarray(Z, dtype=np.float64)
    n, d = Z.shape
    D = exps.shape[0]
    if D == 0:
        return np.empty((n, 0))
    P = _np_power_table(Z, int(exps.max()) if exps.size else 0)
    out = np.ones((n, D))
    for j in range(d):
        out *= P[exps[:, j], :, j].T
    return out


def _np_compensated_sum(x):
    return math.fsum(np.asarray(x, dtype=np.float64).ravel())


def _np_kernel_terms(U, inside, h, exps, weight):
    U = np.asarray(U, dtype=np.float64)
    n, d = U.shape
    mask = inside & (np.max(np.abs(U), axis=1) <= h)
    out = np.zeros(n)
    if mask.any():
        phi = _np_monomials(U[mask] / h, exps)
        out[mask] = (phi @ weight) * h ** (-d)
    return out


def _np_window_moments(U, inside, hs, exps):
    U = np.asarray(U, dtype=np.float64)
    sup = np.max(np.abs(U), axis=1)
    out = np.zeros((len(hs), exps.shape[0]))
    for a, h in enumerate(hs):
        mask = inside & (sup <= h)
        if mask.any():
            out[a] = _np_monomials(U[mask] / h, exps).sum(axis=0)
    return out


def _np_jacobi_eigenvalues(A, max_sweeps):
    A = np.array(A, dtype=np.float64, copy=True)
    n = A.shape[0]
    eps = np.finfo(np.float64).eps
    for sweep in range(1, max_sweeps + 1):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0 or abs(apq) <= eps * math.sqrt(abs(A[p, p] * A[q, q])):
                    A[p, q] = A[q, p] = 0.0
                    continue
                rotated = True
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                tau = s / (1.0 + c)
                app = A[p, p] - t * apq
                aqq = A[q, q] + t * apq
                colp = A[:, p].copy()
                colq = A[:, q].copy()
                newp = colp - s * (colq + tau * colp)
                newq = colq + s * (colp - tau * colq)
                A[:, p] = newp
                A[p, :] = newp
                A[:, q] = newq
                A[q, :] = newq
                A[p, p] = app
                A[q, q] = aqq
                A[p, q] = A[q, p] = 0.0
        if not rotated:
            return np.diag(A).copy(), sweep
    return np.diag(A).copy(), -1


numpy_impl = SimpleNamespace(
    monomials=_np_monomials,
    compensated_sum=_np_compensated_sum,
    kernel_terms=_np_kernel_terms,
    window_moments=_np_window_moments,
    jacobi_eigenvalues=_np_jacobi_eigenvalues,
)


# --------------------------------------------------------------------------
# numba path
# --------------------------------------------------------------------------

if numba is not None:
    njit = numba.njit(cache=True, nogil=True)

    @njit
    def _nb_monomials(Z, exps):
        n, d = Z.shape
        D = exps.shape[0]
        out = np.ones((n, D))
        maxdeg = 0
        for j in range(D):
            for l in range(d):
                if exps[j, l] > maxdeg:
                    maxdeg = exps[j, l]
        pw = np.empty((maxdeg + 1, d))
        for i in range(n):
            for l in range(d):
                pw[0, l] = 1.0
                for p in range(1, maxdeg + 1):
                    pw[p, l] = pw[p - 1, l] * Z[i, l]
            for j in range(D):
                v = 1.0
                for l in range(d):
                    v *= pw[exps[j, l], l]
                out[i, j] = v
        return out

    @njit
    def _nb_compensated_sum(x):
        # Neumaier's variant of Kahan summation
        s = 0.0
        c = 0.0
        for v in x.ravel():
            t = s + v
            if abs(s) >= abs(v):
                c += (s - t) + v
            else:
                c += (v - t) + s
            s = t
        return s + c

    @njit
    def _nb_kernel_terms(U, inside, h, exps, weight):
        n, d = U.shape
        D = exps.shape[0]
        maxdeg = 0
        for j in range(D):
            for l in range(d):
                if exps[j, l] > maxdeg:
                    maxdeg = exps[j, l]
        pw = np.empty((maxdeg + 1, d))
        scale = h ** (-d)
        out = np.zeros(n)
        for i in range(n):
            if not inside[i]:
                continue
            ok = True
            for l in range(d):
                if abs(U[i, l]) > h:
                    ok = False
                    break
            if not ok:
                continue
            for l in range(d):
                z = U[i, l] / h
                pw[0, l] = 1.0
                for p in range(1, maxdeg + 1):
                    pw[p, l] = pw[p - 1, l] * z
            acc = 0.0
            for j in range(D):
                v = weight[j]
                for l in range(d):
                    v *= pw[exps[j, l], l]
                acc += v
            out[i] = acc * scale
        return out

    @njit
    def _nb_window_moments(U, inside, hs, exps):
        n, d = U.shape
        D = exps.shape[0]
        H = hs.shape[0]
        maxdeg = 0
        for j in range(D):
            for l in range(d):
                if exps[j, l] > maxdeg:
                    maxdeg = exps[j, l]
        pw = np.empty((maxdeg + 1, d))
        out = np.zeros((H, D))
        for i in range(n):
            if not inside[i]:
                continue
            sup = 0.0
            for l in range(d):
                a = abs(U[i, l])
                if a > sup:
                    sup = a
            for k in range(H):
                h = hs[k]
                if sup > h:
                    continue
                for l in range(d):
                    z = U[i, l] / h
                    pw[0, l] = 1.0
                    for p in range(1, maxdeg + 1):
                        pw[p, l] = pw[p - 1, l] * z
                for j in range(D):
                    v = 1.0
                    for l in range(d):
                        v *= pw[exps[j, l], l]
                    out[k, j] += v
        return out

    @njit
    def _nb_jacobi_eigenvalues(A0, max_sweeps):
        A = A0.copy()
        n = A.shape[0]
        eps = 2.220446049250313e-16
        for sweep in range(1, max_sweeps + 1):
            rotated = False
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = A[p, q]
                    if apq == 0.0 or abs(apq) <= eps * math.sqrt(abs(A[p, p] * A[q, q])):
                        A[p, q] = 0.0
                        A[q, p] = 0.0
                        continue
                    rotated = True
                    theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                    if abs(theta) > 1e150:
                        t = 0.5 / theta
                    else:
                        t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                    c = 1.0 / math.sqrt(t * t + 1.0)
                    s = t * c
                    tau = s / (1.0 + c)
                    app = A[p, p] - t * apq
                    aqq = A[q, q] + t * apq
                    for r in range(n):
                        arp = A[r, p]
                        arq = A[r, q]
                        A[r, p] = arp - s * (arq + tau * arp)
                        A[r, q] = arq + s * (arp - tau * arq)
                    for r in range(n):
                        A[p, r] = A[r, p]
                        A[q, r] = A[r, q]
                    A[p, p] = app
                    A[q, q] = aqq
                    A[p, q] = 0.0
                    A[q, p] = 0.0
            if not rotated:
                return np.diag(A).copy(), sweep
        return np.diag(A).copy(), -1

    numba_impl = SimpleNamespace(
        monomials=_nb_monomials,
        compensated_sum=_nb_compensated_sum,
        kernel_terms=_nb_kernel_terms,
        window_moments=_nb_window_moments,
        jacobi_eigenvalues=_nb_jacobi_eigenvalues,
    )
else:  # pragma: no cover
    numba_impl = None

active = numba_impl if USE_NUMBA else numpy_impl
BACKEND = "numba" if USE_NUMBA else "numpy"


def _prep(U, inside, exps):
    U = np.ascontiguousarray(U, dtype=np.float64)
    inside = np.ascontiguousarray(inside, dtype=np.bool_)
    exps = np.ascontiguousarray(exps, dtype=np.int64)
    return U, inside, exps


def monomials(Z, exps):
    """Evaluate every monomial ``z**exps[j]`` at every row of ``Z``."""
    Z = np.ascontiguousarray(np.atleast_2d(Z), dtype=np.float64)
    return active.monomials(Z, np.ascontiguousarray(exps, dtype=np.int64))


def compensated_sum(x):
    return float(active.compensated_sum(np.ascontiguousarray(x, dtype=np.float64)))


def kernel_terms(U, inside, h, exps, weight):
    """Per-observation terms ``w_h(u_i) * weight . Phi(u_i)`` (zero outside the window)."""
    U, inside, exps = _prep(U, inside, exps)
    return active.kernel_terms(U, inside, float(h), exps,
                               np.ascontiguousarray(weight, dtype=np.float64))


def window_moments(U, inside, hs, exps):
    """Sums of rescaled monomials over the observations inside each window ``hs[k]``."""
    U, inside, exps = _prep(U, inside, exps)
    return active.window_moments(U, inside, np.ascontiguousarray(hs, dtype=np.float64), exps)


def jacobi_eigenvalues(A, max_sweeps=100):
    """Cyclic Jacobi eigenvalues of a symmetric matrix; sweeps is -1 on failure."""
    return active.jacobi_eigenvalues(np.ascontiguousarray(A, dtype=np.float64), int(max_sweeps))
