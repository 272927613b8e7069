"""Gram system of the rescaled monomials under the local weight."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from lpdens import _kernels, polybasis
from lpdens.domain import EstimationContext, monomial_moments
from lpdens.errors import NonConvergence, SingularGram

log = logging.getLogger(__name__)

SINGULAR_RTOL = 1e-12


@dataclass(frozen=True)
class Gamma:
    m: int
    h: float

    def __post_init__(self):
        if self.m < 0 or self.m > polybasis.MAX_ORDER:
            raise ValueError(f"degree {self.m} out of range")
        if not self.h > 0:
            raise ValueError("bandwidth must be positive")


@dataclass(frozen=True, eq=False)
class GramSystem:
    gamma: Gamma
    basis: polybasis.Basis
    B: np.ndarray
    chol: np.ndarray
    lam: float
    weight: np.ndarray
    W_h: float

    @property
    def D(self) -> int:
        return len(self.basis)

    @property
    def h(self) -> float:
        return self.gamma.h

    @property
    def m(self) -> int:
        return self.gamma.m


def smallest_eigenvalue(B, max_sweeps: int = 100) -> float:
    """Smallest eigenvalue of a symmetric matrix by cyclic Jacobi rotations."""
    B = np.asarray(B, dtype=np.float64)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise ValueError("need a square matrix")
    if B.shape[0] == 1:
        return float(B[0, 0])
    evals, sweeps = _kernels.jacobi_eigenvalues(0.5 * (B + B.T), max_sweeps)
    if sweeps < 0:
        raise NonConvergence(f"Jacobi iteration did not converge in {max_sweeps} sweeps")
    return float(np.min(evals))


def gram_matrix(ctx: EstimationContext, gamma: Gamma, method: str = "auto") -> np.ndarray:
    """``B[i, j] = ∫ phi_i(u/h) phi_j(u/h) w_h(u) du``, assembled from monomial moments."""
    basis = polybasis.enumerate(ctx.d, gamma.m)
    E = basis.exps
    pair = E[:, None, :] + E[None, :, :]
    flat = pair.reshape(-1, ctx.d)
    uniq, inv = np.unique(flat, axis=0, return_inverse=True)
    mom = monomial_moments(ctx, gamma.h, uniq, method=method)
    B = mom[np.asarray(inv).ravel()].reshape(len(E), len(E))
    return 0.5 * (B + B.T)


def build_gram(ctx: EstimationContext, gamma: Gamma, method: str = "auto") -> GramSystem:
    """Assemble ``B``, its Cholesky factor, ``lambda`` and the weight ``B^-1 Phi(0)``.

    Raises
    ------
    SingularGram
        If ``lambda < 1e-12 * max(1, trace(B)/D)`` or the factorisation fails.
    """
    if gamma.h > ctx.h_max * (1 + 1e-12):
        raise ValueError(f"bandwidth {gamma.h} exceeds the largest allowed scale {ctx.h_max}")
    basis = polybasis.enumerate(ctx.d, gamma.m)
    return _factor(gamma, basis, gram_matrix(ctx, gamma, method=method))


def _factor(gamma: Gamma, basis: polybasis.Basis, B: np.ndarray) -> GramSystem:
    D = len(basis)
    B = 0.5 * (B + B.T)
    W = float(B[0, 0])
    if not W > 0:
        raise SingularGram(f"empty neighbourhood at h={gamma.h}")
    lam = smallest_eigenvalue(B)
    if lam < SINGULAR_RTOL * max(1.0, np.trace(B) / D):
        raise SingularGram(f"lambda={lam:.3g} for m={gamma.m}, h={gamma.h:.6g}")
    # equilibrate before factoring; the entries span many orders of magnitude
    s = 1.0 / np.sqrt(np.diag(B))
    try:
        Ls = np.linalg.cholesky(B * s[:, None] * s[None, :])
    except np.linalg.LinAlgError as exc:
        raise SingularGram(f"Cholesky failed for m={gamma.m}, h={gamma.h:.6g}") from exc
    L = Ls / s[:, None]
    e0 = np.zeros(D)
    e0[0] = 1.0
    z = solve_triangular(Ls, s * e0, lower=True)
    w = s * solve_triangular(Ls.T, z, lower=False)
    # one step of iterative refinement
    r = e0 - B @ w
    z = solve_triangular(Ls, s * r, lower=True)
    w = w + s * solve_triangular(Ls.T, z, lower=False)
    for arr in (B, L, w):
        arr.setflags(write=False)
    return GramSystem(gamma=gamma, basis=basis, B=B, chol=L, lam=lam, weight=w, W_h=W)


def kernel_weight_at(sys: GramSystem, u) -> float | np.ndarray:
    """``Phi(0)^T B^-1 Phi(u)``; accepts one offset or an ``(n, d)`` batch."""
    return polybasis.eval_phi(sys.basis, u, sys.h) @ sys.weight


class GramCache:
    """Memoises Gram systems per ``(m, h)`` for one estimation context.

    Gram systems depend on the domain and ``t`` only, never on the sample,
    so replications at a fixed point can share them.
    """

    def __init__(self, ctx: EstimationContext, method: str = "auto"):
        self.ctx = ctx
        self.method = method
        self._store: dict[tuple[int, float], GramSystem | SingularGram] = {}

    def get(self, gamma: Gamma) -> GramSystem:
        key = (gamma.m, gamma.h)
        hit = self._store.get(key)
        if hit is None:
            try:
                hit = build_gram(self.ctx, gamma, self.method)
            except SingularGram as exc:
                hit = exc
            self._store[key] = hit
        if isinstance(hit, SingularGram):
            raise hit
        return hit


__all__ = ["Gamma", "GramCache", "GramSystem", "build_gram", "gram_family", "gram_matrix",
           "kernel_weight_at", "smallest_eigenvalue"]


def gram_family(ctx: EstimationContext, h: float, degrees, method: str = "auto") -> dict:
    """Gram systems for several degrees at one bandwidth, sharing one moment computation.

    Returns ``{m: GramSystem or SingularGram}``; singular entries hold the
    exception instead of raising so callers can record them as missing.
    """
    degrees = sorted(set(int(m) for m in degrees))
    top = polybasis.enumerate(ctx.d, 2 * max(degrees))
    mom = monomial_moments(ctx, h, top.exps, method=method)
    lookup = {tuple(e): v for e, v in zip(top.exps.tolist(), mom)}
    out = {}
    for m in degrees:
        basis = polybasis.enumerate(ctx.d, m)
        E = basis.exps
        pair = (E[:, None, :] + E[None, :, :]).reshape(-1, ctx.d)
        B = np.array([lookup[tuple(p)] for p in pair.tolist()]).reshape(len(E), len(E))
        try:
            out[m] = _factor(Gamma(m, h), basis, B)
        except SingularGram as exc:
            out[m] = exc
    return out
