"""Pointwise local polynomial estimate, its variance proxy and population oracles."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from lpdens import _kernels, polybasis
from lpdens.domain import EstimationContext, integrate_weighted
from lpdens.gram import Gamma, GramSystem


@dataclass(frozen=True, eq=False)
class Sample:
    points: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.points, dtype=np.float64)
        if P.ndim == 1:
            P = P[:, None]
        if P.ndim != 2 or P.shape[0] < 1:
            raise ValueError("a sample needs at least one point")
        if not np.all(np.isfinite(P)):
            raise ValueError("sample contains non-finite values")
        P.setflags(write=False)
        object.__setattr__(self, "points", P)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class PointEstimate:
    gamma: Gamma
    f_hat: float
    v_hat: float
    n_in_window: int


def _as_sample(sample) -> Sample:
    return sample if isinstance(sample, Sample) else Sample(sample)


def kernel_terms(ctx: EstimationContext, sys: GramSystem, sample, inside=None) -> np.ndarray:
    """``k_i = Phi(0)^T B^-1 Phi(X_i - t) w_h(X_i - t)`` for every observation.

    ``inside`` may pass precomputed domain membership of the observations.
    """
    sample = _as_sample(sample)
    if sample.d != ctx.d:
        raise ValueError(f"sample dimension {sample.d} does not match domain dimension {ctx.d}")
    U = sample.points - ctx.t
    if inside is None:
        inside = ctx.domain.contains_many(sample.points)
    return _kernels.kernel_terms(U, inside, sys.h, sys.basis.exps, sys.weight)


def estimate_at(ctx: EstimationContext, sys: GramSystem, sample, inside=None) -> PointEstimate:
    """Local polynomial estimate ``f_hat`` and variance proxy ``v_hat`` at ``ctx.t``."""
    sample = _as_sample(sample)
    if inside is None:
        inside = ctx.domain.contains_many(sample.points)
    k = kernel_terms(ctx, sys, sample, inside)
    n = sample.n
    in_window = inside & (np.max(np.abs(sample.points - ctx.t), axis=1) <= sys.h)
    nwin = int(np.count_nonzero(in_window))
    if nwin == 0:
        return PointEstimate(sys.gamma, 0.0, 0.0, 0)
    f_hat = _kernels.compensated_sum(k) / n
    v_hat = _kernels.compensated_sum(k * k) / (n * n)
    return PointEstimate(sys.gamma, f_hat, v_hat, nwin)


def variance_bound_star(sys: GramSystem, f_sup: float, n: int) -> float:
    """Analytic variance bound ``(W sqrt(D)/lambda)^2 * f_sup / (n h^d W)``."""
    if f_sup < 0:
        raise ValueError("f_sup must be nonnegative")
    d = sys.basis.d
    W = sys.W_h
    return (W * np.sqrt(sys.D) / sys.lam) ** 2 * f_sup / (n * sys.h ** d * W)


ORACLE_RTOL = 1e-12


def _oracle_quad(ctx, quad):
    # the weight combination cancels several digits, so integrate tighter than usual
    quad = dict(quad)
    quad.setdefault("rtol", ctx.domain.quad_rtol or ORACLE_RTOL)
    return quad


def population_mean(ctx: EstimationContext, sys: GramSystem, f: Callable, **quad) -> float:
    """Exact expectation of ``f_hat`` when the data have density ``f`` (by quadrature).

    ``f`` takes an ``(N, d)`` array of points in the original coordinates.
    The projection coefficients are integrated as a vector and then combined,
    which is better conditioned than integrating the kernel directly.
    """
    h = sys.h

    def g(U):
        return polybasis.eval_phi(sys.basis, U, h) * np.asarray(f(U + ctx.t), dtype=np.float64)[:, None]

    moments = np.atleast_1d(integrate_weighted(ctx, h, g, **_oracle_quad(ctx, quad)))
    return float(sys.weight @ moments)


def population_variance_upper(ctx: EstimationContext, sys: GramSystem, f: Callable, n: int,
                              **quad) -> float:
    """``v = E[(K(X - t) w_h(X - t))^2] / n`` by quadrature."""
    h = sys.h
    scale = h ** (-ctx.d)

    def g(U):
        K = polybasis.eval_phi(sys.basis, U, h) @ sys.weight
        return K * K * scale * np.asarray(f(U + ctx.t), dtype=np.float64)

    return float(integrate_weighted(ctx, h, g, **_oracle_quad(ctx, quad))) / n


__all__ = ["PointEstimate", "Sample", "estimate_at", "kernel_terms", "population_mean",
           "population_variance_upper", "variance_bound_star"]
