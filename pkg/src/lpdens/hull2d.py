"""Estimation on an unknown convex support in the plane.

The sample is split by index prefix.  The convex hull of the first part
estimates the support; the second part gives the retained proportion
``p_hat`` and, restricted to the hull, a density estimate ``g_hat`` on the
hull.  The composed estimate is ``p_hat * g_hat``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from lpdens.domain import ConvexPolygon2D, EstimationContext
from lpdens.errors import DegenerateHull, EmptyGrid
from lpdens.selection import SelectionConfig, select

log = logging.getLogger(__name__)


def _cross(o, a, b):
    """Sign-exact orientation of ``(o, a, b)``: positive for a left turn."""
    ax, ay, bx, by = a[0] - o[0], a[1] - o[1], b[0] - o[0], b[1] - o[1]
    det = ax * by - ay * bx
    bound = 1e-14 * (abs(ax * by) + abs(ay * bx))
    if abs(det) > bound and not (ax == 0 and ay == 0):
        return det
    # near-collinear: redo in exact rational arithmetic
    o, a, b = ([Fraction(float(v)) for v in p] for p in (o, a, b))
    return float((a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]))


def hull_vertices(points) -> np.ndarray:
    """Counter-clockwise hull vertices by Andrew's monotone chain, collinear points dropped.

    Raises
    ------
    DegenerateHull
        Fewer than three points, or all points collinear.
    """
    P = np.asarray(points, dtype=np.float64)
    if P.ndim != 2 or P.shape[1] != 2:
        raise ValueError("points must have shape (n, 2)")
    if not np.all(np.isfinite(P)):
        raise ValueError("points must be finite")
    P = np.unique(P, axis=0)  # lexicographic by (x, y)
    if len(P) < 3:
        raise DegenerateHull(f"need three distinct points, got {len(P)}")
    pts = [tuple(p) for p in P]
    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise DegenerateHull("all points are collinear")
    return np.array(hull)


def convex_hull_2d(points) -> ConvexPolygon2D:
    """Convex hull of a planar point set as a :class:`ConvexPolygon2D`."""
    return ConvexPolygon2D(hull_vertices(points))


@dataclass(frozen=True)
class SplitPlan:
    """Index-prefix split: the first ``first_part_size`` points build the hull."""

    n: int
    alpha: float
    first_part_size: int
    second_part_size: int

    @classmethod
    def make(cls, n: int, alpha: float = 0.5) -> "SplitPlan":
        if not 0 < alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        second = alpha * n
        rounded = int(round(second))
        if not math.isclose(second, rounded, rel_tol=0, abs_tol=1e-9):
            log.warning("alpha * n = %.6g is not an integer; using %d points for estimation", second, rounded)
        if rounded < 1 or rounded >= n:
            raise ValueError(f"split of n={n} with alpha={alpha} leaves an empty part")
        return cls(n, alpha, n - rounded, rounded)

    def parts(self, X):
        return X[:self.first_part_size], X[self.first_part_size:]


@dataclass
class HullPointEstimate:
    t: tuple
    inside_hull: bool
    p_hat: float
    g_hat: float
    f_hat: float
    report: Optional[object] = field(default=None, repr=False)


@dataclass
class HullEstimate:
    split: SplitPlan
    hull: ConvexPolygon2D
    p_hat: float
    n_retained: int
    points: list

    def rows(self):
        for e in self.points:
            yield e.t[0], e.t[1], int(e.inside_hull), self.p_hat, e.f_hat


def retention(hull: ConvexPolygon2D, X) -> tuple[float, np.ndarray]:
    """Proportion of ``X`` inside ``hull`` and the membership mask."""
    mask = hull.contains_many(X)
    return float(mask.mean()) if len(mask) else 0.0, mask


def estimate_unknown_domain(sample, alpha: float = 0.5, t_list=((0.5, 0.5),),
                            cfg: SelectionConfig = SelectionConfig(),
                            clip_nonneg: bool = False) -> HullEstimate:
    """Composed estimate ``p_hat * g_hat(t)`` at each ``t``, zero outside the hull."""
    X = np.asarray(sample, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != 2:
        raise ValueError("sample must have shape (n, 2)")
    split = SplitPlan.make(len(X), alpha)
    first, second = split.parts(X)
    hull = convex_hull_2d(first)
    p_hat, mask = retention(hull, second)
    kept = second[mask]
    out = []
    for t in np.atleast_2d(np.asarray(t_list, dtype=np.float64)):
        tt = (float(t[0]), float(t[1]))
        if not hull.contains(t):
            out.append(HullPointEstimate(tt, False, p_hat, 0.0, 0.0))
            continue
        if len(kept) < 2:
            raise EmptyGrid("fewer than two retained points inside the hull")
        ctx = EstimationContext(hull, t, cfg.rho)
        rep = select(ctx, kept, cfg)
        g = rep.f_hat_adaptive
        if clip_nonneg:
            g = max(g, 0.0)
        out.append(HullPointEstimate(tt, True, p_hat, g, p_hat * g, rep))
    return HullEstimate(split, hull, p_hat, int(mask.sum()), out)


def trapezoid_l1(xs, ys, values, reference=None) -> float:
    """Trapezoid-rule L1 norm of ``values - reference`` on the grid ``xs x ys``.

    ``values`` has shape ``(len(xs), len(ys))``; ``reference`` is an array of
    the same shape, a callable on ``(N, 2)`` points, or ``None`` (zero).
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    V = np.asarray(values, dtype=np.float64)
    if V.shape != (len(xs), len(ys)):
        raise ValueError("values must have shape (len(xs), len(ys))")
    if reference is not None:
        if callable(reference):
            gx, gy = np.meshgrid(xs, ys, indexing="ij")
            ref = np.asarray(reference(np.column_stack([gx.ravel(), gy.ravel()])), dtype=np.float64)
            V = V - ref.reshape(V.shape)
        else:
            V = V - np.asarray(reference, dtype=np.float64)
    return float(np.trapezoid(np.trapezoid(np.abs(V), ys, axis=1), xs))


__all__ = ["HullEstimate", "HullPointEstimate", "SplitPlan", "convex_hull_2d", "estimate_unknown_domain",
           "hull_vertices", "retention", "trapezoid_l1"]
