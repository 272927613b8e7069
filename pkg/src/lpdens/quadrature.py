"""Adaptive Gauss-Legendre cubature over a cube intersected with a domain.

Two cell rules are available:

* a tensor-product rule over axis-aligned cells, used for boxes (where the
  domain restricted to the cube is itself a box) and for domains known only
  through an indicator (the indicator masks the nodes);
* an iterated rule for planar domains that expose vertical slices: the outer
  variable is integrated by Gauss-Legendre on a cell, and at every outer node
  the inner variable is integrated exactly over the slice intervals.  This
  treats the curved part of the boundary without any staircase error.

Both refine adaptively, comparing a cell against its bisection, until every
component of the (vector valued) integral meets ``max(rtol*|I|, atol)``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from lpdens.errors import QuadratureFailure

ORDER = 8
_GL_X, _GL_W = np.polynomial.legendre.leggauss(ORDER)


def _as_2d_values(vals, npts):
    vals = np.asarray(vals, dtype=np.float64)
    if vals.ndim == 0:
        vals = np.full(npts, float(vals))
    if vals.ndim == 1:
        vals = vals[:, None]
    if vals.shape[0] != npts:
        raise ValueError("integrand must return one value (or row) per point")
    return vals


def gauss_legendre(a: float, b: float, order: int = ORDER):
    """Nodes and weights of the Gauss-Legendre rule on ``[a, b]``."""
    if order == ORDER:
        x, w = _GL_X, _GL_W
    else:
        x, w = np.polynomial.legendre.leggauss(order)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


# --------------------------------------------------------------------------
# tensor-product cells
# --------------------------------------------------------------------------

def _tensor_rule(lo, hi):
    d = len(lo)
    xs, ws = zip(*(gauss_legendre(lo[j], hi[j]) for j in range(d)))
    pts = np.array(list(itertools.product(*xs)))
    wts = np.prod(np.array(list(itertools.product(*ws))), axis=1)
    return pts, wts


def _tensor_estimate(g, mask_fn, lo, hi):
    pts, wts = _tensor_rule(lo, hi)
    vals = _as_2d_values(g(pts), len(pts))
    if mask_fn is not None:
        wts = wts * mask_fn(pts)
    return wts @ vals


def _bisect_box(lo, hi):
    mid = 0.5 * (lo + hi)
    d = len(lo)
    for corner in itertools.product((0, 1), repeat=d):
        c = np.array(corner, dtype=bool)
        yield np.where(c, mid, lo), np.where(c, hi, mid)


@dataclass
class _Cell:
    lo: np.ndarray
    hi: np.ndarray
    depth: int
    value: np.ndarray
    error: np.ndarray
    panels: int = 1
    children: list = field(default_factory=list)
    refine_inner: bool = False


def _refine_loop(cells, make_children, rtol, atol, max_depth):
    # cells carry their refined value and an error estimate of that value
    while True:
        total = np.sum([c.value for c in cells], axis=0)
        err = np.sum([c.error for c in cells], axis=0)
        tol = np.maximum(rtol * np.abs(total), atol)
        ratio = err / tol
        if np.all(ratio <= 1.0):
            return total, err
        scores = np.array([np.max(c.error / tol) for c in cells])
        cut = scores.max() / 8.0
        nxt = []
        for c, s in zip(cells, scores):
            if s >= cut and s > 0:
                if c.depth >= max_depth:
                    raise QuadratureFailure(
                        f"subdivision depth {max_depth} reached with error "
                        f"{float(np.max(err)):.3g} above tolerance {float(np.min(tol)):.3g}")
                nxt.extend(make_children(c))
            else:
                nxt.append(c)
        cells = nxt


def integrate_box(g, lo, hi, mask_fn=None, rtol=1e-8, atol=1e-12, max_depth=14):
    """Integrate ``g`` over the box ``[lo, hi]``, optionally masked by an indicator."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    if np.any(hi <= lo):
        probe = _as_2d_values(g(np.atleast_2d(0.5 * (lo + hi))), 1)
        return np.zeros(probe.shape[1])

    def make(lo_, hi_, depth):
        coarse = _tensor_estimate(g, mask_fn, lo_, hi_)
        kids = [_tensor_estimate(g, mask_fn, a, b) for a, b in _bisect_box(lo_, hi_)]
        fine = np.sum(kids, axis=0)
        return _Cell(lo_, hi_, depth, fine, np.abs(fine - coarse))

    def children(c):
        return [make(a, b, c.depth + 1) for a, b in _bisect_box(c.lo, c.hi)]

    root = make(lo, hi, 1)
    total, _ = _refine_loop([root], children, rtol, atol, max_depth)
    return total


# --------------------------------------------------------------------------
# iterated rule for planar domains with vertical slices
# --------------------------------------------------------------------------

def _slice_estimate(g, slicer, x0, x1, ylo, yhi, panels):
    xs, wx = gauss_legendre(x0, x1)
    lo, hi = slicer(xs)
    lo = np.clip(lo, ylo, yhi)
    hi = np.clip(hi, ylo, yhi)
    length = np.maximum(hi - lo, 0.0)
    # composite inner rule: `panels` equal pieces of every interval
    t = (np.arange(panels)[:, None] + 0.5 * (_GL_X[None, :] + 1.0)) / panels
    t = t.ravel()
    wt = np.tile(_GL_W, panels) * 0.5 / panels
    Y = lo[:, :, None] + length[:, :, None] * t[None, None, :]
    W = wx[:, None, None] * length[:, :, None] * wt[None, None, :]
    X = np.broadcast_to(xs[:, None, None], Y.shape)
    keep = W.ravel() != 0.0
    pts = np.column_stack([X.ravel()[keep], Y.ravel()[keep]])
    if pts.shape[0] == 0:
        probe = _as_2d_values(g(np.array([[0.5 * (x0 + x1), 0.5 * (ylo + yhi)]])), 1)
        return np.zeros(probe.shape[1])
    vals = _as_2d_values(g(pts), pts.shape[0])
    return W.ravel()[keep] @ vals


def integrate_slices(g, slicer, breaks, x_range, y_range, rtol=1e-8, atol=1e-12, max_depth=14):
    """Integrate ``g`` over ``{(x, y): x in x_range, y in slicer(x) and y in y_range}``.

    ``slicer(xs)`` returns arrays ``(lo, hi)`` of shape ``(len(xs), K)`` with
    the (possibly empty, ``hi <= lo``) intervals of the slice at each ``x``.
    ``breaks`` are x positions where the slice endpoints are not smooth.
    """
    xa, xb = map(float, x_range)
    ylo, yhi = map(float, y_range)
    probe = _as_2d_values(g(np.array([[0.5 * (xa + xb), 0.5 * (ylo + yhi)]])), 1)
    if xb <= xa or yhi <= ylo:
        return np.zeros(probe.shape[1])
    pts = np.unique(np.concatenate([[xa, xb], [b for b in breaks if xa < b < xb]]))

    def est(x0, x1, panels):
        return _slice_estimate(g, slicer, x0, x1, ylo, yhi, panels)

    def make(x0, x1, depth, panels):
        coarse = est(x0, x1, panels)
        xm = 0.5 * (x0 + x1)
        fine_x = est(x0, xm, panels) + est(xm, x1, panels)
        fine_y = est(x0, x1, 2 * panels)
        ex = np.abs(fine_x - coarse)
        ey = np.abs(fine_y - coarse)
        cell = _Cell(np.array([x0]), np.array([x1]), depth, fine_x, ex + ey, panels)
        cell.refine_inner = bool(np.max(ey) > np.max(ex))
        return cell

    def children(c):
        x0, x1 = float(c.lo[0]), float(c.hi[0])
        if c.refine_inner:
            return [make(x0, x1, c.depth + 1, 2 * c.panels)]
        xm = 0.5 * (x0 + x1)
        return [make(x0, xm, c.depth + 1, c.panels), make(xm, x1, c.depth + 1, c.panels)]

    cells = [make(a, b, 1, 1) for a, b in zip(pts[:-1], pts[1:]) if b > a]
    total, _ = _refine_loop(cells, children, rtol, atol, max_depth)
    return total
