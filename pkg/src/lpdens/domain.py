"""Supports of the density, the local weight ``w_h`` and integrals against it.

All integrals here are taken with respect to ``w_h(u) = h**-d * 1{|u|_inf <= h}
* 1{t + u in D}``, i.e. over the neighbourhood ``(D - t) ∩ [-h, h]^d`` of the
estimation point ``t``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from lpdens import quadrature
from lpdens.errors import QuadratureFailure

DEFAULT_RTOL = 1e-8
DEFAULT_ATOL = 1e-12
DEFAULT_MAX_DEPTH = 14


def _as_points(X, d):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != d:
        raise ValueError(f"dimension mismatch: domain has d={d}, points have {X.shape[1]}")
    return X


class Domain:
    """Closed subset of R^d with nonempty interior.

    Subclasses implement :meth:`contains_many` and :attr:`bbox`; planar
    domains may also implement :meth:`slices` and :meth:`x_breaks`, which
    enables the boundary-exact quadrature path.
    """

    d: int
    kind: str = "domain"
    quad_rtol: Optional[float] = None

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1 or x.shape[0] != self.d:
            raise ValueError(f"dimension mismatch: domain has d={self.d}, point has shape {x.shape}")
        return bool(self.contains_many(x[None, :])[0])

    def contains_many(self, X) -> np.ndarray:
        raise NotImplementedError

    @property
    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    has_slices = False

    def slices(self, xs):
        raise NotImplementedError

    def x_breaks(self, ylo: float, yhi: float) -> np.ndarray:
        return np.empty(0)

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class AxisBox(Domain):
    lower: np.ndarray
    upper: np.ndarray
    kind = "axis_box"

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=np.float64))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=np.float64))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lower and upper must be vectors of equal length")
        if not np.all(lo < hi):
            raise ValueError("AxisBox needs lower < upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def d(self) -> int:
        return self.lower.shape[0]

    def contains_many(self, X):
        X = _as_points(X, self.d)
        return np.all((X >= self.lower) & (X <= self.upper), axis=1)

    @property
    def bbox(self):
        return self.lower, self.upper

    def to_dict(self):
        return {"kind": self.kind, "lower": self.lower.tolist(), "upper": self.upper.tolist()}


@dataclass(frozen=True, eq=False)
class PolySector(Domain):
    """``{(x, y): 0 <= x <= 1, 0 <= y <= x**k}``; ``k = 1`` is the triangle below the diagonal."""

    k: float
    kind = "poly_sector"
    d = 2
    has_slices = True

    def __post_init__(self):
        if not self.k >= 1:
            raise ValueError("PolySector needs k >= 1")

    def contains_many(self, X):
        X = _as_points(X, 2)
        x, y = X[:, 0], X[:, 1]
        ok = (x >= 0) & (x <= 1) & (y >= 0)
        top = np.where(ok, np.abs(x) ** self.k, -1.0)
        return ok & (y <= top)

    @property
    def bbox(self):
        return np.zeros(2), np.ones(2)

    def slices(self, xs):
        xs = np.asarray(xs, dtype=np.float64)
        ok = (xs >= 0) & (xs <= 1)
        hi = np.where(ok, np.abs(xs) ** self.k, 0.0)
        return np.zeros((len(xs), 1)), hi[:, None]

    def x_breaks(self, ylo, yhi):
        out = [0.0, 1.0]
        for y in (ylo, yhi):
            if 0.0 < y < 1.0:
                out.append(y ** (1.0 / self.k))
        return np.array(out)

    def to_dict(self):
        return {"kind": self.kind, "k": self.k}


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


@dataclass(frozen=True, eq=False)
class ConvexPolygon2D(Domain):
    """Convex polygon given by counter-clockwise vertices, no three collinear."""

    vertices: np.ndarray
    kind = "convex_polygon"
    d = 2
    has_slices = True

    def __post_init__(self):
        V = np.asarray(self.vertices, dtype=np.float64)
        if V.ndim != 2 or V.shape[1] != 2 or V.shape[0] < 3:
            raise ValueError("need at least three 2-D vertices")
        n = V.shape[0]
        for i in range(n):
            if _cross(V[i], V[(i + 1) % n], V[(i + 2) % n]) <= 0:
                raise ValueError("vertices must be counter-clockwise, convex, with no three collinear")
        V.setflags(write=False)
        object.__setattr__(self, "vertices", V)

    @property
    def edges(self):
        V = self.vertices
        return V, np.roll(V, -1, axis=0)

    def contains_many(self, X):
        X = _as_points(X, 2)
        A, B = self.edges
        ex = B[:, 0] - A[:, 0]
        ey = B[:, 1] - A[:, 1]
        cr = ex[None, :] * (X[:, 1:2] - A[None, :, 1]) - ey[None, :] * (X[:, 0:1] - A[None, :, 0])
        scale = np.hypot(ex, ey)[None, :] * 1e-12
        return np.all(cr >= -scale, axis=1)

    @property
    def bbox(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def area(self) -> float:
        A, B = self.edges
        return 0.5 * float(np.sum(A[:, 0] * B[:, 1] - B[:, 0] * A[:, 1]))

    def slices(self, xs):
        xs = np.asarray(xs, dtype=np.float64)
        A, B = self.edges
        x0 = np.minimum(A[:, 0], B[:, 0])
        x1 = np.maximum(A[:, 0], B[:, 0])
        dx = B[:, 0] - A[:, 0]
        safe = np.where(dx == 0, 1.0, dx)
        lam = (xs[:, None] - A[None, :, 0]) / safe[None, :]
        y = A[None, :, 1] + lam * (B[None, :, 1] - A[None, :, 1])
        hit = (xs[:, None] >= x0[None, :]) & (xs[:, None] <= x1[None, :]) & (dx[None, :] != 0)
        lo = np.where(hit, y, np.inf).min(axis=1)
        hi = np.where(hit, y, -np.inf).max(axis=1)
        empty = ~np.isfinite(lo) | ~np.isfinite(hi)
        lo = np.where(empty, 0.0, lo)
        hi = np.where(empty, 0.0, hi)
        return lo[:, None], hi[:, None]

    def x_breaks(self, ylo, yhi):
        A, B = self.edges
        out = list(self.vertices[:, 0])
        for a, b in zip(A, B):
            dy = b[1] - a[1]
            if dy == 0:
                continue
            for y in (ylo, yhi):
                lam = (y - a[1]) / dy
                if 0.0 < lam < 1.0:
                    out.append(a[0] + lam * (b[0] - a[0]))
        return np.array(out)

    def to_dict(self):
        return {"kind": self.kind, "vertices": self.vertices.tolist()}


@dataclass(frozen=True, eq=False)
class Implicit(Domain):
    """Domain known only through a membership test and a bounding box.

    ``indicator`` maps a point of shape ``(d,)`` to bool, or an ``(N, d)``
    batch to a boolean array when ``vectorized`` is true.  Quadrature on
    such domains resolves the boundary by subdivision only, so the default
    tolerance is the looser ``quad_rtol``.
    """

    indicator: Callable
    box: AxisBox
    vectorized: bool = False
    quad_rtol: Optional[float] = 1e-4
    kind = "implicit"

    @property
    def d(self):
        return self.box.d

    def contains_many(self, X):
        X = _as_points(X, self.d)
        if self.vectorized:
            res = np.asarray(self.indicator(X), dtype=bool)
        else:
            res = np.fromiter((bool(self.indicator(x)) for x in X), dtype=bool, count=len(X))
        return res & self.box.contains_many(X)

    @property
    def bbox(self):
        return self.box.bbox

    def to_dict(self):
        raise TypeError("an Implicit domain with a Python indicator cannot be serialized")


@dataclass(frozen=True, eq=False)
class RasterDomain(Domain):
    """Planar domain given by a 0/1 pixel grid over a bounding box.

    ``bits[i, j]`` covers ``[xmin + j dx, xmin + (j+1) dx] x [ymin + i dy,
    ymin + (i+1) dy]``; row 0 is the bottom row (smallest y).  Pixels are
    closed sets, so shared edges belong to the domain if either side does.
    """

    bits: np.ndarray
    xmin: float
    xmax: float
    ymin: float
    ymax: float
    kind = "implicit_grid"
    d = 2
    has_slices = True

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        if bits.ndim != 2 or not bits.any():
            raise ValueError("raster must be a nonempty 2-D 0/1 grid with at least one set pixel")
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise ValueError("raster bounding box is degenerate")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)
        ny, nx = bits.shape
        dy = (self.ymax - self.ymin) / ny
        runs = []
        for j in range(nx):
            col = np.concatenate([[False], bits[:, j], [False]]).astype(np.int8)
            edges = np.flatnonzero(np.diff(col))
            runs.append([(self.ymin + a * dy, self.ymin + b * dy) for a, b in zip(edges[::2], edges[1::2])])
        K = max(1, max(len(r) for r in runs))
        lo = np.zeros((nx, K))
        hi = np.zeros((nx, K))
        for j, r in enumerate(runs):
            for q, (a, b) in enumerate(r):
                lo[j, q], hi[j, q] = a, b
        object.__setattr__(self, "_lo", lo)
        object.__setattr__(self, "_hi", hi)

    @property
    def shape(self):
        return self.bits.shape

    def contains_many(self, X):
        X = _as_points(X, 2)
        ny, nx = self.bits.shape
        fx = (X[:, 0] - self.xmin) / (self.xmax - self.xmin) * nx
        fy = (X[:, 1] - self.ymin) / (self.ymax - self.ymin) * ny
        inbox = (fx >= 0) & (fx <= nx) & (fy >= 0) & (fy <= ny)
        out = np.zeros(len(X), dtype=bool)
        for dj in (0, -1):
            for di in (0, -1):
                j = np.floor(fx).astype(np.int64) + dj
                i = np.floor(fy).astype(np.int64) + di
                # the neighbour only counts when the point sits on the shared edge
                okj = (dj == 0) | (fx == np.floor(fx))
                oki = (di == 0) | (fy == np.floor(fy))
                valid = inbox & okj & oki & (j >= 0) & (j < nx) & (i >= 0) & (i < ny)
                hit = np.zeros(len(X), dtype=bool)
                hit[valid] = self.bits[i[valid], j[valid]]
                out |= hit
        return out

    @property
    def bbox(self):
        return np.array([self.xmin, self.ymin]), np.array([self.xmax, self.ymax])

    def slices(self, xs):
        xs = np.asarray(xs, dtype=np.float64)
        nx = self.bits.shape[1]
        j = np.floor((xs - self.xmin) / (self.xmax - self.xmin) * nx).astype(np.int64)
        ok = (j >= 0) & (j < nx) & (xs >= self.xmin) & (xs <= self.xmax)
        j = np.clip(j, 0, nx - 1)
        lo = np.where(ok[:, None], self._lo[j], 0.0)
        hi = np.where(ok[:, None], self._hi[j], 0.0)
        return lo, hi

    def x_breaks(self, ylo, yhi):
        return np.linspace(self.xmin, self.xmax, self.bits.shape[1] + 1)

    def to_dict(self):
        return {"kind": self.kind, "xmin": self.xmin, "xmax": self.xmax, "ymin": self.ymin,
                "ymax": self.ymax, "bits": self.bits.astype(int).tolist()}


# --------------------------------------------------------------------------
# estimation context
# --------------------------------------------------------------------------

def default_rho(domain: Domain) -> float:
    lo, hi = domain.bbox
    return min(math.exp(-1.0), 0.5 * float(np.min(hi - lo)))


@dataclass(frozen=True, eq=False)
class EstimationContext:
    """A domain, the estimation point ``t`` and the largest bandwidth ``rho``.

    ``h_max`` (default ``rho``) lets fixed-bandwidth studies use scales above
    ``rho``; the selection ladder always starts below ``rho``.
    """

    domain: Domain
    t: np.ndarray
    rho: Optional[float] = None
    h_max: Optional[float] = None
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64).ravel()
        if t.shape[0] != self.domain.d:
            raise ValueError(f"t has dimension {t.shape[0]}, domain has {self.domain.d}")
        t.setflags(write=False)
        object.__setattr__(self, "t", t)
        rho = default_rho(self.domain) if self.rho is None else float(self.rho)
        if not 0.0 < rho <= math.exp(-1.0) + 1e-15:
            raise ValueError(f"rho must lie in (0, 1/e], got {rho}")
        object.__setattr__(self, "rho", rho)
        h_max = rho if self.h_max is None else float(self.h_max)
        if h_max < rho:
            raise ValueError("h_max cannot be smaller than rho")
        object.__setattr__(self, "h_max", h_max)
        if self.check:
            if not self.domain.contains(t):
                raise ValueError(f"estimation point {t.tolist()} is not in the domain")
            if not neighborhood_mass(self, rho) > 0.0:
                raise ValueError("the neighbourhood at scale rho has zero Lebesgue measure")

    @property
    def d(self) -> int:
        return self.domain.d


def _check_h(ctx, h):
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    if h > ctx.h_max * (1 + 1e-12):
        raise ValueError(f"bandwidth {h} exceeds the largest allowed scale {ctx.h_max}")


def weight(ctx: EstimationContext, h: float, u) -> float:
    """``w_h(u)``: ``h**-d`` on the neighbourhood, zero elsewhere."""
    _check_h(ctx, h)
    u = np.asarray(u, dtype=np.float64)
    if np.max(np.abs(u)) > h:
        return 0.0
    return h ** (-ctx.d) if ctx.domain.contains(ctx.t + u) else 0.0


def weight_many(ctx: EstimationContext, h: float, U) -> np.ndarray:
    U = _as_points(U, ctx.d)
    inside = (np.max(np.abs(U), axis=1) <= h) & ctx.domain.contains_many(ctx.t + U)
    return np.where(inside, h ** (-ctx.d), 0.0)


def _sector_at_origin(ctx, h):
    return isinstance(ctx.domain, PolySector) and not np.any(ctx.t) and h <= 1.0


def has_closed_form(ctx: EstimationContext, h: float) -> bool:
    return isinstance(ctx.domain, AxisBox) or _sector_at_origin(ctx, h)


def _box_clip(ctx, h):
    lo, hi = ctx.domain.bbox
    a = np.maximum(-h, lo - ctx.t)
    b = np.minimum(h, hi - ctx.t)
    return a, b


def integrate_over(domain: Domain, g: Callable, lo=None, hi=None, *, rtol: Optional[float] = None,
                   atol: float = DEFAULT_ATOL, max_depth: int = DEFAULT_MAX_DEPTH):
    """Approximate ``∫_{D ∩ [lo, hi]} g(x) dx`` (the whole domain by default).

    ``g`` receives an ``(N, d)`` array of points and returns ``N`` values or
    an ``(N, K)`` array; the result is a float or a ``(K,)`` array.
    """
    if rtol is None:
        rtol = domain.quad_rtol or DEFAULT_RTOL
    blo, bhi = domain.bbox
    a = blo if lo is None else np.maximum(np.asarray(lo, dtype=np.float64), blo)
    b = bhi if hi is None else np.minimum(np.asarray(hi, dtype=np.float64), bhi)
    if isinstance(domain, AxisBox):
        res = quadrature.integrate_box(g, a, b, rtol=rtol, atol=atol, max_depth=max_depth)
    elif domain.has_slices and domain.d == 2:
        breaks = domain.x_breaks(a[1], b[1])
        res = quadrature.integrate_slices(g, domain.slices, breaks, (a[0], b[0]), (a[1], b[1]),
                                          rtol=rtol, atol=atol, max_depth=max_depth)
    else:
        def mask(X):
            return domain.contains_many(X).astype(np.float64)

        res = quadrature.integrate_box(g, a, b, mask_fn=mask, rtol=rtol, atol=atol,
                                       max_depth=max_depth)
    res = np.asarray(res)
    return float(res[0]) if res.shape == (1,) else res


def integrate_weighted(ctx: EstimationContext, h: float, g: Callable, *, rtol: Optional[float] = None,
                       atol: float = DEFAULT_ATOL, max_depth: int = DEFAULT_MAX_DEPTH):
    """Approximate ``∫ g(u) w_h(u) du``.

    ``g`` is called with an ``(N, d)`` array of offsets ``u`` and returns
    ``N`` values, or an ``(N, K)`` array for a vector of integrands (the
    result then has shape ``(K,)``).

    Integration runs in offset coordinates over ``[-h, h]^d`` clipped to the
    bounding box of ``D - t``.  Boxes use a tensor Gauss-Legendre rule,
    planar domains with slices the boundary-exact iterated rule, anything
    else an indicator-masked tensor rule refined by bisection.

    Raises
    ------
    QuadratureFailure
        If the subdivision depth limit is hit before the tolerance is met.
    """
    _check_h(ctx, h)
    if rtol is None:
        rtol = ctx.domain.quad_rtol or DEFAULT_RTOL
    dom = ctx.domain
    scale = h ** (-ctx.d)
    sub_atol = atol / scale
    a, b = _box_clip(ctx, h)
    if isinstance(dom, AxisBox):
        res = quadrature.integrate_box(g, a, b, rtol=rtol, atol=sub_atol, max_depth=max_depth)
    elif dom.has_slices and ctx.d == 2:
        t0, t1 = ctx.t

        def slicer(xs):
            lo, hi = dom.slices(xs + t0)
            return lo - t1, hi - t1

        breaks = dom.x_breaks(a[1] + t1, b[1] + t1) - t0
        res = quadrature.integrate_slices(g, slicer, breaks, (a[0], b[0]), (a[1], b[1]),
                                          rtol=rtol, atol=sub_atol, max_depth=max_depth)
    else:
        def mask(U):
            return dom.contains_many(U + ctx.t).astype(np.float64)

        res = quadrature.integrate_box(g, a, b, mask_fn=mask, rtol=rtol, atol=sub_atol,
                                       max_depth=max_depth)
    res = np.asarray(res) * scale
    return float(res[0]) if res.shape == (1,) else res


def neighborhood_mass(ctx: EstimationContext, h: float, method: str = "auto") -> float:
    """``W_h``, the total mass of the weight at scale ``h``.

    ``method`` is ``"auto"`` (closed form when available), ``"closed"`` or
    ``"quadrature"``.
    """
    _check_h(ctx, h)
    if method not in ("auto", "closed", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    if method != "quadrature" and has_closed_form(ctx, h):
        if isinstance(ctx.domain, AxisBox):
            a, b = _box_clip(ctx, h)
            return float(np.prod(np.maximum(b - a, 0.0) / h))
        k = ctx.domain.k
        return h ** (k - 1.0) / (k + 1.0)
    if method == "closed":
        raise ValueError("no closed form for this domain and point")
    return integrate_weighted(ctx, h, lambda U: np.ones(len(U)))


def sector_gram_entry(k: float, h: float, alpha, beta) -> float:
    """Closed-form ``∫ phi_alpha(u/h) phi_beta(u/h) w_h(u) du`` on the sector at the origin."""
    if not 0 < h <= 1:
        raise ValueError("closed form needs 0 < h <= 1")
    a1 = alpha[0] + beta[0]
    a2 = alpha[1] + beta[1]
    return _sector_moment(k, h, a1, a2)


def _sector_moment(k, h, p1, p2):
    c = 1.0 / ((p2 + 1.0) * (p1 + k * (p2 + 1.0) + 1.0))
    return c * h ** ((k - 1.0) * (p2 + 1.0))


def _box_moment(a, b, h, p):
    # ∫_{a/h}^{b/h} xi^p d xi, per axis
    lo, hi = a / h, b / h
    return (hi ** (p + 1) - lo ** (p + 1)) / (p + 1)


def monomial_moments(ctx: EstimationContext, h: float, exps, method: str = "auto") -> np.ndarray:
    """``∫ (u/h)**e w_h(u) du`` for every exponent row ``e`` of ``exps``."""
    _check_h(ctx, h)
    exps = np.atleast_2d(np.asarray(exps, dtype=np.int64))
    if method != "quadrature" and has_closed_form(ctx, h):
        if isinstance(ctx.domain, AxisBox):
            a, b = _box_clip(ctx, h)
            out = np.ones(len(exps))
            for j in range(ctx.d):
                out *= _box_moment(a[j], b[j], h, exps[:, j].astype(np.float64))
            return out
        k = ctx.domain.k
        return np.array([_sector_moment(k, h, float(e[0]), float(e[1])) for e in exps])
    if method == "closed":
        raise ValueError("no closed form for this domain and point")
    from lpdens import _kernels

    def g(U):
        return _kernels.monomials(U / h, exps)

    return np.atleast_1d(integrate_weighted(ctx, h, g))


__all__ = [
    "AxisBox", "ConvexPolygon2D", "Domain", "EstimationContext", "Implicit", "PolySector",
    "QuadratureFailure", "RasterDomain", "default_rho", "has_closed_form", "integrate_over", "integrate_weighted",
    "monomial_moments", "neighborhood_mass", "sector_gram_entry", "weight", "weight_many",
]
