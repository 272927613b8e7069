"""Monte Carlo study on polynomial sectors: test densities, sampling, oracle search.

Every replication draws its sample from its own counter-based generator
(Philox keyed by ``(seed, n, rep)`` through ``SeedSequence``), so results
do not depend on how replications are distributed over worker processes.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

from lpdens import _kernels, polybasis
from lpdens.domain import Domain, EstimationContext, PolySector, integrate_over
from lpdens.errors import EnvelopeFailure, SingularGram
from lpdens.estimator import estimate_at
from lpdens.gram import gram_family
from lpdens.selection import GridPlan, SelectionConfig, plan_grid, select

ENVELOPE_GRID = 400
ENVELOPE_INFLATION = 1.05
MAX_PROPOSALS = 10 ** 9
RATE_PROBE = 10 ** 6
MIN_RATE = 1e-6
CHUNK = 25


# --------------------------------------------------------------------------
# densities
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TargetDensity:
    """Density ``norm_const * raw(x)`` restricted to ``domain``.

    Built-in ``kind`` values are ``poly_fk``, ``gauss_gk`` and ``uniform``;
    ``kind="custom"`` uses ``raw_fn`` (vectorised over an ``(N, d)`` array).
    """

    name: str
    kind: str
    domain: Domain
    k: Optional[float] = None
    raw_fn: Optional[Callable] = field(default=None, repr=False)

    def raw(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self.kind == "poly_fk":
            return (X[:, 0] - 0.6) ** 2 + (X[:, 1] - 0.2) ** 2
        if self.kind == "gauss_gk":
            a, b, c, d = gauss_centers(self.k)
            r1 = (X[:, 0] - a) ** 2 + (X[:, 1] - b) ** 2
            r2 = (X[:, 0] - c) ** 2 + (X[:, 1] - d) ** 2
            return np.exp(-r1 / (2 * 0.4 ** 2)) + np.exp(-r2 / (2 * 0.15 ** 2))
        if self.kind == "uniform":
            return np.ones(len(X))
        if self.kind == "custom":
            return np.asarray(self.raw_fn(X), dtype=np.float64)
        raise ValueError(f"unknown density kind {self.kind!r}")

    @cached_property
    def norm_const(self) -> float:
        total = integrate_over(self.domain, self.raw, rtol=1e-11)
        if not total > 0:
            raise ValueError(f"density {self.name} has zero mass on its domain")
        return 1.0 / total

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.where(self.domain.contains_many(X), self.norm_const * self.raw(X), 0.0)

    def value(self, x) -> float:
        return float(self(np.asarray(x, dtype=np.float64)[None, :])[0])

    def grid_sup(self, lo=None, hi=None, resolution: int = ENVELOPE_GRID) -> float:
        """Largest density value on a regular grid over ``[lo, hi]`` (default: bounding box)."""
        blo, bhi = self.domain.bbox
        lo = blo if lo is None else np.maximum(lo, blo)
        hi = bhi if hi is None else np.minimum(hi, bhi)
        axes = [np.linspace(a, b, resolution) for a, b in zip(lo, hi)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(lo))
        return float(np.max(self(mesh)))

    @cached_property
    def envelope(self) -> float:
        return ENVELOPE_INFLATION * self.grid_sup()


def gauss_centers(k: float):
    return 0.1, 0.1 ** k / 2.0, 0.75, 0.75 ** k / 2.0


def make_test_density(kind: str, k: float) -> TargetDensity:
    """Test densities on the sector ``D_k``: ``poly_fk`` or ``gauss_gk``."""
    if kind not in ("poly_fk", "gauss_gk"):
        raise ValueError(f"unknown test density {kind!r}")
    label = "f" if kind == "poly_fk" else "g"
    return TargetDensity(f"{label}_{k:g}", kind, PolySector(float(k)), float(k))


def uniform_density(domain: Domain) -> TargetDensity:
    return TargetDensity("uniform", "uniform", domain)


# --------------------------------------------------------------------------
# sampling
# --------------------------------------------------------------------------

def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent Philox stream for ``(seed, *key)``."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *(int(x) for x in key)])
    return np.random.Generator(np.random.Philox(ss))


def rejection_sample(density: TargetDensity, n: int, seed=0) -> np.ndarray:
    """Draw ``n`` points by uniform proposals on the bounding box.

    ``seed`` is an integer or a ``numpy.random.Generator``.

    Raises
    ------
    EnvelopeFailure
        If fewer than one proposal in a million is accepted.
    """
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    lo, hi = density.domain.bbox
    d = len(lo)
    M = density.envelope
    chunks, accepted, proposed = [], 0, 0
    rate = None
    while accepted < n:
        need = n - accepted
        batch = 2 * need + 1024 if rate is None else int(min(1.25 * need / max(rate, MIN_RATE) + 1024, 4_000_000))
        X = lo + (hi - lo) * rng.random((batch, d))
        U = rng.random(batch)
        keep = U * M < density(X)
        chunks.append(X[keep])
        accepted += int(keep.sum())
        proposed += batch
        rate = accepted / proposed
        if proposed >= RATE_PROBE and rate < MIN_RATE:
            raise EnvelopeFailure(f"acceptance rate {rate:.3g} after {proposed} proposals")
        if proposed > MAX_PROPOSALS:
            raise EnvelopeFailure(f"more than {MAX_PROPOSALS} proposals needed")
    return np.concatenate(chunks)[:n]


# --------------------------------------------------------------------------
# study configuration
# --------------------------------------------------------------------------

# full-scale study grids; the desk grid spaces bandwidths ten times wider
FULL_DEGREES = tuple(range(6))
FULL_BANDWIDTHS = tuple(round(0.01 + 0.001 * l, 12) for l in range(600))
DESK_BANDWIDTHS = tuple(round(0.01 + 0.01 * l, 12) for l in range(60))
FULL_SAMPLE_SIZES = (200, 500, 1000, 2000)


@dataclass(frozen=True, eq=False)
class StudyConfig:
    density: TargetDensity
    t: tuple = (0.0, 0.0)
    sample_sizes: tuple = (200,)
    R: int = 200
    degree_grid: tuple = FULL_DEGREES
    bandwidth_grid: tuple = DESK_BANDWIDTHS
    seed: int = 0
    selection: SelectionConfig = SelectionConfig()

    def __post_init__(self):
        if self.R < 1:
            raise ValueError("need at least one replication")
        H = np.asarray(self.bandwidth_grid, dtype=np.float64)
        if H.size == 0 or np.any(H <= 0) or np.any(H > 1):
            raise ValueError("bandwidths must lie in (0, 1]")
        if not self.degree_grid or min(self.degree_grid) < 0:
            raise ValueError("degree grid must be nonempty and nonnegative")
        object.__setattr__(self, "t", tuple(float(v) for v in self.t))
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))
        object.__setattr__(self, "degree_grid", tuple(sorted(set(int(m) for m in self.degree_grid))))
        object.__setattr__(self, "bandwidth_grid", tuple(float(h) for h in self.bandwidth_grid))


@dataclass(eq=False)
class FixedGridTables:
    """Estimator weights for every ``(m, h)`` of a fixed grid; NaN rows mark singular cells."""

    degrees: tuple
    bandwidths: np.ndarray
    exps: np.ndarray
    weights: list  # per degree: (H, D_m)
    lams: np.ndarray  # (M, H)


def fixed_grid_tables(ctx: EstimationContext, degrees, bandwidths) -> FixedGridTables:
    degrees = tuple(sorted(set(int(m) for m in degrees)))
    H = np.asarray(bandwidths, dtype=np.float64)
    weights = [np.full((len(H), len(polybasis.enumerate(ctx.d, m))), np.nan) for m in degrees]
    lams = np.full((len(degrees), len(H)), np.nan)
    for j, h in enumerate(H):
        fam = gram_family(ctx, float(h), degrees)
        for a, m in enumerate(degrees):
            g = fam[m]
            if isinstance(g, SingularGram):
                continue
            weights[a][j] = g.weight
            lams[a, j] = g.lam
    exps = polybasis.enumerate(ctx.d, max(degrees)).exps
    return FixedGridTables(degrees, H, exps, weights, lams)


def fixed_grid_estimates(tables: FixedGridTables, U, inside, n: int):
    """Estimates for all grid cells from one sample; returns ``(est (M, H), counts (H,))``."""
    S = _kernels.window_moments(U, inside, tables.bandwidths, tables.exps)
    d = U.shape[1]
    scale = tables.bandwidths ** (-d) / n
    est = np.empty((len(tables.degrees), len(tables.bandwidths)))
    for a, W in enumerate(tables.weights):
        est[a] = np.einsum("hj,hj->h", S[:, :W.shape[1]], W) * scale
    return est, S[:, 0]


# --------------------------------------------------------------------------
# replications
# --------------------------------------------------------------------------

@dataclass(eq=False)
class _Prepared:
    density: TargetDensity
    t: np.ndarray
    n: int
    seed: int
    cfg: SelectionConfig
    plan: GridPlan
    ctx_sel: EstimationContext
    ctx_fixed: Optional[EstimationContext]
    tables: Optional[FixedGridTables]


def _prepare(density, t, n, seed, cfg, degrees=None, bandwidths=None) -> _Prepared:
    t = np.asarray(t, dtype=np.float64)
    ctx_sel = EstimationContext(density.domain, t, cfg.rho)
    plan = plan_grid(ctx_sel, n, cfg)
    ctx_fixed = tables = None
    if degrees is not None:
        hmax = max(float(np.max(bandwidths)), ctx_sel.rho)
        ctx_fixed = EstimationContext(density.domain, t, ctx_sel.rho, h_max=hmax, check=False)
        tables = fixed_grid_tables(ctx_fixed, degrees, bandwidths)
    return _Prepared(density, t, n, seed, cfg, plan, ctx_sel, ctx_fixed, tables)


def _one_replication(prep: _Prepared, rep: int):
    X = rejection_sample(prep.density, prep.n, make_rng(prep.seed, prep.n, rep))
    inside = prep.density.domain.contains_many(X)
    report = select(prep.ctx_sel, X, prep.cfg, plan=prep.plan, inside=inside)
    sel = report.selected
    grid_f = np.array([e.f_hat for e in report.entries])
    ladder = []
    for row in prep.plan.rows:
        ladder.append(estimate_at(prep.ctx_sel, row.gram, X, inside).f_hat if row.gram is not None else np.nan)
    out = {"f_hat": report.f_hat_adaptive, "m_sel": sel.gamma.m, "h_sel": sel.gamma.h,
           "grid_f": grid_f, "ladder_f": np.array(ladder)}
    if prep.tables is not None:
        est, counts = fixed_grid_estimates(prep.tables, X - prep.t, inside, prep.n)
        out["fixed"] = est
        out["empty"] = counts == 0
    return out


def _run_chunk(args):
    prep, reps = args
    return [_one_replication(prep, r) for r in reps]


def _replicate(prep: _Prepared, R: int, jobs: int = 1):
    chunks = [list(range(a, min(a + CHUNK, R))) for a in range(0, R, CHUNK)]
    if jobs <= 1 or len(chunks) == 1:
        results = [_run_chunk((prep, c)) for c in chunks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_run_chunk, [(prep, c) for c in chunks]))
    return [r for chunk in results for r in chunk]


@dataclass(eq=False)
class SizeResult:
    """Everything recorded for one sample size."""

    n: int
    f_true: float
    adaptive: np.ndarray
    m_sel: np.ndarray
    h_sel: np.ndarray
    grid_levels: list
    grid_f: np.ndarray
    ladder_levels: list
    ladder_f: np.ndarray
    tables: Optional[FixedGridTables] = None
    fixed: Optional[np.ndarray] = None  # (R, M, H)
    empty: Optional[np.ndarray] = None  # (R, H)
    warnings: list = field(default_factory=list)

    @property
    def R(self) -> int:
        return len(self.adaptive)

    def rmse_adaptive(self) -> float:
        return float(np.sqrt(np.mean((self.adaptive - self.f_true) ** 2)))

    def rmse_grid(self) -> np.ndarray:
        return np.sqrt(np.mean((self.grid_f - self.f_true) ** 2, axis=0))

    def rmse_ladder(self) -> np.ndarray:
        return np.sqrt(np.mean((self.ladder_f - self.f_true) ** 2, axis=0))


def run_size(density: TargetDensity, t, n: int, R: int, seed: int, cfg: SelectionConfig = SelectionConfig(),
             degrees=None, bandwidths=None, jobs: int = 1) -> SizeResult:
    """Replicate the adaptive estimator (and optionally a fixed grid) ``R`` times at size ``n``."""
    prep = _prepare(density, t, n, seed, cfg, degrees, bandwidths)
    reps = _replicate(prep, R, jobs)
    res = SizeResult(
        n=n, f_true=density.value(prep.t),
        adaptive=np.array([r["f_hat"] for r in reps]),
        m_sel=np.array([r["m_sel"] for r in reps]),
        h_sel=np.array([r["h_sel"] for r in reps]),
        grid_levels=[row.ell for row in prep.plan.levels],
        grid_f=np.array([r["grid_f"] for r in reps]),
        ladder_levels=[row.ell for row in prep.plan.rows],
        ladder_f=np.array([r["ladder_f"] for r in reps]),
        warnings=list(prep.plan.warnings),
    )
    if prep.tables is not None:
        res.tables = prep.tables
        res.fixed = np.array([r["fixed"] for r in reps])
        res.empty = np.array([r["empty"] for r in reps])
    return res


# --------------------------------------------------------------------------
# oracle search and rate diagnostic
# --------------------------------------------------------------------------

@dataclass(eq=False)
class OracleResult:
    m_star: int
    h_star: float
    mse: np.ndarray  # (M, H), NaN for singular cells
    se: np.ndarray
    n_fail: np.ndarray
    degrees: tuple
    bandwidths: np.ndarray

    def table_rows(self):
        for a, m in enumerate(self.degrees):
            for j, h in enumerate(self.bandwidths):
                yield m, float(h), float(self.mse[a, j]), float(self.se[a, j]), int(self.n_fail[a, j])


def oracle_from_size(res: SizeResult) -> OracleResult:
    err2 = (res.fixed - res.f_true) ** 2
    R = err2.shape[0]
    mse = err2.mean(axis=0)
    se = err2.std(axis=0, ddof=1) / math.sqrt(R) if R > 1 else np.zeros_like(mse)
    singular = np.isnan(mse)
    n_fail = np.where(singular, R, res.empty.sum(axis=0)[None, :])
    degrees = res.tables.degrees
    H = res.tables.bandwidths
    best = None
    for a in range(len(degrees)):
        for j in sorted(range(len(H)), key=lambda j: -H[j]):
            if singular[a, j]:
                continue
            if best is None or mse[a, j] < mse[best]:
                best = (a, j)
    if best is None:
        raise SingularGram("every cell of the oracle grid is singular")
    return OracleResult(degrees[best[0]], float(H[best[1]]), mse, se, n_fail.astype(int), degrees, H)


def oracle_search(cfg: StudyConfig, n: Optional[int] = None, jobs: int = 1) -> OracleResult:
    """Replication estimate of the MSE-optimal ``(m, h)`` over the fixed grid."""
    n = cfg.sample_sizes[0] if n is None else n
    res = run_size(cfg.density, cfg.t, n, cfg.R, cfg.seed, cfg.selection, cfg.degree_grid,
                   cfg.bandwidth_grid, jobs)
    return oracle_from_size(res)


def log_slope(ns, rmse) -> float:
    """Least-squares slope of ``log rmse`` against ``log n``."""
    x = np.log(np.asarray(ns, dtype=np.float64))
    y = np.log(np.asarray(rmse, dtype=np.float64))
    x = x - x.mean()
    return float(np.dot(x, y - y.mean()) / np.dot(x, x))


def rate_check(density: TargetDensity, t, sample_sizes: Sequence[int], R: int,
               cfg: SelectionConfig = SelectionConfig(), seed: int = 0, jobs: int = 1):
    """Slope of the adaptive estimator's log RMSE versus log n; returns ``(slope, rmses)``."""
    if len(sample_sizes) < 3:
        raise ValueError("need at least three sample sizes")
    if max(sample_sizes) < 10 * min(sample_sizes):
        raise ValueError("sample sizes must span at least one decade")
    rmses = [run_size(density, t, n, R, seed, cfg, jobs=jobs).rmse_adaptive() for n in sample_sizes]
    return log_slope(sample_sizes, rmses), rmses


# --------------------------------------------------------------------------
# whole study
# --------------------------------------------------------------------------

def _quartiles(x):
    x = np.asarray(x, dtype=np.float64)
    q1, med, q3 = np.quantile(x, [0.25, 0.5, 0.75])
    return {"mean": float(x.mean()), "q1": float(q1), "median": float(med), "q3": float(q3)}


def run_study(cfg: StudyConfig, jobs: int = 1) -> dict:
    """Run every sample size; returns ``{"sizes": [SizeResult], "oracles": [OracleResult]}``."""
    sizes, oracles = [], []
    for n in cfg.sample_sizes:
        res = run_size(cfg.density, cfg.t, n, cfg.R, cfg.seed, cfg.selection, cfg.degree_grid,
                       cfg.bandwidth_grid, jobs)
        sizes.append(res)
        oracles.append(oracle_from_size(res))
    return {"sizes": sizes, "oracles": oracles}


def study_summary(cfg: StudyConfig, study: dict) -> dict:
    per_n = []
    for res, orc in zip(study["sizes"], study["oracles"]):
        a = orc.degrees.index(orc.m_star)
        j = int(np.flatnonzero(orc.bandwidths == orc.h_star)[0])
        per_n.append({
            "n": res.n,
            "f_true": res.f_true,
            "oracle": {"m_star": orc.m_star, "h_star": orc.h_star, "mse": float(orc.mse[a, j]),
                       "estimates": _quartiles(res.fixed[:, a, j])},
            "adaptive": {"rmse": res.rmse_adaptive(), "estimates": _quartiles(res.adaptive),
                         "grid_levels": res.grid_levels,
                         "grid_rmse": res.rmse_grid().tolist()},
            "warnings": sorted(set(res.warnings)),
        })
    out = {
        "density": cfg.density.name,
        "k": cfg.density.k,
        "t": list(cfg.t),
        "R": cfg.R,
        "seed": cfg.seed,
        "degree_grid": list(cfg.degree_grid),
        "bandwidth_grid": {"min": min(cfg.bandwidth_grid), "max": max(cfg.bandwidth_grid),
                           "count": len(cfg.bandwidth_grid)},
        "delta": cfg.selection.delta,
        "sizes": per_n,
        "conventions": {
            "rng": "Philox keyed by SeedSequence([seed, n, rep])",
            "sampler": f"rejection from uniform proposals on the bounding box, envelope = "
                       f"{ENVELOPE_INFLATION} x max over a {ENVELOPE_GRID}^2 grid",
            "failed_fits": "singular (m, h) cells are missing (mse = NaN, n_fail = R); empty windows "
                           "give f_hat = 0 and are counted in n_fail but kept in the MSE",
        },
    }
    if len(cfg.sample_sizes) >= 3:
        out["rate_slope"] = log_slope([r.n for r in study["sizes"]],
                                      [r.rmse_adaptive() for r in study["sizes"]])
    return out
