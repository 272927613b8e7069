"""Data-driven joint choice of degree and bandwidth (Goldenshluger-Lepski type rule).

For every level ``l`` of the bandwidth ladder ``h_l = rho * exp(-l)`` a degree
``m_l`` is attached; the rule compares each estimate with those at smaller
bandwidths (the bias proxy ``A_hat``) and adds a penalised deviation bound
``U_hat``.  The level minimising ``A_hat + U_hat`` is selected.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from lpdens.domain import EstimationContext, neighborhood_mass
from lpdens.errors import EmptyGrid, SingularGram
from lpdens.estimator import Sample, estimate_at
from lpdens.gram import Gamma, GramCache, GramSystem

log = logging.getLogger(__name__)

MRule = Union[str, Sequence[int]]


@dataclass(frozen=True)
class SelectionConfig:
    """Tuning of the selection rule.

    ``m_rule`` is ``"simple"`` (``m_l = floor(log n / (2 l))``), ``"zero"``
    (``m_l = 0``) or an explicit nonincreasing sequence of degrees, one per
    level starting at ``l = 1``.  ``rho``, when given, overrides the context.
    """

    delta: float = 2.0
    m_rule: MRule = "simple"
    rho: Optional[float] = None
    fallback_on_empty_grid: bool = True

    def __post_init__(self):
        if not self.delta > 1:
            raise ValueError("delta must exceed 1")
        if isinstance(self.m_rule, str):
            if self.m_rule not in ("simple", "zero"):
                raise ValueError(f"unknown m_rule {self.m_rule!r}")
        else:
            seq = tuple(int(m) for m in self.m_rule)
            if not seq or any(m < 0 for m in seq):
                raise ValueError("custom degree sequence must be nonempty and nonnegative")
            if any(b > a for a, b in zip(seq, seq[1:])):
                raise ValueError("custom degree sequence must be nonincreasing")
            object.__setattr__(self, "m_rule", seq)


def degree_for_level(ell: int, n: int, cfg: SelectionConfig) -> int:
    rule = cfg.m_rule
    if rule == "simple":
        return int(math.floor(math.log(n) / (2 * ell)))
    if rule == "zero":
        return 0
    if ell > len(rule):
        raise ValueError(f"custom degree sequence has no entry for level {ell}")
    return rule[ell - 1]


@dataclass
class GridRow:
    ell: int
    gamma: Gamma
    W_h: float
    lam: float
    qualifies: bool
    gram: Optional[GramSystem] = field(default=None, repr=False)
    note: str = ""


@dataclass
class GridPlan:
    rows: list
    levels: list
    warnings: list

    @property
    def gammas(self):
        return [(r.ell, r.gamma) for r in self.levels]


def _context(ctx, cfg):
    if cfg.rho is not None and cfg.rho != ctx.rho:
        return EstimationContext(ctx.domain, ctx.t, cfg.rho)
    return ctx


def plan_grid(ctx: EstimationContext, n: int, cfg: SelectionConfig = SelectionConfig(),
              cache: Optional[GramCache] = None) -> GridPlan:
    """Evaluate every candidate level and decide which ones enter the grid."""
    if n < 2:
        raise ValueError("need n >= 2")
    ctx = _context(ctx, cfg)
    if cache is None or cache.ctx is not ctx:
        cache = GramCache(ctx)
    logn = math.log(n)
    threshold = logn ** 3
    rows, warnings = [], []
    for ell in range(1, int(math.floor(logn)) + 1):
        h = ctx.rho * math.exp(-ell)
        gamma = Gamma(degree_for_level(ell, n, cfg), h)
        W = neighborhood_mass(ctx, h)
        try:
            gram = cache.get(gamma)
            lam = gram.lam
        except SingularGram as exc:
            gram, lam = None, float("nan")
            note = f"level {ell} dropped: {exc}"
        else:
            note = ""
        big_enough = n * h ** ctx.d * W >= threshold
        if gram is None and big_enough:
            warnings.append(note)
            log.warning(note)
        rows.append(GridRow(ell, gamma, W, lam, big_enough and gram is not None, gram, note))
    levels = [r for r in rows if r.qualifies]
    if not levels:
        msg = f"no level satisfies n h^d W_h >= (log n)^3 = {threshold:.4g} for n={n}"
        # the largest bandwidth whose Gram system is usable, normally level 1
        first = next((r for r in rows if r.gram is not None), None)
        if not cfg.fallback_on_empty_grid or first is None:
            raise EmptyGrid(msg)
        warnings.append(msg + f"; falling back to level {first.ell} only")
        log.warning(warnings[-1])
        levels = [first]
    return GridPlan(rows, levels, warnings)


def build_grid(ctx: EstimationContext, n: int, cfg: SelectionConfig = SelectionConfig()):
    """The selection grid as ``[(ell, Gamma), ...]`` ordered by level."""
    return plan_grid(ctx, n, cfg).gammas


def penalties(gram: GramSystem, n: int, d: int, cfg: SelectionConfig):
    """Return ``(c, eps, Lambda, pen)`` for one grid parameter."""
    return _penalties(gram.D, gram.h, gram.lam, gram.W_h, n, d, cfg.delta)


def _penalties(D, h, lam, W, n, d, delta):
    nhd = n * h ** d
    c = math.sqrt(D) / (nhd * lam)
    eps = (delta - 1.0) * D * W / (nhd * lam ** 2)
    Lam = 2.0 * abs(math.log(lam))
    pen = d * delta * abs(math.log(h)) + Lam
    return c, eps, Lam, pen


def u_hat(v_hat: float, eps: float, c: float, pen: float) -> float:
    """Penalised deviation bound ``sqrt(2 (v + eps) pen) + c pen``."""
    return math.sqrt(2.0 * (v_hat + eps) * pen) + c * pen


@dataclass
class GridEntry:
    ell: int
    gamma: Gamma
    gram: GramSystem = field(repr=False)
    W_h: float
    f_hat: float
    v_hat: float
    c_gamma: float
    eps_gamma: float
    Lambda_gamma: float
    pen: float
    U_hat: float
    A_hat: float = 0.0
    n_in_window: int = 0

    def to_dict(self) -> dict:
        return {"ell": self.ell, "m": self.gamma.m, "h": self.gamma.h, "W_h": self.W_h,
                "lambda": self.gram.lam, "f_hat": self.f_hat, "v_hat": self.v_hat,
                "U_hat": self.U_hat, "A_hat": self.A_hat, "pen": self.pen}


def a_hat(entries: Sequence[GridEntry], target_ell: int) -> float:
    """Bias proxy of the entry at ``target_ell`` against every grid entry."""
    by_ell = {e.ell: e for e in entries}
    g = by_ell[target_ell]
    best = 0.0
    for gp in entries:
        vee = g if g.ell <= gp.ell else gp   # larger bandwidth of the two
        term = abs(vee.f_hat - gp.f_hat) - vee.U_hat - gp.U_hat
        if term > best:
            best = term
    return best


@dataclass
class SelectionReport:
    entries: list
    selected_ell: int
    f_hat_adaptive: float
    warnings: list = field(default_factory=list)

    @property
    def selected(self) -> GridEntry:
        return next(e for e in self.entries if e.ell == self.selected_ell)

    def to_dict(self) -> dict:
        return {"entries": [e.to_dict() for e in self.entries], "selected_ell": self.selected_ell,
                "f_hat_adaptive": self.f_hat_adaptive, "warnings": list(self.warnings)}


def choose(entries: list) -> int:
    """Fill in ``A_hat`` and return the selected level (ties go to the smallest level)."""
    entries.sort(key=lambda e: e.ell)
    for e in entries:
        e.A_hat = a_hat(entries, e.ell)
    crit = [e.A_hat + e.U_hat for e in entries]
    return entries[int(np.argmin(crit))].ell


def select(ctx: EstimationContext, sample, cfg: SelectionConfig = SelectionConfig(),
           plan: Optional[GridPlan] = None, inside=None) -> SelectionReport:
    """Run the full selection at ``ctx.t``.

    ``plan`` may be passed to reuse the grid (and its Gram systems) across
    samples of the same size.
    """
    sample = sample if isinstance(sample, Sample) else Sample(sample)
    ctx = _context(ctx, cfg)
    n = sample.n
    if plan is None:
        plan = plan_grid(ctx, n, cfg)
    if inside is None:
        inside = ctx.domain.contains_many(sample.points)
    entries = []
    for row in plan.levels:
        est = estimate_at(ctx, row.gram, sample, inside)
        c, eps, Lam, pen = penalties(row.gram, n, ctx.d, cfg)
        entries.append(GridEntry(row.ell, row.gamma, row.gram, row.W_h, est.f_hat, est.v_hat,
                                 c, eps, Lam, pen, u_hat(est.v_hat, eps, c, pen),
                                 n_in_window=est.n_in_window))
    sel = choose(entries)
    f_sel = next(e.f_hat for e in entries if e.ell == sel)
    return SelectionReport(entries, sel, f_sel, list(plan.warnings))


__all__ = ["GridEntry", "GridPlan", "GridRow", "SelectionConfig", "SelectionReport", "a_hat",
           "build_grid", "choose", "degree_for_level", "penalties", "plan_grid", "select", "u_hat"]
