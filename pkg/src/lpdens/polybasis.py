"""Monomial basis of the polynomials of total degree at most ``m`` in ``d`` variables."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from lpdens import _kernels

MAX_ORDER = 60


def dim(d: int, m: int) -> int:
    """Number of monomials of total degree at most ``m`` in ``d`` variables."""
    if d < 1 or m < 0:
        raise ValueError(f"need d >= 1 and m >= 0, got d={d}, m={m}")
    if m + d > MAX_ORDER:
        raise ValueError(f"m + d = {m + d} exceeds the supported limit {MAX_ORDER}")
    return math.comb(m + d, d)


def _compositions(total: int, d: int):
    # all nonnegative integer d-tuples summing to `total`, lexicographically ascending
    if d == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, d - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class Basis:
    """Ordered multi-indices; ``exps[i]`` is the exponent vector of basis function ``i``.

    Ordering is by total degree, then by the first coordinate where two
    indices differ (smaller entry first), so the basis for a smaller degree
    is always a prefix of the basis for a larger one.
    """

    d: int
    m: int
    exps: np.ndarray

    def __len__(self) -> int:
        return self.exps.shape[0]

    @property
    def indices(self) -> list[tuple[int, ...]]:
        return [tuple(int(a) for a in row) for row in self.exps]

    @property
    def degrees(self) -> np.ndarray:
        return self.exps.sum(axis=1)


@lru_cache(maxsize=None)
def _enumerate(d: int, m: int) -> Basis:
    dim(d, m)
    rows = list(itertools.chain.from_iterable(_compositions(k, d) for k in range(m + 1)))
    exps = np.array(rows, dtype=np.int64).reshape(len(rows), d)
    exps.setflags(write=False)
    return Basis(d=d, m=m, exps=exps)


def enumerate(d: int, m: int) -> Basis:  # noqa: A001 - mirrors the mathematical name
    """Return the ordered basis of degree ``m`` in dimension ``d``."""
    return _enumerate(int(d), int(m))


def eval_phi(basis: Basis, u, h: float) -> np.ndarray:
    """Rescaled monomials ``(u/h)**alpha``.

    ``u`` may be a single point of shape ``(d,)`` (result shape ``(D,)``) or
    a batch of shape ``(n, d)`` (result shape ``(n, D)``).
    """
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    u = np.asarray(u, dtype=np.float64)
    single = u.ndim == 1
    Z = np.atleast_2d(u) / h
    if Z.shape[1] != basis.d:
        raise ValueError(f"expected points of dimension {basis.d}, got {Z.shape[1]}")
    out = _kernels.monomials(Z, basis.exps)
    return out[0] if single else out
