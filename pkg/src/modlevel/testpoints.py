"""Test points where pairs of theoretical CDFs separate the most.

For every ordered pair of levels ``(i, j)`` and sign ``eps`` the test point is
the maximiser of ``(-1)**eps * (F_i(z) - F_j(z))``. The maximiser of the
negative curve of ``(i, j)`` is the positive one of ``(j, i)``, so only the
``i < j`` pairs are searched and the rest is filled in by symmetry.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize

from .cdf import CdfModel
from .signal import FeatureKind

MERGE_TOL = 1e-9


class DegeneratePairError(ValueError):
    """Two levels have (numerically) identical CDFs, so no test point exists."""


@dataclass(frozen=True)
class TestPoint:
    __test__ = False  # not a pytest class

    i: int
    j: int
    eps: int
    value: float
    deviation: float


def _ro(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class TestPointSet:
    """Sorted, merged test points plus the nominal CDF values at them.

    ``pairs`` holds one entry per ordered pair and sign; ``slot[n]`` is the
    position of ``pairs[n].value`` in ``points``. ``cdf_values[k, l]`` is the
    nominal CDF of the k-th level at ``points[l]``.
    """

    __test__ = False

    levels: tuple[int, ...]
    orders: tuple[int, ...]
    points: np.ndarray
    pairs: tuple[TestPoint, ...]
    slot: np.ndarray
    cdf_values: np.ndarray
    snr_db: float = math.nan
    feature: FeatureKind | None = None
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "points", _ro(self.points))
        object.__setattr__(self, "slot", _ro(self.slot, np.intp))
        object.__setattr__(self, "cdf_values", _ro(self.cdf_values))
        if np.any(np.diff(self.points) <= 0):
            raise ValueError("test points must be strictly increasing")
        if self.cdf_values.shape != (len(self.levels), self.points.size):
            raise ValueError("cdf_values must be K x L")
        if self.feature is not None:
            object.__setattr__(self, "feature", FeatureKind.parse(self.feature))

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def n_nominal(self) -> int:
        """``2 * C(K, 2)``, the count before coincident points are merged."""
        return 2 * math.comb(self.n_levels, 2)

    @property
    def n_effective(self) -> int:
        return int(self.points.size)

    @property
    def region_probs(self) -> np.ndarray:
        k = self.n_levels
        padded = np.hstack([np.zeros((k, 1)), self.cdf_values, np.ones((k, 1))])
        return np.clip(np.diff(padded, axis=1), 0.0, None)

    def triples(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Level positions ``i``, ``j``, sign ``eps`` and point slot for each pair entry."""
        pos = {lvl: n for n, lvl in enumerate(self.levels)}
        ii = np.array([pos[p.i] for p in self.pairs], dtype=np.intp)
        jj = np.array([pos[p.j] for p in self.pairs], dtype=np.intp)
        ee = np.array([p.eps for p in self.pairs], dtype=np.intp)
        return ii, jj, ee, self.slot

    def region_of(self, z) -> np.ndarray:
        """Region index ``l`` (0-based) with ``t_{l-1} < z <= t_l``."""
        return np.searchsorted(self.points, z, side="left")

    def lookup(self, i: int, j: int, eps: int) -> TestPoint:
        for p in self.pairs:
            if (p.i, p.j, p.eps) == (i, j, eps):
                return p
        raise KeyError((i, j, eps))


def _by_level(models: Sequence[CdfModel]) -> dict[int, CdfModel]:
    return {m.level_index: m for m in models}


def distance_curve(models: Sequence[CdfModel], i: int, j: int, eps: int, z) -> np.ndarray:
    """``(-1)**eps * (F_i(z) - F_j(z))`` for level indices ``i != j``."""
    if i == j:
        raise ValueError("distance curve needs two different levels")
    if eps not in (0, 1):
        raise ValueError("eps must be 0 or 1")
    lv = _by_level(models)
    return (-1.0) ** eps * (lv[i].cdf(z) - lv[j].cdf(z))


def _refine(curve, grid: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """Global maximiser of ``curve`` given its values on ``grid``."""
    top = values.max()
    n = grid.size
    left = np.concatenate([[-np.inf], values[:-1]])
    right = np.concatenate([values[1:], [-np.inf]])
    peaks = np.flatnonzero((values >= left) & (values >= right) & (values >= top - 1e-6))
    best_z, best_v = float(grid[peaks[0]]), float(values[peaks[0]])
    for c in peaks:
        z0, v0 = float(grid[c]), float(values[c])
        lo, hi = grid[max(c - 1, 0)], grid[min(c + 1, n - 1)]
        if hi > lo:
            res = optimize.minimize_scalar(lambda z: -float(curve(z)), bounds=(lo, hi),
                                           method="bounded",
                                           options={"xatol": 1e-13, "maxiter": 500})
            if -res.fun > v0:
                z0, v0 = float(res.x), float(-res.fun)
        if v0 > best_v or (v0 == best_v and z0 < best_z):
            best_z, best_v = z0, v0
    return best_z, best_v


def find_test_points(models: Sequence[CdfModel], grid_size: int = 10_000,
                     tail: float = 1e-6, merge_tol: float = MERGE_TOL,
                     provenance: dict | None = None) -> TestPointSet:
    """Test points for every ordered level pair, merged and sorted.

    The search runs on a uniform grid spanning the ``tail`` .. ``1 - tail``
    quantile range of all levels, then refines every near-top grid peak with
    a bounded scalar search. Exact ties go to the smallest ``z``.
    """
    models = sorted(models, key=lambda m: m.level_index)
    if len(models) < 2:
        raise ValueError("need at least two levels")
    supports = [m.support(tail) for m in models]
    lo = min(s[0] for s in supports)
    hi = max(s[1] for s in supports)
    grid = np.linspace(lo, hi, grid_size)
    f = np.vstack([m.cdf(grid) for m in models])

    found: dict[tuple[int, int, int], tuple[float, float]] = {}
    for a, b in itertools.combinations(range(len(models)), 2):
        diff = f[a] - f[b]
        if np.max(np.abs(diff)) < 1e-12:
            raise DegeneratePairError(
                f"levels {models[a].level_index} and {models[b].level_index} are indistinguishable")
        mi, mj = models[a], models[b]
        for eps in (0, 1):
            sign = 1.0 if eps == 0 else -1.0
            curve = lambda z, s=sign: s * (mi.cdf(z) - mj.cdf(z))
            found[(a, b, eps)] = _refine(curve, grid, sign * diff)

    nominal = sorted(t for t, _ in found.values())
    merged: list[float] = []
    for t in nominal:
        if not merged or t - merged[-1] > merge_tol:
            merged.append(t)
    points = np.array(merged)

    pairs, slot = [], []
    for a, b in itertools.permutations(range(len(models)), 2):
        for eps in (0, 1):
            if a < b:
                t, dev = found[(a, b, eps)]
            else:
                t, dev = found[(b, a, 1 - eps)]
            pairs.append(TestPoint(models[a].level_index, models[b].level_index, eps, t, dev))
            slot.append(int(np.argmin(np.abs(points - t))))

    first = models[0]
    return TestPointSet(
        levels=tuple(m.level_index for m in models),
        orders=tuple(m.order for m in models),
        points=points,
        pairs=tuple(pairs),
        slot=np.array(slot),
        cdf_values=np.vstack([m.cdf(points) for m in models]),
        snr_db=first.snr_db,
        feature=first.feature,
        provenance=dict(provenance or {}),
    )


def region_probabilities(tps: TestPointSet, model: CdfModel) -> np.ndarray:
    """Probability of a single sample falling in each of the ``L + 1`` regions."""
    f = np.concatenate([[0.0], model.cdf(tps.points), [1.0]])
    return np.clip(np.diff(f), 0.0, None)
