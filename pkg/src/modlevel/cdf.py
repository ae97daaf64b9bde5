"""Theoretical and empirical feature CDFs for one (level, SNR, feature) triple."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .marcum import rice_cdf
from .signal import (ChannelParams, Constellation, FeatureKind, apply_channel,
                     extract_features, sample_symbols)


class ModelKind(str, enum.Enum):
    ANALYTIC_GAUSS_MIX = "ANALYTIC_GAUSS_MIX"
    ANALYTIC_RICE_MIX = "ANALYTIC_RICE_MIX"
    EMPIRICAL = "EMPIRICAL"


class SymmetryError(ValueError):
    """The constellation's real and imaginary marginals differ."""


def _ro(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class CdfModel:
    """Evaluable CDF ``F(z)`` of the feature samples of one modulation level.

    Analytic kinds are mixtures described by ``weights``, ``locations`` and
    ``scales`` (Gaussian means/std, or Rician line-of-sight amplitude and
    per-dimension std). The empirical kind is a right-continuous step
    function through ``grid_z``/``grid_f``.
    """

    kind: ModelKind
    level_index: int
    order: int
    snr_db: float
    feature: FeatureKind
    weights: np.ndarray = field(default_factory=lambda: _ro([]), repr=False)
    locations: np.ndarray = field(default_factory=lambda: _ro([]), repr=False)
    scales: np.ndarray = field(default_factory=lambda: _ro([]), repr=False)
    grid_z: np.ndarray = field(default_factory=lambda: _ro([]), repr=False)
    grid_f: np.ndarray = field(default_factory=lambda: _ro([]), repr=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        object.__setattr__(self, "feature", FeatureKind.parse(self.feature))
        for name in ("weights", "locations", "scales", "grid_z", "grid_f"):
            object.__setattr__(self, name, _ro(getattr(self, name)))
        if self.kind is ModelKind.EMPIRICAL:
            if self.grid_z.size == 0 or self.grid_z.shape != self.grid_f.shape:
                raise ValueError("empirical model needs matching non-empty grids")
            if np.any(np.diff(self.grid_z) <= 0):
                raise ValueError("grid_z must be strictly increasing")
            if np.any(np.diff(self.grid_f) < 0) or self.grid_f[0] < 0 or self.grid_f[-1] > 1:
                raise ValueError("grid_f must be nondecreasing within [0, 1]")
        else:
            n = self.weights.size
            if n == 0 or self.locations.size != n or self.scales.size != n:
                raise ValueError("mixture needs matching non-empty component arrays")
            if abs(self.weights.sum() - 1.0) > 1e-12 or np.any(self.weights <= 0):
                raise ValueError("mixture weights must be positive and sum to 1")
            if np.any(self.scales <= 0):
                raise ValueError("component scales must be positive")

    @property
    def components(self) -> list[tuple[float, float, float]]:
        return [(float(w), float(l), float(s))
                for w, l, s in zip(self.weights, self.locations, self.scales)]

    def cdf(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if np.isnan(z).any():
            raise ValueError("cannot evaluate a CDF at NaN")
        if self.kind is ModelKind.EMPIRICAL:
            idx = np.searchsorted(self.grid_z, z, side="right")
            padded = np.concatenate([[0.0], self.grid_f])
            return padded[idx]
        out = np.zeros(z.shape)
        for w, loc, s in zip(self.weights, self.locations, self.scales):
            if self.kind is ModelKind.ANALYTIC_GAUSS_MIX:
                out += w * special.ndtr((z - loc) / s)
            else:
                out += w * rice_cdf(z, loc, s)
        return np.clip(out, 0.0, 1.0)

    __call__ = cdf

    def quantile(self, q: float) -> float:
        """Smallest ``z`` with ``F(z) >= q`` (bisection on the CDF)."""
        if not 0.0 < q < 1.0:
            raise ValueError("q must lie in (0, 1)")
        if self.kind is ModelKind.EMPIRICAL:
            i = int(np.searchsorted(self.grid_f, q, side="left"))
            return float(self.grid_z[min(i, self.grid_z.size - 1)])
        spread = 40.0 * float(self.scales.max())
        lo = float(self.locations.min()) - spread
        hi = float(self.locations.max()) + spread
        if self.kind is ModelKind.ANALYTIC_RICE_MIX:
            lo = 0.0
        f = lambda z: float(self.cdf(z)) - q
        if f(lo) >= 0:
            return lo
        return float(optimize.brentq(f, lo, hi, xtol=1e-14, rtol=1e-14))

    def support(self, tail: float = 1e-6) -> tuple[float, float]:
        return self.quantile(tail), self.quantile(1.0 - tail)

    def tabulate(self, n_points: int = 10_000, tail: float = 1e-12) -> "CdfTable":
        """Piecewise-linear table of the CDF over its ``tail`` quantile range."""
        lo, hi = self.support(tail)
        z = np.linspace(lo, hi, n_points)
        f = np.maximum.accumulate(self.cdf(z))
        return CdfTable(z, f)


@dataclass(frozen=True)
class CdfTable:
    """Stored CDF samples with linear interpolation, as a length-``N̄`` lookup."""

    z: np.ndarray
    f: np.ndarray

    def __call__(self, x) -> np.ndarray:
        return np.interp(x, self.z, self.f)


def cdf_eval(model: CdfModel, z: float) -> float:
    if z is None or math.isnan(z):
        raise ValueError("cannot evaluate a CDF at NaN")
    return float(model.cdf(z))


def build_quadrature_cdf(constellation: Constellation, params: ChannelParams) -> CdfModel:
    """Gaussian mixture over the distinct real parts, one model for I and Q."""
    if params.jitter_bound != 0:
        raise ValueError("nominal CDFs are built without phase jitter")
    locs, weights = constellation.real_levels()
    ilocs, iweights = constellation.imag_levels()
    if (locs.shape != ilocs.shape or not np.allclose(locs, ilocs, atol=1e-12)
            or not np.allclose(weights, iweights, atol=1e-12)):
        raise SymmetryError(f"{constellation.name}: real and imaginary marginals differ")
    return CdfModel(
        kind=ModelKind.ANALYTIC_GAUSS_MIX,
        level_index=constellation.level_index,
        order=constellation.order,
        snr_db=params.snr_db,
        feature=FeatureKind.QUADRATURE,
        weights=weights,
        locations=params.amplitude * locs,
        scales=np.full(locs.size, params.sigma_dim),
    )


def build_magnitude_cdf(constellation: Constellation, params: ChannelParams) -> CdfModel:
    """Rician mixture over the distinct symbol radii (jitter does not change it)."""
    radii, weights = constellation.radii()
    return CdfModel(
        kind=ModelKind.ANALYTIC_RICE_MIX,
        level_index=constellation.level_index,
        order=constellation.order,
        snr_db=params.snr_db,
        feature=FeatureKind.MAGNITUDE,
        weights=weights,
        locations=params.amplitude * radii,
        scales=np.full(radii.size, params.sigma_dim),
    )


def build_cdf(constellation: Constellation, params: ChannelParams,
              feature: FeatureKind | str) -> CdfModel:
    if FeatureKind.parse(feature) is FeatureKind.MAGNITUDE:
        return build_magnitude_cdf(constellation, params)
    return build_quadrature_cdf(constellation, params)


def empirical_from_samples(samples: np.ndarray, *, level_index: int = 0, order: int = 0,
                           snr_db: float = math.nan,
                           feature: FeatureKind | str = FeatureKind.MAGNITUDE) -> CdfModel:
    z = np.sort(np.asarray(samples, dtype=float).ravel())
    grid_z, last = np.unique(z, return_index=True)
    # right-continuous: F(grid_z[i]) counts every sample <= grid_z[i]
    counts = np.append(last[1:], z.size)
    return CdfModel(kind=ModelKind.EMPIRICAL, level_index=level_index, order=order,
                    snr_db=snr_db, feature=feature, grid_z=grid_z, grid_f=counts / z.size)


def build_empirical_cdf(constellation: Constellation, params: ChannelParams, n_bar: int,
                        rng: np.random.Generator,
                        feature: FeatureKind | str = FeatureKind.MAGNITUDE) -> CdfModel:
    """Step-function CDF from ``n_bar`` simulated feature samples."""
    if n_bar < 1000:
        raise ValueError("n_bar must be at least 1000")
    feature = FeatureKind.parse(feature)
    m = n_bar if feature is FeatureKind.MAGNITUDE else (n_bar + 1) // 2
    r = apply_channel(sample_symbols(constellation, m, rng), params, rng)
    z = extract_features(r, feature)[:n_bar]
    return empirical_from_samples(z, level_index=constellation.level_index,
                                  order=constellation.order, snr_db=params.snr_db,
                                  feature=feature)


def ks_distance(a: CdfModel, b: CdfModel, probes: np.ndarray | None = None) -> float:
    """Sup distance between two models.

    If either model is empirical the sup is taken over its jump points and
    their left limits, which is exact for a step function against a
    continuous CDF; otherwise over ``probes``.
    """
    if a.kind is not ModelKind.EMPIRICAL and b.kind is ModelKind.EMPIRICAL:
        a, b = b, a
    if a.kind is ModelKind.EMPIRICAL and b.kind is not ModelKind.EMPIRICAL:
        fb = b.cdf(a.grid_z)
        left = np.concatenate([[0.0], a.grid_f[:-1]])
        return float(max(np.max(np.abs(a.grid_f - fb)), np.max(np.abs(left - fb))))
    if probes is None:
        pts = [g for m in (a, b) if m.kind is ModelKind.EMPIRICAL for g in (m.grid_z,)]
        if pts:
            probes = np.unique(np.concatenate(pts))
        else:
            lo = min(a.support()[0], b.support()[0])
            hi = max(a.support()[1], b.support()[1])
            probes = np.linspace(lo, hi, 10_001)
    return float(np.max(np.abs(a.cdf(probes) - b.cdf(probes))))
