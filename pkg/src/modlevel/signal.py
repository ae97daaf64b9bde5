"""Square-QAM constellations, the jittered AWGN channel and feature maps."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class EmptyInputError(ValueError):
    """Raised when an operation needs at least one sample."""


class FeatureKind(str, enum.Enum):
    MAGNITUDE = "mag"
    QUADRATURE = "quad"

    @classmethod
    def parse(cls, value: "str | FeatureKind") -> "FeatureKind":
        if isinstance(value, cls):
            return value
        aliases = {"mag": cls.MAGNITUDE, "magnitude": cls.MAGNITUDE,
                   "quad": cls.QUADRATURE, "quadrature": cls.QUADRATURE}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown feature kind {value!r}") from None

    def n_features(self, m: int) -> int:
        return m if self is FeatureKind.MAGNITUDE else 2 * m


def _readonly(a) -> np.ndarray:
    a = np.array(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Constellation:
    """Unit-power symbol alphabet of one modulation level.

    ``level_index`` is 1-based and follows ascending modulation order, so
    ties in any decision rule resolve toward the lowest order.
    """

    level_index: int
    order: int
    points: np.ndarray = field(repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.complex128).ravel()
        if pts.size != self.order:
            raise ValueError(f"expected {self.order} points, got {pts.size}")
        object.__setattr__(self, "points", _readonly(pts))

    @property
    def name(self) -> str:
        return f"{self.order}-QAM"

    @property
    def mean_power(self) -> float:
        return float(np.mean(np.abs(self.points) ** 2))

    def real_levels(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct real parts and their multiplicity weights."""
        return _distinct(self.points.real)

    def imag_levels(self) -> tuple[np.ndarray, np.ndarray]:
        return _distinct(self.points.imag)

    def radii(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct magnitudes and their multiplicity weights."""
        return _distinct(np.abs(self.points))


def _distinct(values: np.ndarray, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    v = np.sort(values)
    groups: list[list[float]] = []
    for x in v:
        if groups and abs(x - groups[-1][0]) <= tol:
            groups[-1].append(x)
        else:
            groups.append([x])
    locs = np.array([np.mean(g) for g in groups])
    weights = np.array([len(g) for g in groups], dtype=float) / len(values)
    return locs, weights


def square_qam_levels(order: int) -> np.ndarray:
    """Unnormalised per-axis amplitudes ``-(s-1), ..., s-1`` of an ``order``-QAM grid."""
    side = math.isqrt(order)
    if side * side != order or side < 2:
        raise ValueError(f"{order}-QAM is not a square constellation")
    return np.arange(-(side - 1), side, 2, dtype=float)


def qam_constellation(order: int, level_index: int = 1) -> Constellation:
    levels = square_qam_levels(order)
    # E|c|^2 of the integer grid is 2(order - 1)/3
    scale = math.sqrt(2.0 * (order - 1) / 3.0)
    grid = (levels[:, None] + 1j * levels[None, :]).ravel() / scale
    return Constellation(level_index=level_index, order=order, points=grid)


def qam_family(orders=(4, 16, 64)) -> list[Constellation]:
    return [qam_constellation(o, i + 1) for i, o in enumerate(sorted(orders))]


@dataclass(frozen=True)
class ChannelParams:
    """Amplitude, total complex noise variance and phase-jitter bound.

    ``noise_var`` is the total variance of the complex noise, i.e. each real
    dimension carries ``noise_var / 2``.
    """

    amplitude: float
    noise_var: float
    jitter_bound: float = 0.0

    def __post_init__(self):
        if not self.amplitude > 0:
            raise ValueError("amplitude must be positive")
        if not self.noise_var > 0:
            raise ValueError("noise_var must be positive")
        if not 0.0 <= self.jitter_bound < math.pi:
            raise ValueError("jitter_bound must lie in [0, pi)")

    @classmethod
    def from_snr(cls, snr_db: float, amplitude: float = 1.0,
                 jitter_bound: float = 0.0) -> "ChannelParams":
        return cls(amplitude, amplitude ** 2 / 10.0 ** (snr_db / 10.0), jitter_bound)

    @property
    def snr_linear(self) -> float:
        return self.amplitude ** 2 / self.noise_var

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.snr_linear)

    @property
    def sigma_dim(self) -> float:
        """Standard deviation per real dimension."""
        return math.sqrt(self.noise_var / 2.0)

    def with_jitter(self, jitter_bound: float) -> "ChannelParams":
        return ChannelParams(self.amplitude, self.noise_var, jitter_bound)


def sample_symbols(constellation: Constellation, count: int, rng: np.random.Generator,
                   size: tuple[int, ...] = ()) -> np.ndarray:
    """Draw ``count`` i.i.d. uniform symbols (leading batch dims from ``size``)."""
    if count < 1:
        raise EmptyInputError("need at least one symbol")
    idx = rng.integers(0, constellation.order, size=tuple(size) + (count,))
    return constellation.points[idx]


def apply_channel(s: np.ndarray, params: ChannelParams, rng: np.random.Generator) -> np.ndarray:
    """Return ``A * exp(j*Phi) * s + g`` with uniform jitter and circular Gaussian noise.

    The jitter and noise draws are always consumed from ``rng`` in the same
    order (jitter, then noise) so that sweeps over ``jitter_bound`` or the
    noise level reuse common random numbers for a given stream.
    """
    s = np.asarray(s, dtype=np.complex128)
    u = rng.uniform(-1.0, 1.0, size=s.shape)
    noise = rng.standard_normal(size=s.shape + (2,))
    r = params.amplitude * s
    if params.jitter_bound > 0:
        r = r * np.exp(1j * params.jitter_bound * u)
    return r + params.sigma_dim * (noise[..., 0] + 1j * noise[..., 1])


def extract_features(r: np.ndarray, kind: FeatureKind | str) -> np.ndarray:
    """Map received samples to the classifier's real feature vector.

    Quadrature features are all real parts followed by all imaginary parts
    along the last axis.
    """
    kind = FeatureKind.parse(kind)
    r = np.asarray(r, dtype=np.complex128)
    if r.shape[-1] == 0:
        raise EmptyInputError("no samples")
    if kind is FeatureKind.MAGNITUDE:
        return np.abs(r)
    return np.concatenate([r.real, r.imag], axis=-1)


def trial_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the substream addressed by ``(seed, *key)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def write_samples_csv(path: str | Path, r: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re", "im"])
        for x in np.asarray(r, dtype=np.complex128).ravel():
            w.writerow([repr(float(x.real)), repr(float(x.imag))])


def read_samples_csv(path: str | Path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise EmptyInputError(f"{path} holds no samples")
    return np.array([float(row["re"]) + 1j * float(row["im"]) for row in rows])
