"""Modulation-level decision rules.

Every rule has a batch form working on arrays with a leading trial axis and
a single-vector ``classify_*`` wrapper that returns a :class:`DecisionReport`.
The reduced rules share :func:`reduced_metrics`/:func:`decide_reduced` with
the exact analysis, so live classification and the multinomial enumeration
can never drift apart.

Ties in any argmin/argmax go to the lowest modulation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from .cdf import CdfModel
from .signal import ChannelParams, Constellation, EmptyInputError, FeatureKind
from .testpoints import TestPointSet

REDUCED_RULES = ("rck", "rcks")
FULL_RULES = ("ks", "kuiper")
ALL_RULES = ("rck", "rcks", "ks", "kuiper", "cm", "ml")


@dataclass
class OpCounts:
    adds: int = 0
    multiplies: int = 0
    compares: int = 0

    def __iadd__(self, other: "OpCounts") -> "OpCounts":
        self.adds += other.adds
        self.multiplies += other.multiplies
        self.compares += other.compares
        return self


@dataclass
class DecisionReport:
    """Per-class metrics and the chosen level for one classification call.

    ``choice`` is the 0-based position in the level list; ``level_index`` and
    ``order`` identify the same level. For the distance rules ``dev_pos`` and
    ``dev_neg`` are the positive/negative deviation maxima; for the cumulant
    and likelihood rules they are ``None`` and ``metric`` carries the score
    that was minimised.
    """

    rule: str
    metric: np.ndarray
    choice: int
    level_index: int
    order: int
    dev_pos: np.ndarray | None = None
    dev_neg: np.ndarray | None = None
    ks_metric: np.ndarray | None = None
    kuiper_metric: np.ndarray | None = None
    op_counts: OpCounts = field(default_factory=OpCounts)
    flags: tuple[str, ...] = ()
    extra: dict = field(default_factory=dict)

    def summary(self) -> str:
        metric = " ".join(f"{x:.6g}" for x in self.metric)
        out = f"rule={self.rule} decision={self.order}-QAM (k={self.level_index}) metric=[{metric}]"
        if self.dev_pos is not None:
            out += (" dev_pos=[" + " ".join(f"{x:.6g}" for x in self.dev_pos) + "]"
                    " dev_neg=[" + " ".join(f"{x:.6g}" for x in self.dev_neg) + "]")
        if self.flags:
            out += " flags=" + ",".join(self.flags)
        return out


# --- empirical CDF ---------------------------------------------------------

def ecdf_at(z, t: float) -> float:
    """Fraction of samples ``<= t``, by threshold-and-count (no sorting)."""
    z = np.asarray(z, dtype=float)
    if z.size == 0:
        raise EmptyInputError("no samples")
    return np.count_nonzero(z <= t) / z.size


def ecdf_counts(z: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Counts of samples ``<= points[l]`` along the last axis of ``z``."""
    z = np.asarray(z, dtype=float)
    out = np.empty(z.shape[:-1] + (len(points),), dtype=np.int64)
    for l, t in enumerate(points):
        out[..., l] = np.count_nonzero(z <= t, axis=-1)
    return out


def feature_op_counts(kind: FeatureKind, m: int) -> OpCounts:
    """Cost of producing the features from ``m`` complex samples.

    The magnitude is compared in squared form, costing two squarings and one
    addition per sample; quadrature features are free.
    """
    if FeatureKind.parse(kind) is FeatureKind.MAGNITUDE:
        return OpCounts(adds=m, multiplies=2 * m)
    return OpCounts()


# --- reduced-complexity rules ------------------------------------------------

def reduced_deviations(fn: np.ndarray, tps: TestPointSet) -> np.ndarray:
    """Signed deviations ``(-1)**eps * (F_N(t_ij) - F_j(t_ij))`` per pair entry.

    ``fn`` holds the ECDF at ``tps.points`` along its last axis.
    """
    _, jj, ee, slot = tps.triples()
    sign = np.where(ee == 0, 1.0, -1.0)
    return sign * (fn[..., slot] - tps.cdf_values[jj, slot])


def reduced_metrics(fn: np.ndarray, tps: TestPointSet) -> tuple[np.ndarray, np.ndarray]:
    """Per-level maxima of the positive (``eps=0``) and negative (``eps=1``) deviations."""
    dev = reduced_deviations(fn, tps)
    _, jj, ee, _ = tps.triples()
    k = tps.n_levels
    shape = fn.shape[:-1] + (k,)
    d0 = np.full(shape, -np.inf)
    d1 = np.full(shape, -np.inf)
    for j in range(k):
        for eps, target in ((0, d0), (1, d1)):
            sel = np.flatnonzero((jj == j) & (ee == eps))
            target[..., j] = dev[..., sel].max(axis=-1)
    return d0, d1


def reduced_scores(d0: np.ndarray, d1: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """KS-like ``max(|d0|, |d1|)`` and Kuiper-like ``|d0 + d1|`` metrics."""
    return np.maximum(np.abs(d0), np.abs(d1)), np.abs(d0 + d1)


def decide_reduced(fn: np.ndarray, tps: TestPointSet, rules: Sequence[str] = REDUCED_RULES
                   ) -> dict[str, np.ndarray]:
    """Decision maps for the reduced rules; returns 0-based level positions."""
    d0, d1 = reduced_metrics(fn, tps)
    ks, kuiper = reduced_scores(d0, d1)
    out = {}
    for rule in rules:
        if rule == "rcks":
            out[rule] = np.argmin(ks, axis=-1)
        elif rule == "rck":
            out[rule] = np.argmin(kuiper, axis=-1)
        else:
            raise ValueError(f"{rule!r} is not a reduced rule")
    return out


def _report(rule, metric, levels, orders, **kw) -> DecisionReport:
    choice = int(np.argmin(metric))
    return DecisionReport(rule=rule, metric=np.asarray(metric), choice=choice,
                          level_index=levels[choice], order=orders[choice], **kw)


def _classify_reduced(rule: str, z, tps: TestPointSet) -> DecisionReport:
    z = np.asarray(z, dtype=float).ravel()
    if z.size == 0:
        raise EmptyInputError("no samples")
    fn = ecdf_counts(z, tps.points) / z.size
    d0, d1 = reduced_metrics(fn, tps)
    ks, kuiper = reduced_scores(d0, d1)
    n, L = z.size, tps.n_effective
    ops = OpCounts(adds=n * L, compares=n * L)
    if tps.feature is FeatureKind.MAGNITUDE:
        ops += feature_op_counts(FeatureKind.MAGNITUDE, n)
    metric = kuiper if rule == "rck" else ks
    return _report(rule, metric, tps.levels, tps.orders, dev_pos=d0, dev_neg=d1,
                   ks_metric=ks, kuiper_metric=kuiper, op_counts=ops)


def classify_rck(z, tps: TestPointSet) -> DecisionReport:
    return _classify_reduced("rck", z, tps)


def classify_rcks(z, tps: TestPointSet) -> DecisionReport:
    return _classify_reduced("rcks", z, tps)


# --- full-ECDF distance rules -------------------------------------------------

def counting_sort(values: np.ndarray) -> tuple[np.ndarray, int]:
    """Merge sort that also returns the number of element comparisons."""
    a = [float(x) for x in values]
    compares = 0

    def merge(lo: list[float], hi: list[float]) -> list[float]:
        nonlocal compares
        out, i, j = [], 0, 0
        while i < len(lo) and j < len(hi):
            compares += 1
            if lo[i] <= hi[j]:
                out.append(lo[i]); i += 1
            else:
                out.append(hi[j]); j += 1
        out.extend(lo[i:]); out.extend(hi[j:])
        return out

    def sort(xs: list[float]) -> list[float]:
        if len(xs) <= 1:
            return xs
        mid = len(xs) // 2
        return merge(sort(xs[:mid]), sort(xs[mid:]))

    return np.array(sort(a)), compares


def full_metrics(z: np.ndarray, cdfs: Sequence[Callable], presorted: bool = False
                 ) -> tuple[np.ndarray, np.ndarray]:
    """One-sided sup deviations of the ECDF from each CDF, over the sample points.

    Returns ``(d_plus, d_minus)`` with ``d_plus = max_i(i/N - F(z_(i)))`` and
    ``d_minus = max_i(F(z_(i)) - (i-1)/N)``, shaped ``(..., K)``.
    """
    z = np.asarray(z, dtype=float)
    zs = z if presorted else np.sort(z, axis=-1)
    n = zs.shape[-1]
    if n == 0:
        raise EmptyInputError("no samples")
    upper = np.arange(1, n + 1) / n
    lower = np.arange(0, n) / n
    dp = np.empty(zs.shape[:-1] + (len(cdfs),))
    dm = np.empty_like(dp)
    for k, cdf in enumerate(cdfs):
        f = cdf(zs)
        dp[..., k] = np.max(upper - f, axis=-1)
        dm[..., k] = np.max(f - lower, axis=-1)
    return dp, dm


def _classify_full(rule: str, z, models: Sequence[CdfModel], cdfs=None) -> DecisionReport:
    models = sorted(models, key=lambda m: m.level_index)
    z = np.asarray(z, dtype=float).ravel()
    if z.size == 0:
        raise EmptyInputError("no samples")
    zs, sort_compares = counting_sort(z)
    dp, dm = full_metrics(zs, cdfs or [m.cdf for m in models], presorted=True)
    ks = np.maximum(dp, dm)
    kuiper = dp + dm
    n, k = z.size, len(models)
    ops = OpCounts(adds=sort_compares + 2 * k * n, compares=sort_compares)
    if models[0].feature is FeatureKind.MAGNITUDE:
        ops += feature_op_counts(FeatureKind.MAGNITUDE, n)
    metric = ks if rule == "ks" else kuiper
    return _report(rule, metric, tuple(m.level_index for m in models),
                   tuple(m.order for m in models), dev_pos=dp, dev_neg=dm,
                   ks_metric=ks, kuiper_metric=kuiper, op_counts=ops,
                   extra={"sort_compares": sort_compares})


def classify_full_ks(z, models: Sequence[CdfModel], cdfs=None) -> DecisionReport:
    return _classify_full("ks", z, models, cdfs)


def classify_full_kuiper(z, models: Sequence[CdfModel], cdfs=None) -> DecisionReport:
    return _classify_full("kuiper", z, models, cdfs)


# --- fourth-order cumulant -----------------------------------------------------

def constellation_c42(c: Constellation) -> float:
    """``E|c|^4 - |E c^2|^2 - 2 (E|c|^2)^2`` over the (equiprobable) alphabet."""
    p = c.points
    return float(np.mean(np.abs(p) ** 4) - np.abs(np.mean(p ** 2)) ** 2
                 - 2.0 * np.mean(np.abs(p) ** 2) ** 2)


def cumulant_statistic(r: np.ndarray, noise_var: float) -> tuple[np.ndarray, np.ndarray]:
    """Noise-corrected, power-normalised C42 estimate along the last axis.

    Returns ``(c_tilde, valid)``; ``valid`` is False where the estimated signal
    power does not exceed the noise floor.
    """
    r = np.asarray(r, dtype=np.complex128)
    a, b = r.real, r.imag
    aa, bb, ab = a * a, b * b, a * b
    sq_re, sq_im = aa - bb, ab + ab
    p2 = aa + bb
    p4 = sq_re * sq_re + sq_im * sq_im
    m = r.shape[-1]
    e4 = p4.sum(axis=-1) / m
    e2 = p2.sum(axis=-1) / m
    esq = (sq_re.sum(axis=-1) / m) ** 2 + (sq_im.sum(axis=-1) / m) ** 2
    c42 = e4 - esq - 2.0 * e2 ** 2
    denom = e2 - noise_var
    valid = denom > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        c_tilde = np.where(valid, c42 / np.where(valid, denom, 1.0) ** 2, np.nan)
    return c_tilde, valid


def decide_cumulant(r: np.ndarray, noise_var: float, targets: np.ndarray) -> np.ndarray:
    c_tilde, valid = cumulant_statistic(r, noise_var)
    dist = np.abs(c_tilde[..., None] - targets)
    return np.where(valid, np.argmin(np.nan_to_num(dist, nan=np.inf), axis=-1), 0)


def classify_cumulant(r, params: ChannelParams, constellations: Sequence[Constellation]
                      ) -> DecisionReport:
    r = np.asarray(r, dtype=np.complex128).ravel()
    if r.size < 4:
        raise EmptyInputError("cumulant rule needs at least 4 samples")
    cons = sorted(constellations, key=lambda c: c.order)
    targets = np.array([constellation_c42(c) for c in cons])
    c_tilde, valid = cumulant_statistic(r, params.noise_var)
    m = r.size
    # per sample: complex square (4 mul, 2 add), |r^2|^2 (2 mul, 1 add),
    # |r|^2 from the squares (1 add), four running sums (4 add)
    ops = OpCounts(adds=8 * m, multiplies=6 * m)
    levels = tuple(c.level_index for c in cons)
    orders = tuple(c.order for c in cons)
    if not bool(valid):
        return DecisionReport(rule="cm", metric=np.full(len(cons), np.nan), choice=0,
                              level_index=levels[0], order=orders[0], op_counts=ops,
                              flags=("below_noise_floor",), extra={"c_tilde": float("nan")})
    metric = np.abs(float(c_tilde) - targets)
    return _report("cm", metric, levels, orders, op_counts=ops,
                   extra={"c_tilde": float(c_tilde)})


# --- maximum likelihood ----------------------------------------------------------

def ml_loglik(r: np.ndarray, params: ChannelParams, constellations: Sequence[Constellation]
              ) -> np.ndarray:
    """Log-likelihood of ``r`` (last axis = samples) under each level, ``(..., K)``."""
    r = np.asarray(r, dtype=np.complex128)
    s2 = params.noise_var
    m = r.shape[-1]
    out = []
    for c in constellations:
        d = np.abs(r[..., None] - params.amplitude * c.points) ** 2
        ll = logsumexp(-d / s2, axis=-1).sum(axis=-1)
        out.append(ll - m * (math.log(c.order) + math.log(math.pi * s2)))
    return np.stack(out, axis=-1)


def classify_ml(r, params: ChannelParams, constellations: Sequence[Constellation]
                ) -> DecisionReport:
    r = np.asarray(r, dtype=np.complex128).ravel()
    if r.size == 0:
        raise EmptyInputError("no samples")
    cons = sorted(constellations, key=lambda c: c.order)
    ll = ml_loglik(r, params, cons)
    return _report("ml", -ll, tuple(c.level_index for c in cons),
                   tuple(c.order for c in cons), extra={"loglik": ll})
