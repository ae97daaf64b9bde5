"""Monte Carlo confusion matrices: sample, channel, features, classify.

Trials run in fixed blocks of ``BLOCK`` with one generator per
``(seed, true level position, block index)``, so results depend only on the
seed and never on how blocks are spread across workers. All rules in a call
see the same received samples.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bank import CdfBank
from .cdf import CdfTable
from .classifiers import (ALL_RULES, FULL_RULES, REDUCED_RULES, constellation_c42,
                          decide_cumulant, decide_reduced, ecdf_counts, full_metrics,
                          ml_loglik)
from .signal import (ChannelParams, Constellation, FeatureKind, apply_channel,
                     extract_features, sample_symbols, trial_rng)
from .testpoints import TestPointSet

BLOCK = 1000
DEFAULT_TABLE_POINTS = 10_000
_ML_CHUNK_ELEMENTS = 1 << 22


@dataclass
class Nominal:
    """Everything the classifiers are allowed to know: the nominal-SNR bank slice."""

    constellations: tuple[Constellation, ...]
    params: ChannelParams
    feature: FeatureKind
    tps: TestPointSet
    tables: tuple[CdfTable, ...] = ()
    c42: np.ndarray = field(default_factory=lambda: np.array([]))

    @classmethod
    def from_bank(cls, bank: CdfBank, snr_db: float, feature, rules: Sequence[str] = ALL_RULES,
                  table_points: int = DEFAULT_TABLE_POINTS) -> "Nominal":
        feature = FeatureKind.parse(feature)
        tables = ()
        if any(r in FULL_RULES for r in rules):
            tables = tuple(m.tabulate(table_points) for m in bank.models(snr_db, feature))
        return cls(constellations=bank.constellations, params=bank.nominal_params(snr_db),
                   feature=feature, tps=bank.test_points(snr_db, feature), tables=tables,
                   c42=np.array([constellation_c42(c) for c in bank.constellations]))


@dataclass
class McResult:
    rule: str
    counts: np.ndarray
    trials: int
    seed: int

    @property
    def confusion(self) -> np.ndarray:
        return self.counts / self.trials

    @property
    def stderr(self) -> np.ndarray:
        q = self.confusion
        return np.sqrt(q * (1.0 - q) / self.trials)

    @property
    def p_correct(self) -> float:
        return float(np.mean(np.diag(self.confusion)))

    @property
    def p_correct_stderr(self) -> float:
        d = np.diag(self.confusion)
        return float(np.sqrt(np.sum(d * (1.0 - d) / self.trials)) / d.size)


def _decide_block(r: np.ndarray, nominal: Nominal, rules: Sequence[str]) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    needs_z = any(rule in REDUCED_RULES or rule in FULL_RULES for rule in rules)
    z = extract_features(r, nominal.feature) if needs_z else None
    red = [rule for rule in rules if rule in REDUCED_RULES]
    if red:
        fn = ecdf_counts(z, nominal.tps.points) / z.shape[-1]
        out.update(decide_reduced(fn, nominal.tps, red))
    if any(rule in FULL_RULES for rule in rules):
        dp, dm = full_metrics(z, nominal.tables)
        if "ks" in rules:
            out["ks"] = np.argmin(np.maximum(dp, dm), axis=-1)
        if "kuiper" in rules:
            out["kuiper"] = np.argmin(dp + dm, axis=-1)
    if "cm" in rules:
        out["cm"] = decide_cumulant(r, nominal.params.noise_var, nominal.c42)
    if "ml" in rules:
        biggest = max(c.order for c in nominal.constellations)
        step = max(1, _ML_CHUNK_ELEMENTS // (r.shape[-1] * biggest))
        ll = np.concatenate([ml_loglik(r[i:i + step], nominal.params, nominal.constellations)
                             for i in range(0, r.shape[0], step)])
        out["ml"] = np.argmax(ll, axis=-1)
    return out


def _run_block(args) -> np.ndarray:
    (seed, k_pos, block, size, cons, true_params, m, nominal, rules) = args
    rng = trial_rng(seed, k_pos, block)
    s = sample_symbols(cons, m, rng, size=(size,))
    r = apply_channel(s, true_params, rng)
    dec = _decide_block(r, nominal, rules)
    k = len(nominal.constellations)
    return np.stack([np.bincount(dec[rule], minlength=k) for rule in rules])


def mc_confusion(nominal: Nominal, true_params: ChannelParams, rules: Sequence[str],
                 m: int, trials: int, seed: int, workers: int = 1,
                 constellations: Sequence[Constellation] | None = None
                 ) -> dict[str, McResult]:
    """Estimate ``Pr(decide kappa | true k)`` for each rule from ``trials`` runs per level.

    ``true_params`` drive the simulated channel; decisions only use
    ``nominal``, which is how SNR mismatch, attenuation and jitter enter.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rules = tuple(rules)
    for rule in rules:
        if rule not in ALL_RULES:
            raise ValueError(f"unknown rule {rule!r}")
    cons = tuple(constellations or nominal.constellations)
    k = len(nominal.constellations)
    jobs = []
    for k_pos, c in enumerate(cons):
        for block, lo in enumerate(range(0, trials, BLOCK)):
            jobs.append((seed, k_pos, block, min(BLOCK, trials - lo), c, true_params, m,
                         nominal, rules))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_block, jobs, chunksize=4))
    else:
        results = [_run_block(j) for j in jobs]
    counts = np.zeros((len(rules), len(cons), k), dtype=np.int64)
    for job, res in zip(jobs, results):
        counts[:, job[1]] += res
    return {rule: McResult(rule, counts[i], trials, seed) for i, rule in enumerate(rules)}


def empirical_region_probs(constellations: Sequence[Constellation], params: ChannelParams,
                           feature, tps: TestPointSet, n_samples: int, seed: int) -> np.ndarray:
    """Region probabilities per level estimated from simulated features.

    Used as the true-channel input of the exact analysis when no analytic
    law exists (quadrature features under phase jitter).
    """
    rows = []
    for k_pos, c in enumerate(constellations):
        rng = trial_rng(seed, 1_000_003, k_pos)
        feature = FeatureKind.parse(feature)
        m = n_samples if feature is FeatureKind.MAGNITUDE else (n_samples + 1) // 2
        z = extract_features(apply_channel(sample_symbols(c, m, rng), params, rng), feature)
        regions = tps.region_of(z)
        rows.append(np.bincount(regions, minlength=tps.n_effective + 1) / z.size)
    return np.vstack(rows)
