"""Parameter sweeps over SNR, sample size, SNR mismatch and phase jitter.

Each sweep returns rows with the columns in :data:`CSV_COLUMNS`; every row
carries the seed, the trial count and a standard error. ``p_correct`` is the
probability of correct classification averaged over equiprobable levels.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .bank import CdfBank
from .cdf import build_cdf
from .classifiers import (ALL_RULES, REDUCED_RULES, classify_cumulant, classify_full_ks,
                          classify_full_kuiper, classify_rck, classify_rcks)
from .exact import DEFAULT_MAX_COMPOSITIONS, exact_confusions, n_compositions
from .signal import (ChannelParams, FeatureKind, apply_channel, extract_features,
                     sample_symbols, trial_rng)
from .simulate import DEFAULT_TABLE_POINTS, Nominal, empirical_region_probs, mc_confusion
from .testpoints import region_probabilities

SCHEMA_VERSION = "modlevel-sweep/1"
CSV_COLUMNS = ("sweep", "rule", "feature", "M", "nominal_snr_db", "true_snr_db",
               "jitter_deg", "trials", "seed", "p_correct", "stderr", "p_correct_exact")
SWEEPS = ("snr", "samples", "mismatch", "jitter")


@dataclass
class ExperimentConfig:
    seed: int
    levels: tuple[int, ...] = (4, 16, 64)
    features: tuple[str, ...] = ("mag",)
    rules: tuple[str, ...] = ("rck", "rcks", "ks", "cm", "ml")
    m: int = 50
    m_sweep: tuple[int, ...] = (50, 100, 200, 300, 500, 1000)
    snr_db: float = 12.0
    snr_sweep: tuple[float, ...] = tuple(float(x) for x in range(0, 25, 3))
    true_snr_sweep: tuple[float, ...] = tuple(float(x) for x in range(6, 19, 2))
    jitter_snr_db: float = 15.0
    jitter_deg_sweep: tuple[float, ...] = (0.0, 5.0, 10.0, 20.0, 30.0, 45.0)
    jitter_features: tuple[str, ...] = ("mag", "quad")
    amplitude: float = 1.0
    trials: int = 10_000
    exact: bool = True
    exact_max_m: int = 60
    max_compositions: int = DEFAULT_MAX_COMPOSITIONS
    empirical_true_probs: bool = False
    table_points: int = DEFAULT_TABLE_POINTS
    workers: int = 1

    def __post_init__(self):
        if self.seed is None:
            raise ValueError("a seed is required")
        self.seed = int(self.seed)
        for name in ("levels", "features", "rules", "m_sweep", "snr_sweep", "true_snr_sweep",
                     "jitter_deg_sweep", "jitter_features"):
            value = tuple(getattr(self, name))
            if not value:
                raise ValueError(f"{name} must not be empty")
            setattr(self, name, value)
        for rule in self.rules:
            if rule not in ALL_RULES:
                raise ValueError(f"unknown rule {rule!r}")
        for f in self.features + self.jitter_features:
            FeatureKind.parse(f)
        if self.trials < 1:
            raise ValueError("trials must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


class _BankCache:
    """Nominal models on demand, from a loaded bank or built per SNR."""

    def __init__(self, cfg: ExperimentConfig, bank: CdfBank | None = None):
        self.cfg = cfg
        self.bank = bank
        self._built: dict[float, CdfBank] = {}

    def nominal_snr(self, snr_db: float) -> float:
        return self.bank.nearest_snr(snr_db) if self.bank is not None else float(snr_db)

    def bank_for(self, snr_db: float) -> CdfBank:
        if self.bank is not None:
            return self.bank
        if snr_db not in self._built:
            self._built[snr_db] = CdfBank.build(self.cfg.levels, [snr_db],
                                                (FeatureKind.MAGNITUDE, FeatureKind.QUADRATURE),
                                                with_testpoints=False)
        return self._built[snr_db]

    def nominal(self, snr_db: float, feature, rules) -> Nominal:
        snr = self.nominal_snr(snr_db)
        return Nominal.from_bank(self.bank_for(snr), snr, feature, rules, self.cfg.table_points)


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, float):
        return repr(round(x, 12))
    return str(x)


def _exact_columns(cfg: ExperimentConfig, nominal: Nominal, feature: FeatureKind, m: int,
                   true_params: ChannelParams, rules: Sequence[str]) -> dict[str, float]:
    """Exact ``p_correct`` per reduced rule, when the enumeration fits the budget."""
    red = [r for r in rules if r in REDUCED_RULES]
    if not (cfg.exact and red and m <= cfg.exact_max_m):
        return {}
    tps = nominal.tps
    n = feature.n_features(m)
    if n_compositions(n, tps.n_effective + 1) > cfg.max_compositions:
        return {}
    if feature is FeatureKind.MAGNITUDE:
        # the magnitude law does not depend on the jitter
        probs = np.vstack([region_probabilities(tps, build_cdf(c, true_params.with_jitter(0.0), feature))
                           for c in nominal.constellations])
    elif true_params.jitter_bound == 0:
        probs = np.vstack([region_probabilities(tps, build_cdf(c, true_params, feature))
                           for c in nominal.constellations])
    elif cfg.empirical_true_probs:
        probs = empirical_region_probs(nominal.constellations, true_params, feature, tps,
                                       1_000_000, cfg.seed)
    else:
        return {}
    res = exact_confusions(tps, red, probs, n, cfg.max_compositions, cfg.workers)
    return {rule: r.p_correct for rule, r in res.items()}


def _point(cfg: ExperimentConfig, cache: _BankCache, sweep: str, feature, m: int,
           nominal_snr: float, true_snr: float, jitter_deg: float) -> list[dict]:
    feature = FeatureKind.parse(feature)
    nominal = cache.nominal(nominal_snr, feature, cfg.rules)
    true_params = ChannelParams.from_snr(true_snr, cfg.amplitude, math.radians(jitter_deg))
    mc = mc_confusion(nominal, true_params, cfg.rules, m, cfg.trials, cfg.seed, cfg.workers)
    exact = _exact_columns(cfg, nominal, feature, m, true_params, cfg.rules)
    rows = []
    for rule in cfg.rules:
        res = mc[rule]
        rows.append({
            "sweep": sweep, "rule": rule, "feature": feature.value, "M": m,
            "nominal_snr_db": cache.nominal_snr(nominal_snr), "true_snr_db": float(true_snr),
            "jitter_deg": float(jitter_deg), "trials": cfg.trials, "seed": cfg.seed,
            "p_correct": res.p_correct, "stderr": res.p_correct_stderr,
            "p_correct_exact": exact.get(rule),
        })
    return rows


def sweep_snr(cfg: ExperimentConfig, bank: CdfBank | None = None) -> list[dict]:
    """Matched nominal/true SNR across ``cfg.snr_sweep`` at ``cfg.m`` samples."""
    cache = _BankCache(cfg, bank)
    return [row for f in cfg.features for snr in cfg.snr_sweep
            for row in _point(cfg, cache, "snr", f, cfg.m, snr, snr, 0.0)]


def sweep_samples(cfg: ExperimentConfig, bank: CdfBank | None = None) -> list[dict]:
    cache = _BankCache(cfg, bank)
    return [row for f in cfg.features for m in cfg.m_sweep
            for row in _point(cfg, cache, "samples", f, m, cfg.snr_db, cfg.snr_db, 0.0)]


def sweep_mismatch(cfg: ExperimentConfig, bank: CdfBank | None = None) -> list[dict]:
    """Decisions from the ``cfg.snr_db`` bank while the channel runs at each true SNR."""
    cache = _BankCache(cfg, bank)
    return [row for f in cfg.features for snr in cfg.true_snr_sweep
            for row in _point(cfg, cache, "mismatch", f, cfg.m, cfg.snr_db, snr, 0.0)]


def sweep_jitter(cfg: ExperimentConfig, bank: CdfBank | None = None) -> list[dict]:
    cache = _BankCache(cfg, bank)
    return [row for f in cfg.jitter_features for phi in cfg.jitter_deg_sweep
            for row in _point(cfg, cache, "jitter", f, cfg.m, cfg.jitter_snr_db,
                              cfg.jitter_snr_db, phi)]


SWEEP_FUNCS = {"snr": sweep_snr, "samples": sweep_samples, "mismatch": sweep_mismatch,
               "jitter": sweep_jitter}
SWEEP_AXIS = {"snr": "true_snr_db", "samples": "M", "mismatch": "true_snr_db",
              "jitter": "jitter_deg"}


def rows_to_csv(rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def read_sweep_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        rows = []
        for raw in reader:
            row: dict = dict(raw)
            for key in ("M", "trials", "seed"):
                row[key] = int(row[key])
            for key in ("nominal_snr_db", "true_snr_db", "jitter_deg", "p_correct", "stderr"):
                row[key] = float(row[key])
            row["p_correct_exact"] = float(row["p_correct_exact"]) if row["p_correct_exact"] else None
            rows.append(row)
    return rows


def write_sweep(rows: list[dict], path: str | Path, cfg: ExperimentConfig, sweep: str) -> Path:
    """Write the CSV and a ``<name>.manifest.json`` beside it; returns the manifest path."""
    path = Path(path)
    path.write_text(rows_to_csv(rows))
    manifest = {"schema": SCHEMA_VERSION, "sweep": sweep, "csv": path.name,
                "config_sha256": cfg.digest(), "config": cfg.to_dict(), "rows": len(rows)}
    mpath = path.with_name(path.stem + ".manifest.json")
    mpath.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return mpath


# --- complexity -------------------------------------------------------------------------

TABLE_FORMULAS = {
    ("cm", "any"): ("6M", "6M", "K"),
    ("rc", "quad"): ("0", "2ML", "WL(K+1)"),
    ("full", "quad"): ("0", "2M(log2(2M)+2K)", "KWN̄"),
    ("rc", "mag"): ("2M", "M(L+1)", "WL(K+1)"),
    ("full", "mag"): ("2M", "M(log2(M)+2K+1)", "KWN̄"),
}


def _formula_values(family: str, feature: str, m: int, k: int, l: int, w: int, n_bar: int):
    lg = math.log2
    if family == "cm":
        return 6 * m, 6 * m, k
    if family == "rc" and feature == "quad":
        return 0, 2 * m * l, w * l * (k + 1)
    if family == "rc":
        return 2 * m, m * (l + 1), w * l * (k + 1)
    if feature == "quad":
        return 0, 2 * m * (lg(2 * m) + 2 * k), k * w * n_bar
    return 2 * m, m * (lg(m) + 2 * k + 1), k * w * n_bar


def report_complexity(m: int = 50, bank: CdfBank | None = None, snr_db: float = 12.0,
                      n_bar: int = DEFAULT_TABLE_POINTS, seed: int = 0) -> list[dict]:
    """Measured operation counts of one call per rule next to the closed-form costs."""
    if bank is None:
        bank = CdfBank.build()
    snr = bank.nearest_snr(snr_db)
    k, w = bank.n_levels, len(bank.snr_grid)
    rng = trial_rng(seed, 0)
    c = bank.constellations[-1]
    r = apply_channel(sample_symbols(c, m, rng), bank.nominal_params(snr), rng)
    rows = []
    for feature in bank.features:
        z = extract_features(r, feature)
        tps = bank.test_points(snr, feature)
        models = bank.models(snr, feature)
        l_eff = tps.n_effective
        calls = [("rc", "rck", classify_rck(z, tps)), ("rc", "rcks", classify_rcks(z, tps)),
                 ("full", "ks", classify_full_ks(z, models)),
                 ("full", "kuiper", classify_full_kuiper(z, models))]
        for family, rule, rep in calls:
            mult_f, add_f, mem_f = _formula_values(family, feature.value, m, k, l_eff, w, n_bar)
            mem = bank.memory_numbers(feature) if family == "rc" else k * w * n_bar
            formula = TABLE_FORMULAS[(family, feature.value)]
            rows.append({"rule": rule, "feature": feature.value, "M": m, "K": k, "L": l_eff,
                         "W": w, "N_bar": n_bar,
                         "multiplies": rep.op_counts.multiplies, "multiplies_formula": mult_f,
                         "adds": rep.op_counts.adds, "adds_formula": add_f,
                         "memory": mem, "memory_formula": mem_f,
                         "formula": "mult={} add={} mem={}".format(*formula)})
    rep = classify_cumulant(r, bank.nominal_params(snr), bank.constellations)
    mult_f, add_f, mem_f = _formula_values("cm", "any", m, k, 0, w, n_bar)
    rows.append({"rule": "cm", "feature": "complex", "M": m, "K": k, "L": 0, "W": w,
                 "N_bar": n_bar, "multiplies": rep.op_counts.multiplies,
                 "multiplies_formula": mult_f, "adds": rep.op_counts.adds, "adds_formula": add_f,
                 "memory": k, "memory_formula": mem_f,
                 "formula": "mult={} add={} mem={}".format(*TABLE_FORMULAS[("cm", "any")])})
    return rows


COMPLEXITY_COLUMNS = ("rule", "feature", "M", "K", "L", "W", "N_bar", "multiplies",
                      "multiplies_formula", "adds", "adds_formula", "memory", "memory_formula",
                      "formula")


def complexity_to_csv(rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COMPLEXITY_COLUMNS)
    for row in rows:
        w.writerow([_fmt(row[c]) if not isinstance(row[c], float) else f"{row[c]:.2f}"
                    for c in COMPLEXITY_COLUMNS])
    return buf.getvalue()
