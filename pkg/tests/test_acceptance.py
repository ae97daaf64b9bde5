"""Acceptance criteria, one test per criterion; each prints a PASS/FAIL line."""

import itertools
import math
import os
from fractions import Fraction

import numpy as np
import pytest
from scipy.special import gammaln

from conftest import ACCEPTANCE_LINES
from modlevel.bank import CdfBank
from modlevel.cdf import build_cdf, empirical_from_samples, ks_distance
from modlevel.classifiers import (classify_cumulant, classify_rck, classify_rcks, constellation_c42,
                                  cumulant_statistic, ecdf_counts)
from modlevel.exact import cumulative_chunks, exact_confusions, n_compositions
from modlevel.signal import (ChannelParams, FeatureKind, apply_channel, extract_features,
                             qam_constellation, qam_family, sample_symbols, trial_rng)
from modlevel.simulate import Nominal, mc_confusion

pytestmark = pytest.mark.acceptance

SEED = 20240611
WORKERS = os.cpu_count() or 1


def report(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def nominal_at(snr_db: float, rules, feature="mag") -> Nominal:
    bank = CdfBank.build(snr_grid=[snr_db], features=[feature])
    return Nominal.from_bank(bank, snr_db, feature, rules)


def run(snr_db, rules, m, trials, true_snr=None, jitter_deg=0.0, feature="mag", nominal=None):
    nominal = nominal or nominal_at(snr_db, rules, feature)
    true = ChannelParams.from_snr(snr_db if true_snr is None else true_snr, 1.0,
                                  math.radians(jitter_deg))
    return mc_confusion(nominal, true, rules, m, trials, SEED, WORKERS)


def diff_se(a, b) -> float:
    return math.hypot(a.p_correct_stderr, b.p_correct_stderr)


def test_exact_matches_monte_carlo():
    rules = ("rck", "rcks")
    nominal = nominal_at(12.0, rules)
    exact = exact_confusions(nominal.tps, rules, n_samples=50)
    mc = run(12.0, rules, 50, 1_000_000, nominal=nominal)
    worst = {}
    ok = True
    for rule in rules:
        p = exact[rule].confusion
        se = np.sqrt(p * (1 - p) / mc[rule].trials)
        dev = np.abs(mc[rule].confusion - p)
        z = np.where(se > 0, dev / np.where(se > 0, se, 1), np.where(dev > 0, np.inf, 0))
        worst[rule] = float(z.max())
        ok &= bool(np.all(dev <= 3 * se)) and bool(np.allclose(exact[rule].mass, 1, atol=1e-9))
    report(1, "exact vs 1e6-trial MC (M=50, 12 dB, mag)", ok,
           " ".join(f"{r}: max |dev|/se={worst[r]:.2f}" for r in rules)
           + f" compositions={exact['rck'].n_compositions}")
    assert ok


def test_high_snr_convergence():
    rules = ("rck", "rcks", "ks", "ml", "cm")
    res = run(24.0, rules, 50, 10_000)
    high = {r: res[r] for r in rules if r != "cm"}
    ok_high = all(v.p_correct >= 0.99 - 2 * v.p_correct_stderr for v in high.values())
    best = max(high.values(), key=lambda v: v.p_correct)
    cm = res["cm"]
    ok_cm = best.p_correct - cm.p_correct >= 0.02 - 2 * diff_se(best, cm)
    report(2, "24 dB convergence, Cm trails", ok_high and ok_cm,
           " ".join(f"{r}={v.p_correct:.4f}" for r, v in res.items()))
    assert ok_high and ok_cm


def test_mid_snr_ordering():
    rules = ("rck", "rcks", "cm")
    res = run(12.0, rules, 50, 10_000)
    rck = res["rck"]
    ok = all(rck.p_correct >= res[o].p_correct - 2 * diff_se(rck, res[o]) for o in ("rcks", "cm"))
    report(3, "12 dB ordering rcK >= rcKS, Cm", ok,
           " ".join(f"{r}={v.p_correct:.4f}" for r, v in res.items()))
    assert ok


def test_sample_size_study():
    # ML needs the full channel model and is left out of the ranking
    rules = ("rck", "rcks", "ks", "cm")
    nominal = nominal_at(12.0, rules)
    parts, ok = [], True
    for m in (50, 100, 200, 300):
        res = run(12.0, rules, m, 10_000, nominal=nominal)
        rck = res["rck"]
        best_ok = all(rck.p_correct >= res[o].p_correct - 2 * diff_se(rck, res[o])
                      for o in rules[1:])
        ok &= best_ok
        parts.append(f"M={m}: rck={rck.p_correct:.4f} best_other="
                     f"{max(res[o].p_correct for o in rules[1:]):.4f}")
    res = run(12.0, ("rck", "cm"), 1000, 10_000, nominal=nominal)
    gap = res["rck"].p_correct - res["cm"].p_correct
    ok &= gap >= 0.03
    parts.append(f"M=1000: rck-cm={gap:.4f} (se {diff_se(res['rck'], res['cm']):.4f})")
    report(4, "sample-size study", ok, "; ".join(parts))
    assert ok


def test_mismatch_robustness():
    rules = ("rck", "rcks", "ks", "ml")
    nominal = nominal_at(12.0, rules)
    matched = run(12.0, rules, 50, 10_000, nominal=nominal)
    drops = {r: 0.0 for r in rules}
    for true_snr in range(6, 19, 2):
        res = run(12.0, rules, 50, 10_000, true_snr=true_snr, nominal=nominal)
        for r in rules:
            drops[r] = max(drops[r], matched[r].p_correct - res[r].p_correct)
    robust = [drops[r] for r in ("rck", "rcks", "ks")]
    ok = max(robust) <= 0.10 and drops["ml"] > max(robust)
    report(5, "mismatch robustness (nominal 12 dB, true 6..18 dB)", ok,
           " ".join(f"drop_{r}={d:.4f}" for r, d in drops.items()))
    assert ok


def test_jitter_invariance():
    phis = (0, 10, 20, 30, 45)
    acc = {}
    for feature in ("mag", "quad"):
        nominal = nominal_at(15.0, ("rck",), feature)
        acc[feature] = [run(15.0, ("rck",), 50, 10_000, jitter_deg=phi, feature=feature,
                            nominal=nominal)["rck"].p_correct for phi in phis]
    variation = max(acc["mag"]) - min(acc["mag"])
    degrade = acc["quad"][0] - acc["quad"][-1]
    ok = variation <= 0.02 and degrade >= 0.10
    report(6, "jitter invariance at 15 dB", ok,
           f"mag variation={variation:.4f} quad drop at 45deg={degrade:.4f}")
    assert ok


def test_cumulant_oracle():
    expected = {4: -1.0, 16: -0.68, 64: -0.619}
    ok = True
    detail = []
    for order, value in expected.items():
        c = qam_constellation(order)
        levels = [Fraction(2 * i - int(math.isqrt(order)) + 1) for i in range(int(math.isqrt(order)))]
        pts = [(a, b) for a in levels for b in levels]
        e2 = sum(a * a + b * b for a, b in pts) / order
        e4 = sum((a * a + b * b) ** 2 for a, b in pts) / order
        esq_re = sum(a * a - b * b for a, b in pts) / order
        esq_im = sum(2 * a * b for a, b in pts) / order
        brute = (e4 - esq_re ** 2 - esq_im ** 2 - 2 * e2 ** 2) / e2 ** 2
        analytic = constellation_c42(c)
        ok &= round(analytic, 4) == round(float(brute), 4) == round(value, 4)
        detail.append(f"{order}-QAM {analytic:.4f}")
    c4 = qam_constellation(4)
    c_tilde, valid = cumulant_statistic(c4.points, 0.0)
    ok &= bool(valid) and float(c_tilde) == -1.0
    detail.append(f"noiseless 4-QAM c~={float(c_tilde)!r}")
    report(7, "cumulant oracle", ok, " ".join(detail))
    assert ok


def test_op_counts():
    bank = CdfBank.build(snr_grid=[12.0])
    ok = True
    detail = []
    for m in (10, 50, 200):
        rng = trial_rng(SEED, m)
        r = apply_channel(sample_symbols(bank.constellations[1], m, rng),
                          bank.nominal_params(12.0), rng)
        z = extract_features(r, "quad")
        tps = bank.test_points(12.0, "quad")
        L = tps.n_effective
        for rep in (classify_rck(z, tps), classify_rcks(z, tps)):
            ok &= rep.op_counts.adds == 2 * m * L and rep.op_counts.multiplies == 0
        cm = classify_cumulant(r, bank.nominal_params(12.0), bank.constellations)
        ok &= cm.op_counts.multiplies == 6 * m
        detail.append(f"M={m} L={L}: rc adds={2 * m * L} mult=0, cm mult={6 * m}")
    report(8, "op counts vs closed forms", ok, "; ".join(detail))
    assert ok


def test_property_suites():
    detail = []
    # multinomial mass over all compositions of 50 into 7 regions (6 test points)
    p = np.random.default_rng(SEED).dirichlet(np.ones(7))
    n, L = 50, 6
    logp = np.log(p)
    lgn = gammaln(np.arange(n + 1) + 1)
    total, visited = 0.0, 0
    for c in cumulative_chunks(n, L):
        occ = np.diff(c.astype(np.intp), axis=1, prepend=0, append=n)
        visited += occ.shape[0]
        total += float(np.exp(gammaln(n + 1) - lgn[occ].sum(axis=1) + occ @ logp).sum())
    ok_pmf = visited == n_compositions(n, L + 1) and abs(total - 1) <= 1e-9
    detail.append(f"pmf sum-1={total - 1:.2e} over {visited}")

    # analytic CDFs against 1e6-sample ECDFs
    worst = 0.0
    for level, snr, feature in itertools.product(qam_family((4, 16, 64)), (0, 6, 12, 18),
                                                 ("mag", "quad")):
        params = ChannelParams.from_snr(snr)
        rng = trial_rng(SEED, level.order, snr, feature == "mag")
        z = extract_features(apply_channel(sample_symbols(level, 10 ** 6, rng), params, rng),
                             feature)
        d = ks_distance(empirical_from_samples(z), build_cdf(level, params, FeatureKind.parse(feature)))
        worst = max(worst, d)
    ok_cdf = worst <= 0.005
    detail.append(f"max KS={worst:.5f}")

    # exact symmetry of test points
    ok_sym = True
    for feature in ("mag", "quad"):
        for snr in (0.0, 12.0, 24.0):
            tps = CdfBank.build(snr_grid=[snr], features=[feature]).test_points(snr, feature)
            for i, j in itertools.permutations(tps.levels, 2):
                ok_sym &= tps.lookup(j, i, 0).value == tps.lookup(i, j, 1).value
    detail.append(f"symmetry={'exact' if ok_sym else 'broken'}")

    # threshold-count ECDF against a sorting oracle
    rng = np.random.default_rng(SEED)
    mismatches = 0
    for _ in range(10_000):
        size = int(rng.integers(1, 60))
        z = np.round(rng.normal(size=size), int(rng.integers(1, 4)))
        pts = np.sort(np.round(rng.normal(size=int(rng.integers(1, 8))), 2))
        zs = sorted(z.tolist())
        oracle = [next((k for k, v in enumerate(zs) if v > t), len(zs)) for t in pts]
        mismatches += int(not np.array_equal(ecdf_counts(z, pts), oracle))
    ok_ecdf = mismatches == 0
    detail.append(f"ecdf mismatches={mismatches}/10000")

    ok = ok_pmf and ok_cdf and ok_sym and ok_ecdf
    report(9, "property suites", ok, " ".join(detail))
    assert ok
