"""Command line entry point: ``modlevel <command> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .bank import CdfBank, load_bank, save_bank
from .cdf import build_cdf
from .classifiers import (ALL_RULES, classify_cumulant, classify_full_ks, classify_full_kuiper,
                          classify_ml, classify_rck, classify_rcks)
from .exact import exact_confusion
from .experiments import (SWEEP_FUNCS, ExperimentConfig, complexity_to_csv, report_complexity,
                          write_sweep)
from .signal import (ChannelParams, FeatureKind, apply_channel, extract_features,
                     qam_constellation, read_samples_csv, sample_symbols, trial_rng,
                     write_samples_csv)
from .simulate import empirical_region_probs
from .testpoints import region_probabilities

log = logging.getLogger("modlevel")


def parse_range(text: str) -> list[float]:
    """``"0:3:24"`` -> 0, 3, ..., 24; ``"6,9,12"`` -> that list."""
    if ":" in text:
        start, step, stop = (float(x) for x in text.split(":"))
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(n)]
    return [float(x) for x in text.split(",") if x]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def cmd_bank_build(args) -> int:
    bank = CdfBank.build(_ints(args.levels), parse_range(args.snr_grid), args.features.split(","))
    save_bank(bank, args.out)
    log.info("wrote %s (K=%d, W=%d)", args.out, bank.n_levels, len(bank.snr_grid))
    return 0


def cmd_testpoints(args) -> int:
    bank = load_bank(args.bank)
    tps = bank.test_points(bank.nearest_snr(args.snr), args.feature)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["i", "j", "eps", "t", "deviation"])
    for p in tps.pairs:
        w.writerow([p.i, p.j, p.eps, repr(p.value), repr(p.deviation)])
    if args.out:
        out.close()
    return 0


def cmd_classify(args) -> int:
    bank = load_bank(args.bank)
    snr = bank.nearest_snr(args.nominal_snr)
    r = read_samples_csv(args.input)
    feature = FeatureKind.parse(args.feature)
    z = extract_features(r, feature)
    rule = args.rule
    if rule == "rck":
        rep = classify_rck(z, bank.test_points(snr, feature))
    elif rule == "rcks":
        rep = classify_rcks(z, bank.test_points(snr, feature))
    elif rule == "ks":
        rep = classify_full_ks(z, bank.models(snr, feature))
    elif rule == "kuiper":
        rep = classify_full_kuiper(z, bank.models(snr, feature))
    elif rule == "cm":
        rep = classify_cumulant(r, bank.nominal_params(snr), bank.constellations)
    else:
        rep = classify_ml(r, bank.nominal_params(snr), bank.constellations)
    print(rep.summary())
    return 0


def cmd_simulate(args) -> int:
    rng = trial_rng(args.seed, 0)
    c = qam_constellation(args.order)
    params = ChannelParams.from_snr(args.snr, args.amplitude, math.radians(args.jitter_deg))
    write_samples_csv(args.out, apply_channel(sample_symbols(c, args.M, rng), params, rng))
    return 0


def _load_config(args) -> ExperimentConfig:
    data = {}
    if args.config:
        data.update(json.loads(Path(args.config).read_text()))
    overrides = {
        "seed": args.seed, "trials": args.trials, "m": args.M, "snr_db": args.snr,
        "workers": args.workers, "amplitude": args.amplitude,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    if args.rules:
        data["rules"] = args.rules.split(",")
    if args.features:
        data["features"] = args.features.split(",")
        data["jitter_features"] = args.features.split(",")
    if args.levels:
        data["levels"] = _ints(args.levels)
    if args.sweep_values:
        key = {"snr": "snr_sweep", "samples": "m_sweep", "mismatch": "true_snr_sweep",
               "jitter": "jitter_deg_sweep"}[args.kind]
        values = parse_range(args.sweep_values)
        data[key] = [int(v) for v in values] if args.kind == "samples" else values
    if args.kind == "jitter" and args.snr is not None:
        data["jitter_snr_db"] = args.snr
    if args.no_exact:
        data["exact"] = False
    if args.empirical_true_probs:
        data["empirical_true_probs"] = True
    if "seed" not in data:
        raise SystemExit("--seed is required for sweeps")
    return ExperimentConfig.from_dict(data)


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    bank = load_bank(args.bank) if args.bank else None
    rows = SWEEP_FUNCS[args.kind](cfg, bank)
    out = Path(args.out or f"sweep_{args.kind}.csv")
    write_sweep(rows, out, cfg, args.kind)
    if args.plot:
        from .plotting import plot_sweep
        plot_sweep(rows, args.kind, out.with_suffix(".png"),
                   title=f"{args.kind} sweep, seed {cfg.seed}, {cfg.trials} trials")
    log.info("wrote %s", out)
    return 0


def cmd_analyze(args) -> int:
    bank = load_bank(args.bank)
    snr = bank.nearest_snr(args.snr)
    feature = FeatureKind.parse(args.feature)
    tps = bank.test_points(snr, feature)
    true_snr = args.true_snr if args.true_snr is not None else snr
    true_params = ChannelParams.from_snr(true_snr, 1.0, math.radians(args.jitter_deg))
    if args.empirical_true_probs:
        probs = empirical_region_probs(bank.constellations, true_params, feature, tps,
                                       args.empirical_samples, args.seed)
    else:
        if feature is FeatureKind.QUADRATURE and args.jitter_deg > 0:
            raise SystemExit("quadrature features under jitter need --empirical-true-probs")
        nominal_law = true_params.with_jitter(0.0)
        probs = np.vstack([region_probabilities(tps, build_cdf(c, nominal_law, feature))
                           for c in bank.constellations])
    res = exact_confusion(tps, args.rule, probs, args.N, max_compositions=args.max_compositions,
                          workers=args.workers)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["true_order"] + [f"decided_{o}" for o in tps.orders])
    for o, row in zip(tps.orders, res.confusion):
        w.writerow([o] + [repr(float(x)) for x in row])
    log.info("rule=%s N=%d compositions=%d p_correct=%.6f", args.rule, args.N,
             res.n_compositions, res.p_correct)
    return 0


def cmd_complexity(args) -> int:
    bank = load_bank(args.bank) if args.bank else None
    rows = report_complexity(args.M, bank, args.snr, args.n_bar)
    text = complexity_to_csv(rows)
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="modlevel", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    bank = sub.add_parser("bank", help="CDF bank files").add_subparsers(dest="bank_cmd", required=True)
    b = bank.add_parser("build", help="build a bank of nominal CDFs and test points")
    b.add_argument("--levels", default="4,16,64")
    b.add_argument("--snr-grid", default="0:3:24")
    b.add_argument("--features", default="mag,quad")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bank_build)

    t = sub.add_parser("testpoints", help="print the test points of one bank slice as CSV")
    t.add_argument("--bank", required=True)
    t.add_argument("--snr", type=float, required=True)
    t.add_argument("--feature", default="mag")
    t.add_argument("--out")
    t.set_defaults(func=cmd_testpoints)

    c = sub.add_parser("classify", help="classify one block of samples (CSV columns re,im)")
    c.add_argument("--bank", required=True)
    c.add_argument("--rule", choices=ALL_RULES, default="rck")
    c.add_argument("--feature", default="mag")
    c.add_argument("--in", dest="input", required=True)
    c.add_argument("--nominal-snr", type=float, required=True)
    c.set_defaults(func=cmd_classify)

    s = sub.add_parser("simulate", help="write received samples of one level as CSV")
    s.add_argument("--order", type=int, default=16)
    s.add_argument("--snr", type=float, default=12.0)
    s.add_argument("--M", type=int, default=50)
    s.add_argument("--amplitude", type=float, default=1.0)
    s.add_argument("--jitter-deg", type=float, default=0.0)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    sw = sub.add_parser("sweep", help="Monte Carlo sweeps written as CSV (+ manifest)")
    sw.add_argument("kind", choices=sorted(SWEEP_FUNCS))
    sw.add_argument("--seed", type=int)
    sw.add_argument("--config", help="JSON file with ExperimentConfig fields")
    sw.add_argument("--trials", type=int)
    sw.add_argument("--M", type=int)
    sw.add_argument("--snr", type=float, help="fixed (nominal) SNR of the sweep")
    sw.add_argument("--sweep-values", help="swept values, start:step:stop or a,b,c")
    sw.add_argument("--rules")
    sw.add_argument("--features")
    sw.add_argument("--levels")
    sw.add_argument("--amplitude", type=float)
    sw.add_argument("--bank", help="use this bank (nearest grid SNR) instead of exact SNRs")
    sw.add_argument("--no-exact", action="store_true")
    sw.add_argument("--empirical-true-probs", action="store_true")
    sw.add_argument("--workers", type=int)
    sw.add_argument("--out")
    sw.add_argument("--plot", action="store_true", help="also render <out>.png")
    sw.set_defaults(func=cmd_sweep)

    a = sub.add_parser("analyze", help="exact confusion matrix of rcK/rcKS")
    a.add_argument("--bank", required=True)
    a.add_argument("--rule", choices=("rck", "rcks"), default="rck")
    a.add_argument("--feature", default="mag")
    a.add_argument("--N", type=int, default=50, help="number of feature samples")
    a.add_argument("--snr", type=float, required=True, help="nominal SNR")
    a.add_argument("--true-snr", type=float)
    a.add_argument("--jitter-deg", type=float, default=0.0)
    a.add_argument("--empirical-true-probs", action="store_true")
    a.add_argument("--empirical-samples", type=int, default=1_000_000)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--max-compositions", type=int, default=200_000_000)
    a.add_argument("--workers", type=int, default=1)
    a.set_defaults(func=cmd_analyze)

    x = sub.add_parser("complexity", help="measured op counts beside the closed-form costs")
    x.add_argument("--bank")
    x.add_argument("--M", type=int, default=50)
    x.add_argument("--snr", type=float, default=12.0)
    x.add_argument("--n-bar", type=int, default=10_000)
    x.add_argument("--out")
    x.set_defaults(func=cmd_complexity)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
