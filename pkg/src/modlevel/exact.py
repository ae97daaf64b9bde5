"""Exact classification probabilities of the reduced rules.

With ``L`` test points the samples fall into ``L + 1`` regions and the region
occupancies are multinomial. Enumerating every occupancy vector, applying
the decision map to the ECDF it implies and summing the multinomial mass per
decided class gives the confusion matrix without simulation.

Occupancies are enumerated through their cumulative counts
``c_1 <= ... <= c_L`` (``c_l = N * F_N(t_l)``), partitioned on the first
coordinate; partial sums are merged in that fixed order, so the result does
not depend on the number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy.special import gammaln

from .classifiers import REDUCED_RULES, decide_reduced
from .testpoints import TestPointSet

DEFAULT_MAX_COMPOSITIONS = 200_000_000
_MAX_ROWS = 1 << 19


class CompositionBudgetError(RuntimeError):
    """Enumeration would exceed the configured budget."""


@dataclass
class ExactResult:
    rule: str
    confusion: np.ndarray
    n_samples: int
    n_compositions: int
    mass: np.ndarray

    @property
    def p_correct(self) -> float:
        return float(np.mean(np.diag(self.confusion)))


def multinomial_pmf(n, total: int, p) -> float:
    """Multinomial probability of occupancy ``n`` given ``total`` draws and cell probabilities ``p``."""
    n = np.asarray(n)
    p = np.asarray(p, dtype=float)
    if n.shape != p.shape:
        raise ValueError("occupancy and probability vectors differ in length")
    if np.any(n < 0):
        raise ValueError("occupancy counts must be nonnegative")
    if int(n.sum()) != total:
        return 0.0
    if np.any((p == 0) & (n > 0)):
        return 0.0
    nz = n > 0
    logf = gammaln(total + 1) - gammaln(n + 1).sum() + np.sum(n[nz] * np.log(p[nz]))
    return float(np.exp(logf))


def ecdf_from_occupancy(n, total: int) -> np.ndarray:
    """ECDF at the ``L`` test points implied by ``L + 1`` region counts."""
    n = np.asarray(n)
    return np.cumsum(n[..., :-1], axis=-1) / total


def n_compositions(total: int, parts: int) -> int:
    return math.comb(total + parts - 1, parts - 1)


def _nondecreasing(length: int, lo: int, hi: int) -> np.ndarray:
    """All nondecreasing integer rows of ``length`` with entries in ``[lo, hi]``."""
    arr = np.arange(lo, hi + 1, dtype=np.int16)[:, None]
    for _ in range(length - 1):
        last = arr[:, -1].astype(np.int64)
        reps = hi - last + 1
        idx = np.repeat(np.arange(arr.shape[0]), reps)
        starts = np.cumsum(reps) - reps
        nxt = last[idx] + (np.arange(idx.size) - starts[idx])
        arr = np.hstack([arr[idx], nxt[:, None].astype(np.int16)])
    return arr


def cumulative_chunks(total: int, length: int, first: int | None = None,
                      max_rows: int = _MAX_ROWS) -> Iterator[np.ndarray]:
    """Yield every nondecreasing ``c`` in ``[0, total]^length`` in bounded chunks.

    With ``first`` set only rows with ``c_1 == first`` are produced.
    """
    def rec(prefix: tuple[int, ...], m: int, lo: int) -> Iterator[np.ndarray]:
        if m == 0:
            yield np.array([prefix], dtype=np.int16)
            return
        if math.comb(total - lo + m, m) <= max_rows:
            block = _nondecreasing(m, lo, total)
            head = np.broadcast_to(np.array(prefix, dtype=np.int16), (block.shape[0], len(prefix)))
            yield np.hstack([head, block])
            return
        for v in range(lo, total + 1):
            yield from rec(prefix + (v,), m - 1, v)

    if first is None:
        yield from rec((), length, 0)
    else:
        yield from rec((first,), length - 1, first)


def _log_tables(true_probs: np.ndarray, total: int) -> np.ndarray:
    """``T[k, i, n] = n log p_ki - log n!`` with ``0 log 0 = 0``."""
    n = np.arange(total + 1)
    with np.errstate(divide="ignore"):
        logp = np.log(true_probs)
    t = n[None, None, :] * np.where(true_probs > 0, logp, 0.0)[..., None]
    t = np.where((true_probs[..., None] == 0) & (n > 0), -np.inf, t)
    return t - gammaln(n + 1)


def _accumulate(tps: TestPointSet, rules: Sequence[str], true_probs: np.ndarray,
                total: int, first: int) -> tuple[np.ndarray, int]:
    k_true = true_probs.shape[0]
    k = tps.n_levels
    L = tps.n_effective
    tables = _log_tables(true_probs, total)
    lg_total = gammaln(total + 1)
    acc = np.zeros((len(rules), k_true, k))
    visited = 0
    for c in cumulative_chunks(total, L, first):
        visited += c.shape[0]
        fn = c / total
        decisions = decide_reduced(fn, tps, rules)
        c64 = c.astype(np.intp)
        occ = np.diff(c64, axis=1, prepend=0, append=total)
        for kt in range(k_true):
            logf = np.full(c.shape[0], lg_total)
            for i in range(L + 1):
                logf += tables[kt, i][occ[:, i]]
            pmf = np.exp(logf)
            for r, rule in enumerate(rules):
                acc[r, kt] += np.bincount(decisions[rule], weights=pmf, minlength=k)
    return acc, visited


def exact_confusions(tps: TestPointSet, rules: Sequence[str] = REDUCED_RULES,
                     true_probs: np.ndarray | None = None, n_samples: int = 50,
                     max_compositions: int = DEFAULT_MAX_COMPOSITIONS,
                     workers: int = 1) -> dict[str, ExactResult]:
    """Exact confusion matrices ``Pr(decide kappa | true k)`` for the reduced rules.

    ``true_probs`` (rows = true levels, ``L + 1`` region probabilities each)
    defaults to the nominal region probabilities of ``tps``; pass the
    probabilities under a different channel to analyse mismatch.
    """
    rules = tuple(rules)
    for rule in rules:
        if rule not in REDUCED_RULES:
            raise ValueError(f"exact analysis covers {REDUCED_RULES}, not {rule!r}")
    if true_probs is None:
        true_probs = tps.region_probs
    true_probs = np.asarray(true_probs, dtype=float)
    L = tps.n_effective
    if true_probs.shape[1] != L + 1:
        raise ValueError(f"true_probs needs {L + 1} columns")
    if np.any(true_probs < 0):
        raise ValueError("negative region probability")
    count = n_compositions(n_samples, L + 1)
    if count > max_compositions:
        raise CompositionBudgetError(
            f"{count} compositions exceed the budget of {max_compositions}; "
            "use the Monte Carlo estimate instead")

    firsts = range(n_samples + 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_accumulate, *zip(*[(tps, rules, true_probs, n_samples, f)
                                                      for f in firsts])))
    else:
        parts = [_accumulate(tps, rules, true_probs, n_samples, f) for f in firsts]
    acc = np.zeros_like(parts[0][0])
    visited = 0
    for part, v in parts:
        acc += part
        visited += v
    if visited != count:
        raise AssertionError(f"visited {visited} compositions, expected {count}")
    return {rule: ExactResult(rule=rule, confusion=acc[r], n_samples=n_samples,
                              n_compositions=visited, mass=acc[r].sum(axis=1))
            for r, rule in enumerate(rules)}


def exact_confusion(tps: TestPointSet, rule: str = "rck", true_probs: np.ndarray | None = None,
                    n_samples: int = 50, **kw) -> ExactResult:
    return exact_confusions(tps, (rule,), true_probs, n_samples, **kw)[rule]
