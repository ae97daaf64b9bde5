"""A bank of nominal CDFs over an SNR grid, with cached test points.

The on-disk form is a JSON document::

    {"version": "modlevel-bank/1", "K": 3, "W": 9,
     "features": ["mag", "quad"], "snr_grid": [0.0, 3.0, ...],
     "constellations": [{"level_index": 1, "order": 4, "points": [[re, im], ...]}, ...],
     "entries": [{"k": 1, "snr_db": 0.0, "feature": "mag",
                  "kind": "ANALYTIC_RICE_MIX",
                  "components": [[weight, location, scale], ...]}, ...],
     "testpoints": [{"snr_db": 0.0, "feature": "mag", "points": [...],
                     "pairs": [[i, j, eps, t, deviation], ...], "slot": [...],
                     "cdf_values": [[...], ...]}, ...]}

Empirical entries carry ``"grid": [[z, F], ...]`` instead of components.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .cdf import CdfModel, ModelKind, build_cdf
from .signal import ChannelParams, Constellation, FeatureKind, qam_family
from .testpoints import TestPoint, TestPointSet, find_test_points

BANK_VERSION = "modlevel-bank/1"
DEFAULT_SNR_GRID = tuple(float(x) for x in range(0, 25, 3))


class BankError(Exception):
    pass


class BankFormatError(BankError):
    """The file is not a well-formed bank document."""


class BankVersionError(BankError):
    pass


class MissingEntryError(BankError, KeyError):
    """A (level, SNR, feature) combination has no model."""


@dataclass
class CdfBank:
    constellations: tuple[Constellation, ...]
    snr_grid: tuple[float, ...]
    features: tuple[FeatureKind, ...]
    entries: dict[tuple[int, int, FeatureKind], CdfModel]
    testpoints: dict[tuple[int, FeatureKind], TestPointSet] = field(default_factory=dict)
    version: str = BANK_VERSION

    def __post_init__(self):
        self.constellations = tuple(sorted(self.constellations, key=lambda c: c.order))
        self.snr_grid = tuple(float(s) for s in self.snr_grid)
        self.features = tuple(FeatureKind.parse(f) for f in self.features)
        if not self.snr_grid:
            raise BankError("bank needs at least one SNR")
        if list(self.snr_grid) != sorted(self.snr_grid):
            raise BankError("snr_grid must be sorted")
        for c in self.constellations:
            for w in range(len(self.snr_grid)):
                for f in self.features:
                    if (c.level_index, w, f) not in self.entries:
                        raise MissingEntryError(
                            f"no model for level {c.level_index}, "
                            f"snr {self.snr_grid[w]} dB, feature {f.value}")

    @property
    def n_levels(self) -> int:
        return len(self.constellations)

    @property
    def levels(self) -> tuple[int, ...]:
        return tuple(c.level_index for c in self.constellations)

    def snr_index(self, snr_db: float) -> int:
        for w, s in enumerate(self.snr_grid):
            if abs(s - snr_db) <= 1e-9:
                return w
        raise MissingEntryError(f"{snr_db} dB is not on the bank's SNR grid {self.snr_grid}")

    def nearest_snr(self, snr_db: float) -> float:
        return min(self.snr_grid, key=lambda s: (abs(s - snr_db), s))

    def model(self, level_index: int, snr_db: float, feature) -> CdfModel:
        key = (level_index, self.snr_index(snr_db), FeatureKind.parse(feature))
        try:
            return self.entries[key]
        except KeyError:
            raise MissingEntryError(key) from None

    def models(self, snr_db: float, feature) -> list[CdfModel]:
        return [self.model(c.level_index, snr_db, feature) for c in self.constellations]

    def test_points(self, snr_db: float, feature) -> TestPointSet:
        key = (self.snr_index(snr_db), FeatureKind.parse(feature))
        if key not in self.testpoints:
            self.testpoints[key] = find_test_points(
                self.models(snr_db, feature), provenance={"snr_db": snr_db})
        return self.testpoints[key]

    def nominal_params(self, snr_db: float) -> ChannelParams:
        return ChannelParams.from_snr(self.snr_grid[self.snr_index(snr_db)])

    def memory_numbers(self, feature) -> int:
        """Stored numbers needed by the reduced classifiers for one feature.

        Per SNR the test points plus each level's CDF at them, ``W * L * (K + 1)``.
        """
        total = 0
        for w, snr in enumerate(self.snr_grid):
            tps = self.test_points(snr, feature)
            total += tps.n_effective * (self.n_levels + 1)
        return total

    @classmethod
    def build(cls, orders: Iterable[int] = (4, 16, 64),
              snr_grid: Sequence[float] = DEFAULT_SNR_GRID,
              features: Iterable = (FeatureKind.MAGNITUDE, FeatureKind.QUADRATURE),
              with_testpoints: bool = True) -> "CdfBank":
        family = qam_family(tuple(orders))
        features = tuple(FeatureKind.parse(f) for f in features)
        entries = {}
        for w, snr in enumerate(snr_grid):
            params = ChannelParams.from_snr(snr)
            for c in family:
                for f in features:
                    entries[(c.level_index, w, f)] = build_cdf(c, params, f)
        bank = cls(tuple(family), tuple(snr_grid), features, entries)
        if with_testpoints:
            for snr in bank.snr_grid:
                for f in features:
                    bank.test_points(snr, f)
        return bank


def _model_to_json(m: CdfModel, snr_db: float) -> dict:
    rec = {"k": m.level_index, "order": m.order, "snr_db": snr_db,
           "feature": m.feature.value, "kind": m.kind.value}
    if m.kind is ModelKind.EMPIRICAL:
        rec["grid"] = [[float(z), float(f)] for z, f in zip(m.grid_z, m.grid_f)]
    else:
        rec["components"] = [list(c) for c in m.components]
    return rec


def _tps_to_json(t: TestPointSet, snr_db: float, feature: FeatureKind) -> dict:
    return {
        "snr_db": snr_db,
        "feature": feature.value,
        "points": [float(x) for x in t.points],
        "pairs": [[p.i, p.j, p.eps, p.value, p.deviation] for p in t.pairs],
        "slot": [int(s) for s in t.slot],
        "cdf_values": [[float(x) for x in row] for row in t.cdf_values],
    }


def bank_to_json(bank: CdfBank) -> dict:
    doc = {
        "version": bank.version,
        "K": bank.n_levels,
        "W": len(bank.snr_grid),
        "features": [f.value for f in bank.features],
        "snr_grid": list(bank.snr_grid),
        "constellations": [
            {"level_index": c.level_index, "order": c.order,
             "points": [[float(p.real), float(p.imag)] for p in c.points]}
            for c in bank.constellations
        ],
        "entries": [],
        "testpoints": [],
    }
    for (k, w, f), m in sorted(bank.entries.items(), key=lambda kv: (kv[0][1], kv[0][2].value, kv[0][0])):
        doc["entries"].append(_model_to_json(m, bank.snr_grid[w]))
    for (w, f), t in sorted(bank.testpoints.items(), key=lambda kv: (kv[0][0], kv[0][1].value)):
        doc["testpoints"].append(_tps_to_json(t, bank.snr_grid[w], f))
    return doc


def save_bank(bank: CdfBank, path: str | Path) -> None:
    """Write atomically: a crash never leaves a half-written bank at ``path``."""
    path = Path(path)
    text = json.dumps(bank_to_json(bank), indent=1)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def bank_from_json(doc: dict) -> CdfBank:
    if not isinstance(doc, dict) or "version" not in doc:
        raise BankFormatError("not a bank document")
    if doc["version"] != BANK_VERSION:
        raise BankVersionError(f"bank version {doc['version']!r}, expected {BANK_VERSION!r}")
    try:
        constellations = tuple(
            Constellation(c["level_index"], c["order"],
                          np.array([complex(re, im) for re, im in c["points"]]))
            for c in doc["constellations"])
        snr_grid = tuple(float(s) for s in doc["snr_grid"])
        features = tuple(FeatureKind.parse(f) for f in doc["features"])
        if doc["K"] != len(constellations) or doc["W"] != len(snr_grid):
            raise BankFormatError("header K/W disagree with the tables")
        orders = {c.level_index: c.order for c in constellations}
        entries = {}
        for rec in doc["entries"]:
            w = snr_grid.index(float(rec["snr_db"]))
            feature = FeatureKind.parse(rec["feature"])
            kind = ModelKind(rec["kind"])
            common = dict(kind=kind, level_index=int(rec["k"]), order=orders[int(rec["k"])],
                          snr_db=float(rec["snr_db"]), feature=feature)
            if kind is ModelKind.EMPIRICAL:
                grid = np.array(rec["grid"], dtype=float)
                model = CdfModel(**common, grid_z=grid[:, 0], grid_f=grid[:, 1])
            else:
                comps = np.array(rec["components"], dtype=float)
                model = CdfModel(**common, weights=comps[:, 0], locations=comps[:, 1],
                                 scales=comps[:, 2])
            entries[(model.level_index, w, feature)] = model
        testpoints = {}
        for rec in doc.get("testpoints", []):
            w = snr_grid.index(float(rec["snr_db"]))
            feature = FeatureKind.parse(rec["feature"])
            pairs = tuple(TestPoint(int(i), int(j), int(e), float(t), float(d))
                          for i, j, e, t, d in rec["pairs"])
            testpoints[(w, feature)] = TestPointSet(
                levels=tuple(c.level_index for c in sorted(constellations, key=lambda c: c.order)),
                orders=tuple(sorted(c.order for c in constellations)),
                points=np.array(rec["points"], dtype=float),
                pairs=pairs,
                slot=np.array(rec["slot"], dtype=np.intp),
                cdf_values=np.array(rec["cdf_values"], dtype=float),
                snr_db=snr_grid[w],
                feature=feature,
                provenance={"snr_db": snr_grid[w]},
            )
    except BankError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise BankFormatError(f"malformed bank: {exc}") from exc
    return CdfBank(constellations, snr_grid, features, entries, testpoints, doc["version"])


def load_bank(path: str | Path) -> CdfBank:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise BankFormatError(f"{path}: {exc}") from exc
    return bank_from_json(doc)
