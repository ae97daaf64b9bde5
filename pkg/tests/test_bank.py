import json

import numpy as np
import pytest

from modlevel.bank import (BANK_VERSION, BankError, BankFormatError, BankVersionError, CdfBank,
                           MissingEntryError, bank_from_json, bank_to_json, load_bank, save_bank)
from modlevel.signal import FeatureKind


@pytest.fixture(scope="module")
def saved(tmp_path_factory, small_bank):
    path = tmp_path_factory.mktemp("bank") / "bank.json"
    save_bank(small_bank, path)
    return path


class TestRoundTrip:
    def test_models_identical(self, small_bank, saved):
        loaded = load_bank(saved)
        assert loaded.snr_grid == small_bank.snr_grid
        assert loaded.features == small_bank.features
        for key, model in small_bank.entries.items():
            other = loaded.entries[key]
            np.testing.assert_array_equal(other.weights, model.weights)
            np.testing.assert_array_equal(other.locations, model.locations)
            np.testing.assert_array_equal(other.scales, model.scales)

    def test_testpoints_identical(self, small_bank, saved):
        loaded = load_bank(saved)
        for snr in small_bank.snr_grid:
            for f in small_bank.features:
                a, b = small_bank.test_points(snr, f), loaded.test_points(snr, f)
                np.testing.assert_array_equal(a.points, b.points)
                np.testing.assert_array_equal(a.cdf_values, b.cdf_values)
                np.testing.assert_array_equal(a.slot, b.slot)
                assert a.pairs == b.pairs

    def test_second_save_is_byte_identical(self, small_bank, saved, tmp_path):
        again = tmp_path / "again.json"
        save_bank(load_bank(saved), again)
        assert again.read_bytes() == saved.read_bytes()

    def test_no_temp_files_left(self, saved):
        assert [p.name for p in saved.parent.iterdir()] == ["bank.json"]


class TestErrors:
    def test_truncated(self, saved, tmp_path):
        bad = tmp_path / "cut.json"
        bad.write_bytes(saved.read_bytes()[:500])
        with pytest.raises(BankFormatError):
            load_bank(bad)

    def test_malformed_structure(self, saved):
        doc = json.loads(saved.read_text())
        doc["entries"][0]["components"] = "oops"
        with pytest.raises(BankFormatError):
            bank_from_json(doc)

    def test_header_mismatch(self, saved):
        doc = json.loads(saved.read_text())
        doc["K"] = 5
        with pytest.raises(BankFormatError):
            bank_from_json(doc)

    def test_version_mismatch(self, saved):
        doc = json.loads(saved.read_text())
        doc["version"] = "modlevel-bank/0"
        with pytest.raises(BankVersionError):
            bank_from_json(doc)

    def test_missing_entry(self, saved):
        doc = json.loads(saved.read_text())
        doc["entries"].pop()
        with pytest.raises(MissingEntryError):
            bank_from_json(doc)

    def test_error_kinds_are_distinct(self):
        assert not issubclass(BankFormatError, BankVersionError)
        assert not issubclass(BankVersionError, BankFormatError)
        assert issubclass(MissingEntryError, BankError) and issubclass(MissingEntryError, KeyError)

    def test_off_grid_lookup(self, small_bank):
        with pytest.raises(MissingEntryError):
            small_bank.model(1, 7.0, "mag")
        with pytest.raises(MissingEntryError):
            small_bank.test_points(9.0, "quad")

    def test_unsorted_grid(self, small_bank):
        with pytest.raises(BankError):
            CdfBank(small_bank.constellations, (12.0, 6.0), small_bank.features,
                    small_bank.entries)


class TestQueries:
    def test_nearest_snr(self, small_bank):
        assert small_bank.nearest_snr(8.0) == 6.0
        assert small_bank.nearest_snr(9.0) == 6.0  # tie goes low
        assert small_bank.nearest_snr(30.0) == 12.0

    @pytest.mark.parametrize("feature", ["mag", "quad"])
    def test_memory_formula(self, small_bank, feature):
        k = small_bank.n_levels
        expected = sum(small_bank.test_points(s, feature).n_effective * (k + 1)
                       for s in small_bank.snr_grid)
        assert small_bank.memory_numbers(feature) == expected
        # all six nominal points are distinct here, so this is W L (K + 1)
        assert expected == len(small_bank.snr_grid) * 6 * (k + 1)

    def test_json_header(self, small_bank):
        doc = bank_to_json(small_bank)
        assert doc["version"] == BANK_VERSION
        assert doc["K"] == 3 and doc["W"] == 2

    def test_nominal_params(self, small_bank):
        p = small_bank.nominal_params(6.0)
        assert p.amplitude == 1.0 and p.jitter_bound == 0.0
        assert abs(p.snr_db - 6.0) < 1e-12

    def test_build_single_feature(self):
        bank = CdfBank.build((4, 16), [3.0], ["quad"], with_testpoints=False)
        assert bank.features == (FeatureKind.QUADRATURE,)
        assert bank.testpoints == {}
        assert bank.test_points(3.0, "quad").n_nominal == 2
