"""Modulation level classification with reduced-complexity distribution distances."""

from .bank import CdfBank, load_bank, save_bank
from .cdf import CdfModel, ModelKind, build_cdf, build_empirical_cdf, build_magnitude_cdf, \
    build_quadrature_cdf, cdf_eval
from .classifiers import (DecisionReport, OpCounts, classify_cumulant, classify_full_ks,
                          classify_full_kuiper, classify_ml, classify_rck, classify_rcks,
                          ecdf_at)
from .exact import ExactResult, ecdf_from_occupancy, exact_confusion, multinomial_pmf
from .signal import (ChannelParams, Constellation, FeatureKind, apply_channel, extract_features,
                     qam_constellation, qam_family, sample_symbols)
from .simulate import Nominal, mc_confusion
from .testpoints import TestPoint, TestPointSet, distance_curve, find_test_points, \
    region_probabilities

__version__ = "0.1.0"

__all__ = [
    "CdfBank", "load_bank", "save_bank",
    "CdfModel", "ModelKind", "build_cdf", "build_empirical_cdf", "build_magnitude_cdf",
    "build_quadrature_cdf", "cdf_eval",
    "DecisionReport", "OpCounts", "classify_cumulant", "classify_full_ks", "classify_full_kuiper",
    "classify_ml", "classify_rck", "classify_rcks", "ecdf_at",
    "ExactResult", "ecdf_from_occupancy", "exact_confusion", "multinomial_pmf",
    "ChannelParams", "Constellation", "FeatureKind", "apply_channel", "extract_features",
    "qam_constellation", "qam_family", "sample_symbols",
    "Nominal", "mc_confusion",
    "TestPoint", "TestPointSet", "distance_curve", "find_test_points", "region_probabilities",
]
