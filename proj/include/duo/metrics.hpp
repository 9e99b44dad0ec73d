#pragma once

// Evaluation metrics over scored predictions: accuracy, macro-F1, NLL,
// Brier, ECE, correctness AUROC and the risk-coverage family (AURC, SAC).

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "duo/aggregate.hpp"
#include "duo/logit_store.hpp"
#include "duo/matrix.hpp"

namespace duo {

inline constexpr int kDefaultEceBins = 15;
inline constexpr double kDefaultSacTarget = 0.98;

struct CalibrationBin {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
    double mean_confidence = 0.0;
    double empirical_accuracy = 0.0;
};

struct CalibrationReport {
    double ece = 0.0;
    std::vector<CalibrationBin> bins;
};

struct SacPoint {
    double target = 0.0;
    double coverage = 0.0;

    bool operator==(const SacPoint&) const = default;
};

/// Samples sorted by ascending uncertainty (stable on ties). Entry i
/// describes the i+1 most confident samples.
struct RiskCoverageCurve {
    std::vector<double> coverage;
    std::vector<double> risk;
    /// Cumulative error count among the i+1 most confident samples.
    std::vector<std::size_t> errors;
    double aurc = 0.0;
    std::vector<SacPoint> sac;

    /// Largest coverage whose prefix accuracy is >= target, or 0 if none.
    double selective_coverage(double target) const;
};

double accuracy(const ScoredPredictions& sp);

/// Mean F1 over classes present in `labels`; classes never labelled are skipped.
double macro_f1(std::span<const std::uint32_t> pred, std::span<const std::uint32_t> labels,
                std::size_t num_classes);

double brier(const ScoreMatrix& z, std::span<const std::uint32_t> labels);

/// Equal-width, right-closed bins on confidence; confidence 0 falls in the first bin.
CalibrationReport ece(const ScoredPredictions& sp, int num_bins = kDefaultEceBins);

/// P(unc of an incorrect sample > unc of a correct one), ties counted 1/2.
/// Computed from average ranks. Throws InputError when either class is empty.
double auroc_correctness(const ScoredPredictions& sp);

RiskCoverageCurve risk_coverage(const ScoredPredictions& sp,
                                std::span<const double> sac_targets = std::span<const double>());

/// One row of a balance sweep.
struct MetricRow {
    std::string dataset;
    std::string split;
    std::string large_model;
    std::string small_model;
    double balance = 0.0;
    std::string mode;
    std::string measure;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    double nll = 0.0;
    double brier = 0.0;
    double ece = 0.0;
    double auroc = 0.0;
    double aurc = 0.0;
    std::vector<SacPoint> sac;

    bool operator==(const MetricRow&) const = default;
};

struct EvalOptions {
    UncertaintyMeasure measure = UncertaintyMeasure::SoftmaxResponse;
    std::vector<double> sac_targets{kDefaultSacTarget};
    int ece_bins = kDefaultEceBins;
};

/// Metrics of a Duo mode on a pair. NLL and Brier are taken from the
/// distribution the mode scores from (the Duo logits for UQOnly).
MetricRow evaluate(const BundlePair& pair, const AggregationMode& m, const EvalOptions& options = {});

/// Metrics of the large model alone (balance 0).
MetricRow evaluate(const LogitBundle& bundle, const mode::SingleScaled& m, const EvalOptions& options = {});

}  // namespace duo
