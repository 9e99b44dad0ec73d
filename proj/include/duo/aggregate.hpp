#pragma once

// Logit aggregation for Duos and ensembles, plus per-sample scoring.
//
// A Duo combines a large base model and a small sidekick as
//     z = t_large * f_large(x) + t_small * f_small(x)
// and reads both the class prediction and the uncertainty from softmax(z).
// All probability arithmetic is done in float64.

#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "duo/logit_store.hpp"
#include "duo/matrix.hpp"

namespace duo {

struct DuoWeights {
    double t_large = 1.0;
    double t_small = 0.0;

    bool operator==(const DuoWeights&) const = default;
};

/// Throws InputError unless both weights are finite, non-negative and not both zero.
void validate(const DuoWeights& w);

namespace mode {
/// Prediction and uncertainty from the weighted Duo logits.
struct Weighted {
    DuoWeights weights;
};
/// Equal weighting, identical to Weighted{{0.5, 0.5}}.
struct Unweighted {};
/// Prediction from the large model alone; uncertainty from the weighted Duo.
struct UQOnly {
    DuoWeights weights;
};
/// The large model alone with its logits multiplied by `scale`.
struct SingleScaled {
    double scale = 1.0;
};
}  // namespace mode

using AggregationMode = std::variant<mode::Weighted, mode::Unweighted, mode::UQOnly, mode::SingleScaled>;

/// Short tag used in reports and on the command line: weighted, unweighted, uq_only, single.
std::string_view mode_name(const AggregationMode& m);

enum class UncertaintyMeasure { SoftmaxResponse, Entropy };

std::string_view to_string(UncertaintyMeasure m);
/// Accepts "softmax" / "softmax_response" and "entropy".
UncertaintyMeasure parse_measure(std::string_view text);

struct ScoredPredictions {
    std::vector<std::uint32_t> pred;
    std::vector<double> confidence;
    std::vector<double> uncertainty;
    std::vector<bool> correct;

    std::size_t size() const noexcept { return pred.size(); }
};

ScoreMatrix combine_logits(const BundlePair& pair, const DuoWeights& w);

/// Deep-ensemble baseline: elementwise mean of the members' logits.
ScoreMatrix ensemble_average(std::span<const LogitBundle> members);

/// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> z);

/// Argmax with ties resolved toward the lowest class index.
std::uint32_t argmax(std::span<const double> z);

/// Scores every row of z. Entropy is normalized by ln K, so both measures
/// report uncertainty in [0, 1] and confidence = 1 - uncertainty.
ScoredPredictions score(const ScoreMatrix& z, std::span<const std::uint32_t> labels,
                        UncertaintyMeasure measure);

/// The logits a mode scores from. For UQOnly these are the Duo logits.
ScoreMatrix mode_logits(const BundlePair& pair, const AggregationMode& m);
ScoreMatrix mode_logits(const LogitBundle& large, const mode::SingleScaled& m);

ScoredPredictions score_duo(const BundlePair& pair, const AggregationMode& m, UncertaintyMeasure measure);
ScoredPredictions score_single(const LogitBundle& large, const mode::SingleScaled& m,
                               UncertaintyMeasure measure);

}  // namespace duo
