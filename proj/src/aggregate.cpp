#include "duo/aggregate.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "duo/errors.hpp"

namespace duo {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void softmax_into(std::span<const double> z, std::span<double> out) {
    const double zmax = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
        out[k] = std::exp(z[k] - zmax);
        total += out[k];
    }
    for (double& p : out) p /= total;
}

double normalized_entropy(std::span<const double> p) {
    double h = 0.0;
    for (double pk : p) {
        if (pk > 0.0) h -= pk * std::log(pk);
    }
    return std::clamp(h / std::log(static_cast<double>(p.size())), 0.0, 1.0);
}

ScoreMatrix scaled(const LogitMatrix& logits, double s) {
    ScoreMatrix out(logits.rows(), logits.cols());
    auto src = logits.values();
    auto dst = out.values();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = s * static_cast<double>(src[i]);
    return out;
}

// Fills one ScoredPredictions entry given the row's probabilities and the
// class whose probability defines softmax-response uncertainty.
void fill(ScoredPredictions& sp, std::size_t i, std::span<const double> probs, std::uint32_t predicted,
          std::uint32_t label, UncertaintyMeasure measure) {
    const double unc = measure == UncertaintyMeasure::SoftmaxResponse ? 1.0 - probs[predicted]
                                                                      : normalized_entropy(probs);
    sp.pred[i] = predicted;
    sp.uncertainty[i] = unc;
    sp.confidence[i] = 1.0 - unc;
    sp.correct[i] = predicted == label;
}

ScoredPredictions allocate(std::size_t n) {
    ScoredPredictions sp;
    sp.pred.resize(n);
    sp.confidence.resize(n);
    sp.uncertainty.resize(n);
    sp.correct.resize(n);
    return sp;
}

}  // namespace

void validate(const DuoWeights& w) {
    if (!std::isfinite(w.t_large) || !std::isfinite(w.t_small) || w.t_large < 0.0 || w.t_small < 0.0 ||
        w.t_large + w.t_small <= 0.0) {
        throw InputError(fmt::format("invalid Duo weights ({}, {}): need t >= 0 and t_large + t_small > 0",
                                     w.t_large, w.t_small));
    }
}

std::string_view mode_name(const AggregationMode& m) {
    return std::visit(Overloaded{
                          [](const mode::Weighted&) { return std::string_view("weighted"); },
                          [](const mode::Unweighted&) { return std::string_view("unweighted"); },
                          [](const mode::UQOnly&) { return std::string_view("uq_only"); },
                          [](const mode::SingleScaled&) { return std::string_view("single"); },
                      },
                      m);
}

std::string_view to_string(UncertaintyMeasure m) {
    return m == UncertaintyMeasure::SoftmaxResponse ? "softmax" : "entropy";
}

UncertaintyMeasure parse_measure(std::string_view text) {
    if (text == "softmax" || text == "softmax_response") return UncertaintyMeasure::SoftmaxResponse;
    if (text == "entropy") return UncertaintyMeasure::Entropy;
    throw InputError(fmt::format("unknown uncertainty measure \"{}\" (expected softmax or entropy)", text));
}

ScoreMatrix combine_logits(const BundlePair& pair, const DuoWeights& w) {
    validate(w);
    const auto a = pair.large().logits.values();
    const auto b = pair.small().logits.values();
    ScoreMatrix out(pair.num_samples(), pair.num_classes());
    auto z = out.values();
    for (std::size_t i = 0; i < z.size(); ++i) {
        z[i] = w.t_large * static_cast<double>(a[i]) + w.t_small * static_cast<double>(b[i]);
    }
    return out;
}

ScoreMatrix ensemble_average(std::span<const LogitBundle> members) {
    if (members.empty()) throw InputError("ensemble_average: no members");
    const auto& first = members.front();
    for (const auto& m : members) {
        if (m.logits.rows() != first.logits.rows() || m.logits.cols() != first.logits.cols()) {
            throw InputError(fmt::format("ensemble_average: shape mismatch ({}x{} vs {}x{})", m.logits.rows(),
                                         m.logits.cols(), first.logits.rows(), first.logits.cols()));
        }
        if (m.labels != first.labels) throw InputError("ensemble_average: members disagree on labels");
    }
    ScoreMatrix out(first.logits.rows(), first.logits.cols());
    auto z = out.values();
    for (const auto& m : members) {
        const auto src = m.logits.values();
        for (std::size_t i = 0; i < z.size(); ++i) z[i] += static_cast<double>(src[i]);
    }
    const double inv = 1.0 / static_cast<double>(members.size());
    for (double& v : z) v *= inv;
    return out;
}

std::vector<double> softmax(std::span<const double> z) {
    std::vector<double> out(z.size());
    if (!z.empty()) softmax_into(z, out);
    return out;
}

std::uint32_t argmax(std::span<const double> z) {
    // max_element returns the first maximum.
    return static_cast<std::uint32_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

ScoredPredictions score(const ScoreMatrix& z, std::span<const std::uint32_t> labels, UncertaintyMeasure measure) {
    if (labels.size() != z.rows()) throw InputError("score: labels length does not match logit rows");
    auto sp = allocate(z.rows());
    std::vector<double> probs(z.cols());
    for (std::size_t i = 0; i < z.rows(); ++i) {
        const auto row = z.row(i);
        softmax_into(row, probs);
        fill(sp, i, probs, argmax(row), labels[i], measure);
    }
    return sp;
}

ScoreMatrix mode_logits(const LogitBundle& large, const mode::SingleScaled& m) {
    if (!std::isfinite(m.scale) || m.scale <= 0.0) {
        throw InputError(fmt::format("single-model scale must be finite and > 0, got {}", m.scale));
    }
    return scaled(large.logits, m.scale);
}

ScoreMatrix mode_logits(const BundlePair& pair, const AggregationMode& m) {
    return std::visit(Overloaded{
                          [&](const mode::Weighted& w) { return combine_logits(pair, w.weights); },
                          [&](const mode::Unweighted&) { return combine_logits(pair, {0.5, 0.5}); },
                          [&](const mode::UQOnly& w) { return combine_logits(pair, w.weights); },
                          [&](const mode::SingleScaled& s) { return mode_logits(pair.large(), s); },
                      },
                      m);
}

ScoredPredictions score_single(const LogitBundle& large, const mode::SingleScaled& m, UncertaintyMeasure measure) {
    return score(mode_logits(large, m), large.labels, measure);
}

ScoredPredictions score_duo(const BundlePair& pair, const AggregationMode& m, UncertaintyMeasure measure) {
    const auto* uq = std::get_if<mode::UQOnly>(&m);
    if (uq == nullptr) return score(mode_logits(pair, m), pair.labels(), measure);

    // Class from the large model, uncertainty from the Duo distribution.
    const ScoreMatrix duo = combine_logits(pair, uq->weights);
    const auto& large = pair.large().logits;
    const auto& labels = pair.labels();
    auto sp = allocate(pair.num_samples());
    std::vector<double> large_row(pair.num_classes());
    std::vector<double> probs(pair.num_classes());
    for (std::size_t i = 0; i < pair.num_samples(); ++i) {
        const auto src = large.row(i);
        std::copy(src.begin(), src.end(), large_row.begin());
        softmax_into(duo.row(i), probs);
        fill(sp, i, probs, argmax(large_row), labels[i], measure);
    }
    return sp;
}

}  // namespace duo
