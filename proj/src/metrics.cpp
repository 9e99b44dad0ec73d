#include "duo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "duo/errors.hpp"
#include "duo/tune.hpp"

namespace duo {
namespace {

std::vector<std::size_t> order_by_uncertainty(const ScoredPredictions& sp) {
    std::vector<std::size_t> order(sp.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sp.uncertainty[a] < sp.uncertainty[b]; });
    return order;
}

void require_nonempty(const ScoredPredictions& sp, const char* what) {
    if (sp.size() == 0) throw InputError(fmt::format("{}: empty predictions", what));
}

MetricRow fill_row(const ScoredPredictions& sp, const ScoreMatrix& z, std::span<const std::uint32_t> labels,
                   std::size_t num_classes, const EvalOptions& options) {
    MetricRow row;
    row.measure = std::string(to_string(options.measure));
    row.accuracy = accuracy(sp);
    row.macro_f1 = macro_f1(sp.pred, labels, num_classes);
    row.nll = nll(z, labels);
    row.brier = brier(z, labels);
    row.ece = ece(sp, options.ece_bins).ece;
    row.auroc = auroc_correctness(sp);
    const auto curve = risk_coverage(sp, options.sac_targets);
    row.aurc = curve.aurc;
    row.sac = curve.sac;
    return row;
}

}  // namespace

double RiskCoverageCurve::selective_coverage(double target) const {
    double best = 0.0;
    for (std::size_t i = 0; i < errors.size(); ++i) {
        const double covered = static_cast<double>(i + 1);
        if ((covered - static_cast<double>(errors[i])) / covered >= target) best = coverage[i];
    }
    return best;
}

double accuracy(const ScoredPredictions& sp) {
    require_nonempty(sp, "accuracy");
    const auto hits = std::count(sp.correct.begin(), sp.correct.end(), true);
    return static_cast<double>(hits) / static_cast<double>(sp.size());
}

double macro_f1(std::span<const std::uint32_t> pred, std::span<const std::uint32_t> labels, std::size_t num_classes) {
    if (pred.size() != labels.size()) throw InputError("macro_f1: pred and labels differ in length");
    std::vector<std::size_t> tp(num_classes), fp(num_classes), fn(num_classes), support(num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= num_classes || pred[i] >= num_classes) {
            throw InputError(fmt::format("macro_f1: class index out of range at sample {}", i));
        }
        ++support[labels[i]];
        if (pred[i] == labels[i]) {
            ++tp[labels[i]];
        } else {
            ++fp[pred[i]];
            ++fn[labels[i]];
        }
    }
    double total = 0.0;
    std::size_t classes = 0;
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (support[c] == 0) continue;
        ++classes;
        total += 2.0 * static_cast<double>(tp[c]) / static_cast<double>(2 * tp[c] + fp[c] + fn[c]);
    }
    if (classes == 0) throw InputError("macro_f1: no class has support");
    return total / static_cast<double>(classes);
}

double brier(const ScoreMatrix& z, std::span<const std::uint32_t> labels) {
    if (labels.size() != z.rows() || z.rows() == 0) throw InputError("brier: labels length does not match logits");
    std::vector<double> terms(z.rows());
    for (std::size_t i = 0; i < z.rows(); ++i) {
        const auto p = softmax(z.row(i));
        double s = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double d = p[k] - (k == labels[i] ? 1.0 : 0.0);
            s += d * d;
        }
        terms[i] = s;
    }
    return pairwise_sum(terms) / static_cast<double>(z.rows());
}

CalibrationReport ece(const ScoredPredictions& sp, int num_bins) {
    require_nonempty(sp, "ece");
    if (num_bins < 1) throw InputError("ece: num_bins must be >= 1");
    const auto nb = static_cast<std::size_t>(num_bins);
    std::vector<double> conf_sum(nb, 0.0);
    std::vector<std::size_t> hits(nb, 0), count(nb, 0);
    for (std::size_t i = 0; i < sp.size(); ++i) {
        const double c = sp.confidence[i];
        if (!(c >= 0.0 && c <= 1.0)) throw InputError(fmt::format("ece: confidence {} outside [0,1]", c));
        const double raw = std::ceil(c * num_bins) - 1.0;
        const auto b = static_cast<std::size_t>(std::clamp(raw, 0.0, static_cast<double>(num_bins - 1)));
        conf_sum[b] += c;
        hits[b] += sp.correct[i] ? 1 : 0;
        ++count[b];
    }
    CalibrationReport report;
    const double n = static_cast<double>(sp.size());
    for (std::size_t b = 0; b < nb; ++b) {
        CalibrationBin bin;
        bin.lo = static_cast<double>(b) / num_bins;
        bin.hi = static_cast<double>(b + 1) / num_bins;
        bin.count = count[b];
        if (count[b] > 0) {
            const double cnt = static_cast<double>(count[b]);
            bin.mean_confidence = conf_sum[b] / cnt;
            bin.empirical_accuracy = static_cast<double>(hits[b]) / cnt;
            report.ece += (cnt / n) * std::abs(bin.mean_confidence - bin.empirical_accuracy);
        }
        report.bins.push_back(bin);
    }
    return report;
}

double auroc_correctness(const ScoredPredictions& sp) {
    const auto order = order_by_uncertainty(sp);
    const std::size_t n = order.size();
    double incorrect_rank_sum = 0.0;
    std::size_t n_incorrect = 0;
    for (std::size_t start = 0; start < n;) {
        std::size_t end = start + 1;
        while (end < n && sp.uncertainty[order[end]] == sp.uncertainty[order[start]]) ++end;
        // 1-based ranks start+1 .. end share their average.
        const double avg_rank = 0.5 * static_cast<double>(start + 1 + end);
        for (std::size_t j = start; j < end; ++j) {
            if (!sp.correct[order[j]]) {
                incorrect_rank_sum += avg_rank;
                ++n_incorrect;
            }
        }
        start = end;
    }
    const std::size_t n_correct = n - n_incorrect;
    if (n_incorrect == 0 || n_correct == 0) {
        throw InputError("undefined AUROC: need at least one correct and one incorrect prediction");
    }
    const double ni = static_cast<double>(n_incorrect);
    const double u = incorrect_rank_sum - ni * (ni + 1.0) / 2.0;
    return u / (ni * static_cast<double>(n_correct));
}

RiskCoverageCurve risk_coverage(const ScoredPredictions& sp, std::span<const double> sac_targets) {
    require_nonempty(sp, "risk_coverage");
    const auto order = order_by_uncertainty(sp);
    const std::size_t n = order.size();
    RiskCoverageCurve curve;
    curve.coverage.resize(n);
    curve.risk.resize(n);
    curve.errors.resize(n);
    std::size_t errors = 0;
    double risk_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!sp.correct[order[i]]) ++errors;
        const double covered = static_cast<double>(i + 1);
        curve.coverage[i] = covered / static_cast<double>(n);
        curve.risk[i] = static_cast<double>(errors) / covered;
        curve.errors[i] = errors;
        risk_sum += curve.risk[i];
    }
    curve.aurc = risk_sum / static_cast<double>(n);
    for (double t : sac_targets) curve.sac.push_back({t, curve.selective_coverage(t)});
    return curve;
}

MetricRow evaluate(const LogitBundle& bundle, const mode::SingleScaled& m, const EvalOptions& options) {
    const ScoreMatrix z = mode_logits(bundle, m);
    const auto sp = score(z, bundle.labels, options.measure);
    MetricRow row = fill_row(sp, z, bundle.labels, bundle.num_classes(), options);
    row.dataset = bundle.meta.dataset;
    row.split = std::string(to_string(bundle.meta.split));
    row.large_model = bundle.meta.model_name;
    row.balance = 0.0;
    row.mode = "single";
    return row;
}

MetricRow evaluate(const BundlePair& pair, const AggregationMode& m, const EvalOptions& options) {
    if (const auto* single = std::get_if<mode::SingleScaled>(&m)) return evaluate(pair.large(), *single, options);

    const ScoreMatrix z = mode_logits(pair, m);
    const auto sp = score_duo(pair, m, options.measure);
    MetricRow row = fill_row(sp, z, pair.labels(), pair.num_classes(), options);
    row.dataset = pair.large().meta.dataset;
    row.split = std::string(to_string(pair.split()));
    row.large_model = pair.large().meta.model_name;
    row.small_model = pair.small().meta.model_name;
    row.balance = flops_balance(pair);
    row.mode = std::string(mode_name(m));
    return row;
}

}  // namespace duo
