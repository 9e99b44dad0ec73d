#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "duo/aggregate.hpp"
#include "duo/errors.hpp"
#include "oracles.hpp"

using namespace duo;

namespace {

LogitBundle bundle(std::size_t n, std::size_t k, std::vector<float> logits, std::vector<std::uint32_t> labels,
                   double flops, const char* name = "m") {
    LogitBundle b;
    b.meta = {name, "toy", Split::Test, k, n, flops, 0};
    b.logits = LogitMatrix(n, k, std::move(logits));
    b.labels = std::move(labels);
    return b;
}

BundlePair random_pair(std::mt19937_64& rng, std::size_t n, std::size_t k) {
    auto large = oracle::random_bundle(rng, n, k, Split::Test, "L", 2.0);
    auto small = oracle::random_bundle(rng, n, k, Split::Test, "S", 1.0);
    small.labels = large.labels;
    return make_bundle_pair(std::move(large), std::move(small));
}

std::vector<std::size_t> uncertainty_order(const ScoredPredictions& sp) {
    std::vector<std::size_t> idx(sp.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return sp.uncertainty[a] < sp.uncertainty[b]; });
    return idx;
}

void check_same(const ScoredPredictions& a, const ScoredPredictions& b) {
    CHECK(a.pred == b.pred);
    CHECK(a.uncertainty == b.uncertainty);
    CHECK(a.confidence == b.confidence);
    CHECK(a.correct == b.correct);
}

}  // namespace

TEST_CASE("combine_logits is the weighted sum") {
    const auto pair = make_bundle_pair(bundle(1, 2, {2, 0}, {0}, 2), bundle(1, 2, {0, 2}, {0}, 1));
    const auto z = combine_logits(pair, {0.75, 0.25});
    CHECK(z(0, 0) == 1.5);
    CHECK(z(0, 1) == 0.5);

    SUBCASE("(1, 0) reverts to the large model exactly") {
        std::mt19937_64 rng(1);
        const auto p = random_pair(rng, 50, 7);
        CHECK(combine_logits(p, {1.0, 0.0}) == widen(p.large().logits));
    }
    SUBCASE("(0.5, 0.5) is the two-member ensemble mean") {
        std::mt19937_64 rng(2);
        const auto p = random_pair(rng, 40, 5);
        const LogitBundle members[] = {p.large(), p.small()};
        const auto mean = ensemble_average(members);
        const auto duo = combine_logits(p, {0.5, 0.5});
        for (std::size_t i = 0; i < duo.size(); ++i) CHECK(duo.values()[i] == doctest::Approx(mean.values()[i]));
    }
}

TEST_CASE("invalid Duo weights are rejected") {
    const auto pair = make_bundle_pair(bundle(1, 2, {2, 0}, {0}, 2), bundle(1, 2, {0, 2}, {0}, 1));
    CHECK_THROWS_AS(combine_logits(pair, {0.0, 0.0}), InputError);
    CHECK_THROWS_AS(combine_logits(pair, {-1.0, 1.0}), InputError);
    CHECK_THROWS_AS(combine_logits(pair, {NAN, 1.0}), InputError);
}

TEST_CASE("ensemble_average") {
    const auto a = bundle(1, 2, {2, 0}, {0}, 1);
    const auto b = bundle(1, 2, {0, 2}, {0}, 1);
    const LogitBundle ab[] = {a, b};
    const auto mean = ensemble_average(ab);
    CHECK(mean(0, 0) == 1.0);
    CHECK(mean(0, 1) == 1.0);

    const LogitBundle same[] = {a, a};
    CHECK(ensemble_average(same) == widen(a.logits));
    const LogitBundle one[] = {b};
    CHECK(ensemble_average(one) == widen(b.logits));

    CHECK_THROWS_AS(ensemble_average(std::span<const LogitBundle>()), InputError);
    const LogitBundle mismatched[] = {a, bundle(1, 3, {0, 0, 0}, {0}, 1)};
    CHECK_THROWS_AS(ensemble_average(mismatched), InputError);
}

TEST_CASE("softmax") {
    auto p = softmax(std::vector<double>{0, 0, 0});
    for (double v : p) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    p = softmax(std::vector<double>{2, 0, 0});
    CHECK(std::abs(p[0] - 0.78699) <= 1e-5);
    CHECK(std::abs(p[1] - 0.10650) <= 1e-5);
    CHECK(std::abs(p[2] - 0.10650) <= 1e-5);
    CHECK(std::abs(p[0] + p[1] + p[2] - 1.0) <= 1e-12);

    p = softmax(std::vector<double>{1000, 0});
    CHECK(p[0] == 1.0);
    CHECK(p[1] == 0.0);
    CHECK(std::isfinite(p[0]));
}

TEST_CASE("score: softmax response and normalized entropy") {
    const std::vector<std::uint32_t> labels{0, 0, 1};
    const ScoreMatrix z(3, 3, {0, 0, 0, 2, 0, 0, 0, 5, 5});
    const auto sr = score(z, labels, UncertaintyMeasure::SoftmaxResponse);
    CHECK(sr.uncertainty[0] == doctest::Approx(2.0 / 3.0));
    CHECK(std::abs(sr.uncertainty[1] - 0.21301) <= 1e-5);
    CHECK(sr.confidence[1] == 1.0 - sr.uncertainty[1]);
    // Ties go to the lowest index.
    CHECK(sr.pred[0] == 0);
    CHECK(sr.pred[2] == 1);
    CHECK(sr.correct == std::vector<bool>{true, true, true});

    const ScoreMatrix binary(1, 2, {0, 0});
    const auto ent = score(binary, std::vector<std::uint32_t>{1}, UncertaintyMeasure::Entropy);
    CHECK(ent.uncertainty[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(ent.confidence[0] == doctest::Approx(0.0).epsilon(1e-15));
    CHECK_FALSE(ent.correct[0]);
}

TEST_CASE("UQ-only takes the class from the large model and the uncertainty from the Duo") {
    const auto pair = make_bundle_pair(bundle(1, 2, {1, 0}, {1}, 2), bundle(1, 2, {0, 3}, {1}, 1));
    const auto sp = score_duo(pair, mode::UQOnly{{1.0, 1.0}}, UncertaintyMeasure::SoftmaxResponse);
    CHECK(sp.pred[0] == 0);
    CHECK_FALSE(sp.correct[0]);
    // Duo logits [1, 3]; probability of class 0 is 1 / (1 + e^2).
    CHECK(sp.uncertainty[0] == doctest::Approx(1.0 - 1.0 / (1.0 + std::exp(2.0))));

    const auto weighted = score_duo(pair, mode::Weighted{{1.0, 1.0}}, UncertaintyMeasure::SoftmaxResponse);
    CHECK(weighted.pred[0] == 1);

    const auto ent = score_duo(pair, mode::UQOnly{{1.0, 1.0}}, UncertaintyMeasure::Entropy);
    const auto duo_ent = score_duo(pair, mode::Weighted{{1.0, 1.0}}, UncertaintyMeasure::Entropy);
    CHECK(ent.uncertainty == duo_ent.uncertainty);
}

TEST_CASE("mode identities on random pairs") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const auto pair = random_pair(rng, 60, 2 + trial % 9);
        for (auto measure : {UncertaintyMeasure::SoftmaxResponse, UncertaintyMeasure::Entropy}) {
            const auto single = score_duo(pair, mode::SingleScaled{1.0}, measure);
            check_same(score_duo(pair, mode::Weighted{{1.0, 0.0}}, measure), single);
            check_same(score_duo(pair, mode::Weighted{{0.5, 0.5}}, measure),
                       score_duo(pair, mode::Unweighted{}, measure));
            const double t = 0.25 + 0.1 * trial;
            check_same(score_duo(pair, mode::Weighted{{t, 0.0}}, measure),
                       score_duo(pair, mode::SingleScaled{t}, measure));
            CHECK(score_duo(pair, mode::UQOnly{{0.7, 1.3}}, measure).pred == single.pred);
            CHECK(score_duo(pair, mode::UQOnly{{0.7, 1.3}}, measure).correct == single.correct);
        }
    }
}

TEST_CASE("identical members: equal weights keep the member's predictions") {
    std::mt19937_64 rng(5);
    auto a = oracle::random_bundle(rng, 80, 6, Split::Test, "A", 1.0);
    const auto pair = make_bundle_pair(a, a);
    const auto duo = score_duo(pair, mode::Weighted{{0.5, 0.5}}, UncertaintyMeasure::SoftmaxResponse);
    CHECK(duo.pred == score(widen(a.logits), a.labels, UncertaintyMeasure::SoftmaxResponse).pred);
}

TEST_CASE("argmax is invariant under positive scaling") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> c(1e-3, 1e3);
    for (int trial = 0; trial < 30; ++trial) {
        const auto b = oracle::random_bundle(rng, 40, 2 + trial % 12, Split::Test, "A", 1.0);
        const auto base = score(widen(b.logits), b.labels, UncertaintyMeasure::SoftmaxResponse);
        const auto scaled = score_duo(make_bundle_pair(b, b), mode::SingleScaled{c(rng)},
                                      UncertaintyMeasure::SoftmaxResponse);
        CHECK(scaled.pred == base.pred);
    }
}

TEST_CASE("uncertainty ranges") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t k = 2 + trial % 15;
        const auto b = oracle::random_bundle(rng, 50, k, Split::Test, "A", 1.0, 0.1 + trial);
        const auto z = widen(b.logits);
        const auto sr = score(z, b.labels, UncertaintyMeasure::SoftmaxResponse);
        const auto ent = score(z, b.labels, UncertaintyMeasure::Entropy);
        for (std::size_t i = 0; i < sr.size(); ++i) {
            CHECK(sr.uncertainty[i] >= 0.0);
            CHECK(sr.uncertainty[i] <= 1.0 - 1.0 / static_cast<double>(k) + 1e-12);
            CHECK(ent.uncertainty[i] >= 0.0);
            CHECK(ent.uncertainty[i] <= 1.0);
        }
    }
}

TEST_CASE("binary problems: both measures order samples identically") {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 50; ++trial) {
        const auto b = oracle::random_bundle(rng, 200, 2, Split::Test, "A", 1.0, 3.0);
        const auto z = widen(b.logits);
        const auto sr = score(z, b.labels, UncertaintyMeasure::SoftmaxResponse);
        const auto ent = score(z, b.labels, UncertaintyMeasure::Entropy);
        CHECK(uncertainty_order(sr) == uncertainty_order(ent));
        CHECK(sr.pred == ent.pred);
    }
}

TEST_CASE("parsing of measures and mode names") {
    CHECK(parse_measure("softmax") == UncertaintyMeasure::SoftmaxResponse);
    CHECK(parse_measure("softmax_response") == UncertaintyMeasure::SoftmaxResponse);
    CHECK(parse_measure("entropy") == UncertaintyMeasure::Entropy);
    CHECK_THROWS_AS(parse_measure("margin"), InputError);
    CHECK(mode_name(mode::Unweighted{}) == "unweighted");
    CHECK(mode_name(mode::UQOnly{}) == "uq_only");
    CHECK(mode_name(mode::Weighted{}) == "weighted");
    CHECK(mode_name(mode::SingleScaled{}) == "single");
}
