#pragma once

// Brute-force reference computations used to check the library. Nothing in
// here calls into the code paths it checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "duo/logit_store.hpp"

namespace duo::oracle {

/// O(N^2) pairwise count: incorrect sample more uncertain than correct, ties 1/2.
inline double pairwise_auroc(const std::vector<double>& unc, const std::vector<bool>& correct) {
    double wins = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < unc.size(); ++i) {
        if (correct[i]) continue;
        for (std::size_t j = 0; j < unc.size(); ++j) {
            if (!correct[j]) continue;
            pairs += 1.0;
            if (unc[i] > unc[j]) wins += 1.0;
            else if (unc[i] == unc[j]) wins += 0.5;
        }
    }
    return wins / pairs;
}

/// Rank of each sample by counting (more confident first, ties by input
/// order); for each coverage level i, counts errors among ranks below i from
/// scratch.
inline std::vector<double> enumerated_risks(const std::vector<double>& unc, const std::vector<bool>& correct) {
    const std::size_t n = unc.size();
    std::vector<std::size_t> rank(n, 0);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t m = 0; m < n; ++m) {
            if (unc[m] < unc[j] || (unc[m] == unc[j] && m < j)) ++rank[j];
        }
    }
    std::vector<double> risks;
    for (std::size_t covered = 1; covered <= n; ++covered) {
        std::size_t errors = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (rank[j] < covered && !correct[j]) ++errors;
        }
        risks.push_back(static_cast<double>(errors) / static_cast<double>(covered));
    }
    return risks;
}

inline double enumerated_aurc(const std::vector<double>& unc, const std::vector<bool>& correct) {
    const auto risks = enumerated_risks(unc, correct);
    double s = 0.0;
    for (double r : risks) s += r;
    return s / static_cast<double>(risks.size());
}

/// Mean NLL of labels under softmax(t_large * a + t_small * b), in long double.
inline long double pair_nll(const LogitMatrix& a, const LogitMatrix& b, const std::vector<std::uint32_t>& labels,
                            long double t_large, long double t_small) {
    long double total = 0.0L;
    std::vector<long double> z(a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        long double zmax = -INFINITY;
        for (std::size_t k = 0; k < a.cols(); ++k) {
            z[k] = t_large * a(i, k) + t_small * b(i, k);
            zmax = std::max(zmax, z[k]);
        }
        long double s = 0.0L;
        for (long double v : z) s += std::exp(v - zmax);
        total += zmax + std::log(s) - z[labels[i]];
    }
    return total / static_cast<long double>(a.rows());
}

inline long double scaled_nll(const LogitMatrix& a, const std::vector<std::uint32_t>& labels, long double s) {
    return pair_nll(a, a, labels, s, 0.0L);
}

struct ScanResult {
    double scale;
    double nll;
};

/// Dense log-spaced scan of scale in [0.01, 100] followed by golden-section
/// refinement inside the best bracket.
inline ScanResult scan_best_scale(const LogitMatrix& a, const std::vector<std::uint32_t>& labels,
                                  int points = 400) {
    const double lo = std::log(0.01), hi = std::log(100.0);
    std::vector<double> grid(points);
    std::size_t best = 0;
    long double best_f = INFINITY;
    for (int i = 0; i < points; ++i) {
        grid[i] = std::exp(lo + (hi - lo) * i / (points - 1));
        const long double f = scaled_nll(a, labels, grid[i]);
        if (f < best_f) {
            best_f = f;
            best = static_cast<std::size_t>(i);
        }
    }
    long double left = grid[best == 0 ? 0 : best - 1];
    long double right = grid[std::min<std::size_t>(best + 1, grid.size() - 1)];
    const long double phi = (std::sqrt(5.0L) - 1.0L) / 2.0L;
    long double x1 = right - phi * (right - left), x2 = left + phi * (right - left);
    long double f1 = scaled_nll(a, labels, x1), f2 = scaled_nll(a, labels, x2);
    for (int it = 0; it < 100; ++it) {
        if (f1 < f2) {
            right = x2;
            x2 = x1;
            f2 = f1;
            x1 = right - phi * (right - left);
            f1 = scaled_nll(a, labels, x1);
        } else {
            left = x1;
            x1 = x2;
            f1 = f2;
            x2 = left + phi * (right - left);
            f2 = scaled_nll(a, labels, x2);
        }
    }
    const long double x = (left + right) / 2.0L;
    const long double f = std::min(scaled_nll(a, labels, x), best_f);
    return {static_cast<double>(x), static_cast<double>(f)};
}

struct FdGradient {
    double g_large;
    double g_small;
};

/// Central finite differences with step h.
inline FdGradient central_difference(const LogitMatrix& a, const LogitMatrix& b,
                                     const std::vector<std::uint32_t>& labels, double t_large, double t_small,
                                     double h = 1e-5) {
    const long double gl =
        (pair_nll(a, b, labels, t_large + h, t_small) - pair_nll(a, b, labels, t_large - h, t_small)) / (2.0L * h);
    const long double gs =
        (pair_nll(a, b, labels, t_large, t_small + h) - pair_nll(a, b, labels, t_large, t_small - h)) / (2.0L * h);
    return {static_cast<double>(gl), static_cast<double>(gs)};
}

/// Random bundle with Gaussian logits (scaled by `spread`) and uniform labels.
inline LogitBundle random_bundle(std::mt19937_64& rng, std::size_t n, std::size_t k, Split split,
                                 const std::string& name, double flops, double spread = 2.0) {
    std::normal_distribution<double> normal(0.0, spread);
    std::uniform_int_distribution<std::uint32_t> label(0, static_cast<std::uint32_t>(k - 1));
    LogitBundle b;
    b.meta = {name, "random", split, k, n, flops, 0};
    b.logits = LogitMatrix(n, k);
    for (float& v : b.logits.values()) v = static_cast<float>(normal(rng));
    b.labels.resize(n);
    for (auto& y : b.labels) y = label(rng);
    return b;
}

}  // namespace duo::oracle
