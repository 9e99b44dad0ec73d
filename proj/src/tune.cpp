#include "duo/tune.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "duo/errors.hpp"

namespace duo {
namespace {

// NLL of sum_j t_j * features[j] as a function of the weight vector t.
// Convex in t (log-sum-exp of a linear map minus a linear term), so the
// projected Newton iteration below reaches the global minimum.
template <std::size_t M>
class LinearNllProblem {
public:
    using Vec = std::array<double, M>;
    using Mat = std::array<std::array<double, M>, M>;

    struct Eval {
        double f = 0.0;
        Vec g{};
        Mat h{};
    };

    LinearNllProblem(std::array<const LogitMatrix*, M> features, std::span<const std::uint32_t> labels)
        : features_(features), labels_(labels), n_(labels.size()), k_(features[0]->cols()) {}

    double value(const Vec& t) const {
        std::vector<double> terms(n_);
        std::vector<double> z(k_);
        for (std::size_t i = 0; i < n_; ++i) {
            combine_row(t, i, z);
            terms[i] = log_sum_exp(z) - z[labels_[i]];
        }
        return pairwise_sum(terms) / static_cast<double>(n_);
    }

    Eval evaluate(const Vec& t) const {
        // Column-major per-sample terms: f, g_j, h_jl (upper triangle).
        constexpr std::size_t kTerms = 1 + M + M * (M + 1) / 2;
        std::vector<std::array<double, kTerms>> rows(n_);
        std::vector<double> z(k_);
        std::vector<double> p(k_);
        for (std::size_t i = 0; i < n_; ++i) {
            combine_row(t, i, z);
            const double lse = log_sum_exp(z);
            for (std::size_t c = 0; c < k_; ++c) p[c] = std::exp(z[c] - lse);

            Vec mean{};
            Mat second{};
            for (std::size_t j = 0; j < M; ++j) {
                const auto fj = features_[j]->row(i);
                for (std::size_t c = 0; c < k_; ++c) {
                    const double x = p[c] * static_cast<double>(fj[c]);
                    mean[j] += x;
                    for (std::size_t l = j; l < M; ++l) {
                        second[j][l] += x * static_cast<double>(features_[l]->row(i)[c]);
                    }
                }
            }
            auto& r = rows[i];
            r[0] = lse - z[labels_[i]];
            std::size_t idx = 1;
            for (std::size_t j = 0; j < M; ++j) {
                r[idx++] = mean[j] - static_cast<double>(features_[j]->row(i)[labels_[i]]);
            }
            for (std::size_t j = 0; j < M; ++j) {
                for (std::size_t l = j; l < M; ++l) r[idx++] = second[j][l] - mean[j] * mean[l];
            }
        }

        Eval e;
        std::vector<double> column(n_);
        const double inv_n = 1.0 / static_cast<double>(n_);
        auto reduce = [&](std::size_t term) {
            for (std::size_t i = 0; i < n_; ++i) column[i] = rows[i][term];
            return pairwise_sum(column) * inv_n;
        };
        e.f = reduce(0);
        std::size_t idx = 1;
        for (std::size_t j = 0; j < M; ++j) e.g[j] = reduce(idx++);
        for (std::size_t j = 0; j < M; ++j) {
            for (std::size_t l = j; l < M; ++l) {
                e.h[j][l] = reduce(idx++);
                e.h[l][j] = e.h[j][l];
            }
        }
        return e;
    }

private:
    void combine_row(const Vec& t, std::size_t i, std::vector<double>& z) const {
        std::fill(z.begin(), z.end(), 0.0);
        for (std::size_t j = 0; j < M; ++j) {
            const auto fj = features_[j]->row(i);
            for (std::size_t c = 0; c < k_; ++c) z[c] += t[j] * static_cast<double>(fj[c]);
        }
    }

    static double log_sum_exp(std::span<const double> z) {
        const double zmax = *std::max_element(z.begin(), z.end());
        double s = 0.0;
        for (double v : z) s += std::exp(v - zmax);
        return zmax + std::log(s);
    }

    std::array<const LogitMatrix*, M> features_;
    std::span<const std::uint32_t> labels_;
    std::size_t n_;
    std::size_t k_;
};

struct NewtonOutcome {
    std::vector<double> t;
    double f = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Solves the free block of H d = -g; bound coordinates get d = 0.
template <std::size_t M>
std::array<double, M> newton_direction(const typename LinearNllProblem<M>::Eval& e,
                                       const std::array<bool, M>& free) {
    std::array<double, M> d{};
    double trace = 0.0;
    for (std::size_t j = 0; j < M; ++j) {
        if (free[j]) trace += e.h[j][j];
    }
    // Small ridge keeps flat directions (sidekick logits constant per row) finite.
    const double ridge = 1e-10 * std::max(trace, 1e-300) + 1e-300;
    if constexpr (M == 1) {
        if (free[0]) d[0] = -e.g[0] / (e.h[0][0] + ridge);
    } else {
        static_assert(M == 2);
        if (free[0] && free[1]) {
            const double a = e.h[0][0] + ridge, b = e.h[0][1], c = e.h[1][1] + ridge;
            const double det = a * c - b * b;
            if (det > 0.0) {
                d[0] = (-c * e.g[0] + b * e.g[1]) / det;
                d[1] = (b * e.g[0] - a * e.g[1]) / det;
            } else {
                d[0] = -e.g[0] / a;
                d[1] = -e.g[1] / c;
            }
        } else if (free[0]) {
            d[0] = -e.g[0] / (e.h[0][0] + ridge);
        } else if (free[1]) {
            d[1] = -e.g[1] / (e.h[1][1] + ridge);
        }
    }
    return d;
}

template <std::size_t M>
NewtonOutcome projected_newton(const LinearNllProblem<M>& problem, std::array<double, M> t, double lower,
                               const NewtonOptions& opt) {
    using Problem = LinearNllProblem<M>;
    constexpr double kArmijo = 1e-4;
    constexpr int kMaxHalvings = 60;

    typename Problem::Eval e = problem.evaluate(t);
    if (!std::isfinite(e.f)) throw InputError("non-finite NLL objective (malformed logits?)");

    NewtonOutcome out;
    for (out.iterations = 0; out.iterations < opt.max_iterations; ++out.iterations) {
        std::array<bool, M> free{};
        double pg_norm2 = 0.0;
        for (std::size_t j = 0; j < M; ++j) {
            free[j] = !(t[j] <= lower && e.g[j] > 0.0);
            if (free[j]) pg_norm2 += e.g[j] * e.g[j];
        }
        if (std::sqrt(pg_norm2) < opt.gradient_tolerance) {
            out.converged = true;
            break;
        }

        auto d = newton_direction<M>(e, free);
        double slope = 0.0;
        for (std::size_t j = 0; j < M; ++j) slope += e.g[j] * d[j];
        if (!(slope < 0.0)) {
            // Not a descent direction; fall back to steepest descent on the free set.
            for (std::size_t j = 0; j < M; ++j) d[j] = free[j] ? -e.g[j] : 0.0;
        }

        bool accepted = false;
        std::array<double, M> trial{};
        double f_trial = e.f;
        double alpha = 1.0;
        for (int h = 0; h < kMaxHalvings; ++h, alpha *= 0.5) {
            double decrease = 0.0;
            for (std::size_t j = 0; j < M; ++j) {
                trial[j] = std::max(lower, t[j] + alpha * d[j]);
                decrease += e.g[j] * (trial[j] - t[j]);
            }
            f_trial = problem.value(trial);
            if (std::isfinite(f_trial) && f_trial <= e.f + kArmijo * decrease) {
                accepted = true;
                break;
            }
        }
        if (!accepted || f_trial > e.f) {
            // The line search has shrunk the step below resolution.
            out.converged = true;
            break;
        }

        const double delta_f = e.f - f_trial;
        t = trial;
        e = problem.evaluate(t);
        if (delta_f < opt.nll_tolerance) {
            ++out.iterations;
            out.converged = true;
            break;
        }
    }
    out.t.assign(t.begin(), t.end());
    out.f = e.f;
    return out;
}

}  // namespace

double pairwise_sum(std::span<const double> values) {
    constexpr std::size_t kBlock = 64;
    if (values.size() <= kBlock) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double nll(const ScoreMatrix& z, std::span<const std::uint32_t> labels) {
    if (labels.size() != z.rows() || z.rows() == 0) throw InputError("nll: labels length does not match logits");
    std::vector<double> terms(z.rows());
    for (std::size_t i = 0; i < z.rows(); ++i) {
        const auto row = z.row(i);
        const double zmax = *std::max_element(row.begin(), row.end());
        double s = 0.0;
        for (double v : row) s += std::exp(v - zmax);
        terms[i] = zmax + std::log(s) - row[labels[i]];
    }
    return pairwise_sum(terms) / static_cast<double>(z.rows());
}

NllGradient nll_gradient(const BundlePair& pair, const DuoWeights& w) {
    LinearNllProblem<2> problem({&pair.large().logits, &pair.small().logits}, pair.labels());
    const auto e = problem.evaluate({w.t_large, w.t_small});
    return {e.g[0], e.g[1]};
}

TuneResult fit_duo_temperatures(const BundlePair& val_pair, const NewtonOptions& options) {
    if (val_pair.split() != Split::Val) {
        throw InputError("temperature tuning requires validation-split bundles; refusing test split");
    }
    LinearNllProblem<2> problem({&val_pair.large().logits, &val_pair.small().logits}, val_pair.labels());
    const auto out = projected_newton<2>(problem, {1.0, 1.0}, 0.0, options);
    TuneResult r;
    r.weights = {out.t[0], out.t[1]};
    if (r.weights.t_large + r.weights.t_small <= 0.0) {
        throw InvariantError("tuning collapsed both temperatures to zero");
    }
    r.val_nll = out.f;
    r.iterations = out.iterations;
    r.converged = out.converged;
    return r;
}

SingleTemperature fit_single_temperature(const LogitBundle& val_bundle, const NewtonOptions& options) {
    if (val_bundle.meta.split != Split::Val) {
        throw InputError("temperature scaling requires a validation-split bundle; refusing test split");
    }
    LinearNllProblem<1> problem({&val_bundle.logits}, val_bundle.labels);
    constexpr double kMinScale = 1e-8;
    const auto out = projected_newton<1>(problem, {1.0}, kMinScale, options);
    return {out.t[0], out.f};
}

}  // namespace duo
