#pragma once

#include <cstdint>
#include <span>

#include "duo/aggregate.hpp"
#include "duo/logit_store.hpp"
#include "duo/matrix.hpp"

namespace duo {

struct TuneResult {
    DuoWeights weights;
    double val_nll = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct SingleTemperature {
    /// Multiplicative convention: calibrated logits are scale * z (scale = 1/T).
    double scale = 1.0;
    double val_nll = 0.0;
};

struct NllGradient {
    double g_large = 0.0;
    double g_small = 0.0;
};

struct NewtonOptions {
    double nll_tolerance = 1e-10;
    double gradient_tolerance = 1e-8;
    int max_iterations = 500;
};

/// Mean negative log-likelihood of the labels under softmax(z), via log-sum-exp.
double nll(const ScoreMatrix& z, std::span<const std::uint32_t> labels);

/// Gradient of nll(t_large * a + t_small * b) with respect to (t_large, t_small).
NllGradient nll_gradient(const BundlePair& pair, const DuoWeights& w);

/// Fits (t_large, t_small) >= 0 by minimizing validation NLL. Refuses
/// test-split input.
TuneResult fit_duo_temperatures(const BundlePair& val_pair, const NewtonOptions& options = {});

/// Standard temperature scaling of a single model on its validation split.
SingleTemperature fit_single_temperature(const LogitBundle& val_bundle, const NewtonOptions& options = {});

/// Order-fixed pairwise summation; the result does not depend on threading.
double pairwise_sum(std::span<const double> values);

}  // namespace duo
