#pragma once

// Synthetic asymmetric classifier pairs.
//
// Per sample: a label is drawn uniformly. Each member then decides whether it
// is "correct" by comparing a difficulty draw w in [0,1) to its target
// accuracy. With probability rho both members share the same w (a mixture
// copula between comonotone and independent errors); otherwise each draws its
// own. A correct member aims at the label, an incorrect one at a uniformly
// random wrong class. Its logits are
//
//     inflation * (noise * N(0, I) + margin * (1 - margin_spread * w) * e_aimed)
//
// so harder samples (larger w) get smaller margins, which is what makes
// confidence informative about correctness. margin_spread = 0 gives a fixed
// margin.
//
// Random numbers come from std::mt19937_64, whose integer stream is fixed by
// the C++ standard, with the conversions below done by hand:
//   uniform  = (x >> 11) * 2^-53
//   bounded  = rejection sampling on x mod n
//   normal   = Box-Muller on two uniforms, cosine branch only

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "duo/logit_store.hpp"

namespace duo {

struct SimSpec {
    std::size_t num_classes = 10;
    std::size_t n_val = 5000;
    std::size_t n_test = 20000;
    double acc_large = 0.85;
    double acc_small = 0.70;
    double error_correlation = 0.3;
    double margin = 10.0;
    double margin_spread = 0.6;
    double noise = 1.0;
    double inflation_large = 1.0;
    double inflation_small = 1.0;
    /// FLOPs(small) / FLOPs(large) recorded in the generated metadata.
    double balance = 0.1;
    std::uint64_t seed = 0;
    std::string dataset = "synthetic";
    std::string large_name = "sim-large";
    std::string small_name = "sim-small";
};

/// Throws InputError on the first invalid field.
void validate(const SimSpec& spec);

SimSpec sim_spec_from_json(const std::string& text);
std::string sim_spec_to_json(const SimSpec& spec);

struct SimulatedPairs {
    BundlePair val;
    BundlePair test;
};

SimulatedPairs generate(const SimSpec& spec);

/// Human-readable summary, including the FLOPs metadata the bundles carry.
std::string describe(const SimSpec& spec);

/// Writes large_val/, large_test/, small_val/, small_test/ under `dir`.
void write_simulation(const SimulatedPairs& pairs, const std::filesystem::path& dir);

class SimRng {
public:
    explicit SimRng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    /// Uniform integer in [0, n).
    std::uint64_t bounded(std::uint64_t n);
    double normal();

private:
    std::mt19937_64 engine_;
};

}  // namespace duo
