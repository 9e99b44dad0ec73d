#pragma once

// On-disk logit bundles: a directory holding meta.json, logits.f32 (row-major
// little-endian float32, N x K) and labels.u32 (little-endian uint32, N).

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "duo/matrix.hpp"

namespace duo {

inline constexpr int kBundleFormatVersion = 1;

enum class Split { Val, Test };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct ModelMeta {
    std::string model_name;
    std::string dataset;
    Split split = Split::Val;
    std::size_t num_classes = 0;
    std::size_t num_samples = 0;
    double flops = 0.0;
    std::uint64_t params = 0;

    bool operator==(const ModelMeta&) const = default;
};

struct LogitBundle {
    ModelMeta meta;
    LogitMatrix logits;
    std::vector<std::uint32_t> labels;

    std::size_t num_samples() const noexcept { return meta.num_samples; }
    std::size_t num_classes() const noexcept { return meta.num_classes; }

    bool operator==(const LogitBundle&) const = default;
};

/// Throws InputError describing the first violated invariant.
void validate(const LogitBundle& bundle);

/// A (large, small) pair evaluated on the same samples. Only constructible
/// through make_bundle_pair, so every instance satisfies the pair invariants.
class BundlePair {
public:
    const LogitBundle& large() const noexcept { return large_; }
    const LogitBundle& small() const noexcept { return small_; }
    const std::vector<std::uint32_t>& labels() const noexcept { return large_.labels; }
    std::size_t num_samples() const noexcept { return large_.meta.num_samples; }
    std::size_t num_classes() const noexcept { return large_.meta.num_classes; }
    Split split() const noexcept { return large_.meta.split; }

private:
    friend BundlePair make_bundle_pair(LogitBundle large, LogitBundle small);
    BundlePair(LogitBundle large, LogitBundle small)
        : large_(std::move(large)), small_(std::move(small)) {}

    LogitBundle large_;
    LogitBundle small_;
};

/// Requires matching dataset, split, K, N and labels, and
/// large.flops >= small.flops.
BundlePair make_bundle_pair(LogitBundle large, LogitBundle small);

LogitBundle load_bundle(const std::filesystem::path& dir);

/// Refuses invalid bundles before touching the filesystem. Output is
/// byte-deterministic.
void save_bundle(const LogitBundle& bundle, const std::filesystem::path& dir);

/// FLOPs(small) / FLOPs(large).
double flops_balance(double small_flops, double large_flops);
double flops_balance(const BundlePair& pair);

}  // namespace duo
