#include "duo/logit_store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>
#include <json.hpp>

#include "duo/errors.hpp"

namespace duo {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

constexpr const char* kMetaFile = "meta.json";
constexpr const char* kLogitsFile = "logits.f32";
constexpr const char* kLabelsFile = "labels.u32";

std::uint32_t to_little_endian(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
    }
    return v;
}

std::uint32_t read_u32le(const char* p) {
    std::uint32_t v;
    std::memcpy(&v, p, sizeof v);
    return to_little_endian(v);
}

void write_u32le(char* p, std::uint32_t v) {
    v = to_little_endian(v);
    std::memcpy(p, &v, sizeof v);
}

std::string read_file(const fs::path& path) {
    if (!fs::exists(path)) throw InputError(fmt::format("missing file: {}", path.string()));
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError(fmt::format("cannot open {}", path.string()));
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError(fmt::format("cannot write {}", path.string()));
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InputError(fmt::format("write failed: {}", path.string()));
}

template <class T>
T required(const json& meta, const char* key, const fs::path& path) {
    auto it = meta.find(key);
    if (it == meta.end()) throw InputError(fmt::format("{}: missing key \"{}\"", path.string(), key));
    try {
        return it->get<T>();
    } catch (const json::exception& e) {
        throw InputError(fmt::format("{}: bad value for \"{}\": {}", path.string(), key, e.what()));
    }
}

ModelMeta parse_meta(const fs::path& path) {
    const std::string text = read_file(path);
    json meta;
    try {
        meta = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InputError(fmt::format("{}: invalid JSON at byte offset {}: {}", path.string(), e.byte, e.what()));
    }
    if (!meta.is_object()) throw InputError(fmt::format("{}: expected a JSON object", path.string()));

    const auto version = required<int>(meta, "format_version", path);
    if (version != kBundleFormatVersion) {
        throw InputError(fmt::format("{}: unsupported version {} (expected {})", path.string(), version,
                                     kBundleFormatVersion));
    }

    ModelMeta m;
    m.model_name = required<std::string>(meta, "model_name", path);
    m.dataset = required<std::string>(meta, "dataset", path);
    try {
        m.split = parse_split(required<std::string>(meta, "split", path));
    } catch (const InputError& e) {
        throw InputError(fmt::format("{}: {}", path.string(), e.what()));
    }
    const auto k = required<std::int64_t>(meta, "num_classes", path);
    const auto n = required<std::int64_t>(meta, "num_samples", path);
    if (k < 2) throw InputError(fmt::format("{}: num_classes must be >= 2, got {}", path.string(), k));
    if (n < 1) throw InputError(fmt::format("{}: num_samples must be >= 1, got {}", path.string(), n));
    m.num_classes = static_cast<std::size_t>(k);
    m.num_samples = static_cast<std::size_t>(n);
    m.flops = required<double>(meta, "flops", path);
    if (!std::isfinite(m.flops) || m.flops < 0.0) {
        throw InputError(fmt::format("{}: flops must be finite and >= 0, got {}", path.string(), m.flops));
    }
    m.params = required<std::uint64_t>(meta, "params", path);
    return m;
}

}  // namespace

std::string_view to_string(Split split) {
    return split == Split::Val ? "val" : "test";
}

Split parse_split(std::string_view text) {
    if (text == "val") return Split::Val;
    if (text == "test") return Split::Test;
    throw InputError(fmt::format("unknown split \"{}\" (expected val or test)", text));
}

void validate(const LogitBundle& b) {
    const auto& m = b.meta;
    if (m.num_classes < 2) throw InputError(fmt::format("num_classes must be >= 2, got {}", m.num_classes));
    if (m.num_samples < 1) throw InputError("num_samples must be >= 1");
    if (!std::isfinite(m.flops) || m.flops < 0.0) throw InputError("flops must be finite and >= 0");
    if (b.logits.rows() != m.num_samples || b.logits.cols() != m.num_classes) {
        throw InputError(fmt::format("logits shape {}x{} does not match meta {}x{}", b.logits.rows(),
                                     b.logits.cols(), m.num_samples, m.num_classes));
    }
    if (b.labels.size() != m.num_samples) {
        throw InputError(fmt::format("labels length {} does not match num_samples {}", b.labels.size(),
                                     m.num_samples));
    }
    const auto values = b.logits.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            throw InputError(fmt::format("non-finite logit at sample {}, class {}", i / m.num_classes,
                                         i % m.num_classes));
        }
    }
    for (std::size_t i = 0; i < b.labels.size(); ++i) {
        if (b.labels[i] >= m.num_classes) {
            throw InputError(fmt::format("label out of range at sample {}: {} >= {}", i, b.labels[i],
                                         m.num_classes));
        }
    }
}

BundlePair make_bundle_pair(LogitBundle large, LogitBundle small) {
    validate(large);
    validate(small);
    const auto& a = large.meta;
    const auto& b = small.meta;
    if (a.dataset != b.dataset) {
        throw InputError(fmt::format("pair dataset mismatch: \"{}\" vs \"{}\"", a.dataset, b.dataset));
    }
    if (a.split != b.split) {
        throw InputError(fmt::format("pair split mismatch: {} vs {}", to_string(a.split), to_string(b.split)));
    }
    if (a.num_classes != b.num_classes || a.num_samples != b.num_samples) {
        throw InputError(fmt::format("pair shape mismatch: {}x{} vs {}x{}", a.num_samples, a.num_classes,
                                     b.num_samples, b.num_classes));
    }
    if (large.labels != small.labels) throw InputError("pair labels differ");
    if (a.flops < b.flops) {
        throw InputError(fmt::format("large member has fewer FLOPs than small ({} < {})", a.flops, b.flops));
    }
    return BundlePair(std::move(large), std::move(small));
}

LogitBundle load_bundle(const std::filesystem::path& dir) {
    if (!fs::is_directory(dir)) throw InputError(fmt::format("not a bundle directory: {}", dir.string()));

    LogitBundle b;
    b.meta = parse_meta(dir / kMetaFile);
    const std::size_t n = b.meta.num_samples;
    const std::size_t k = b.meta.num_classes;

    const auto logits_path = dir / kLogitsFile;
    const std::string logit_bytes = read_file(logits_path);
    if (logit_bytes.size() != 4 * n * k) {
        throw InputError(fmt::format("{}: payload size mismatch: expected {} bytes (4*N*K), found {}",
                                     logits_path.string(), 4 * n * k, logit_bytes.size()));
    }
    std::vector<float> values(n * k);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const float v = std::bit_cast<float>(read_u32le(logit_bytes.data() + 4 * i));
        if (!std::isfinite(v)) {
            throw InputError(fmt::format("{}: non-finite logit at byte offset {} (sample {}, class {})",
                                         logits_path.string(), 4 * i, i / k, i % k));
        }
        values[i] = v;
    }
    b.logits = LogitMatrix(n, k, std::move(values));

    const auto labels_path = dir / kLabelsFile;
    const std::string label_bytes = read_file(labels_path);
    if (label_bytes.size() != 4 * n) {
        throw InputError(fmt::format("{}: payload size mismatch: expected {} bytes (4*N), found {}",
                                     labels_path.string(), 4 * n, label_bytes.size()));
    }
    b.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t y = read_u32le(label_bytes.data() + 4 * i);
        if (y >= k) {
            throw InputError(fmt::format("{}: label out of range at byte offset {} (sample {}): {} >= {}",
                                         labels_path.string(), 4 * i, i, y, k));
        }
        b.labels[i] = y;
    }
    return b;
}

void save_bundle(const LogitBundle& b, const std::filesystem::path& dir) {
    validate(b);

    ordered_json meta;
    meta["model_name"] = b.meta.model_name;
    meta["dataset"] = b.meta.dataset;
    meta["split"] = std::string(to_string(b.meta.split));
    meta["num_classes"] = b.meta.num_classes;
    meta["num_samples"] = b.meta.num_samples;
    meta["flops"] = b.meta.flops;
    meta["params"] = b.meta.params;
    meta["format_version"] = kBundleFormatVersion;

    std::string logit_bytes(4 * b.logits.size(), '\0');
    const auto values = b.logits.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
        write_u32le(logit_bytes.data() + 4 * i, std::bit_cast<std::uint32_t>(values[i]));
    }
    std::string label_bytes(4 * b.labels.size(), '\0');
    for (std::size_t i = 0; i < b.labels.size(); ++i) write_u32le(label_bytes.data() + 4 * i, b.labels[i]);

    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
    write_file(dir / kMetaFile, meta.dump(2) + "\n");
    write_file(dir / kLogitsFile, logit_bytes);
    write_file(dir / kLabelsFile, label_bytes);
}

double flops_balance(double small_flops, double large_flops) {
    if (!(large_flops > 0.0)) throw InputError("undefined balance: large model FLOPs must be > 0");
    return small_flops / large_flops;
}

double flops_balance(const BundlePair& pair) {
    return flops_balance(pair.small().meta.flops, pair.large().meta.flops);
}

}  // namespace duo
