#include "duo/simulate.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>
#include <json.hpp>

#include "duo/errors.hpp"

namespace duo {
namespace {

struct MemberParams {
    double accuracy;
    double inflation;
};

// Draws one split for both members from the shared stream.
std::pair<LogitBundle, LogitBundle> draw_split(const SimSpec& spec, std::size_t n, Split split, SimRng& rng) {
    const std::size_t k = spec.num_classes;
    const MemberParams members[2] = {{spec.acc_large, spec.inflation_large}, {spec.acc_small, spec.inflation_small}};

    std::vector<float> logits[2] = {std::vector<float>(n * k), std::vector<float>(n * k)};
    std::vector<std::uint32_t> labels(n);
    std::vector<double> row(k);

    for (std::size_t i = 0; i < n; ++i) {
        const auto label = static_cast<std::uint32_t>(rng.bounded(k));
        labels[i] = label;
        const double shared = rng.uniform();
        const bool use_shared = rng.uniform() < spec.error_correlation;
        for (int m = 0; m < 2; ++m) {
            const double own = rng.uniform();
            const double w = use_shared ? shared : own;
            const auto wrong = static_cast<std::uint32_t>((label + 1 + rng.bounded(k - 1)) % k);
            const std::uint32_t aimed = w < members[m].accuracy ? label : wrong;
            for (std::size_t c = 0; c < k; ++c) row[c] = spec.noise * rng.normal();
            row[aimed] += spec.margin * (1.0 - spec.margin_spread * w);
            float* dst = logits[m].data() + i * k;
            for (std::size_t c = 0; c < k; ++c) dst[c] = static_cast<float>(members[m].inflation * row[c]);
        }
    }

    auto make = [&](int m, const std::string& name, double flops) {
        LogitBundle b;
        b.meta = {name, spec.dataset, split, k, n, flops, 0};
        b.logits = LogitMatrix(n, k, std::move(logits[m]));
        b.labels = labels;
        return b;
    };
    return {make(0, spec.large_name, 1.0), make(1, spec.small_name, spec.balance)};
}

template <class T>
void read_field(const nlohmann::json& j, const char* key, T& field) {
    auto it = j.find(key);
    if (it == j.end()) return;
    try {
        field = it->get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw InputError(fmt::format("simulation spec: bad value for \"{}\": {}", key, e.what()));
    }
}

}  // namespace

std::uint64_t SimRng::bounded(std::uint64_t n) {
    // Reject the low residue class so every value in [0, n) is equally likely.
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
        const std::uint64_t x = next();
        if (x >= threshold) return x % n;
    }
}

double SimRng::normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void validate(const SimSpec& s) {
    auto fail = [](const std::string& msg) { throw InputError("invalid simulation spec: " + msg); };
    if (s.num_classes < 2) fail("num_classes must be >= 2");
    if (s.n_val < 1) fail("n_val must be >= 1");
    if (s.n_test < 1) fail("n_test must be >= 1");
    const double chance = 1.0 / static_cast<double>(s.num_classes);
    for (auto [name, acc] : {std::pair{"acc_large", s.acc_large}, std::pair{"acc_small", s.acc_small}}) {
        if (!(acc > chance && acc < 1.0)) fail(fmt::format("{} must lie in (1/K, 1), got {}", name, acc));
    }
    if (s.acc_large < s.acc_small) fail("acc_large must be >= acc_small");
    if (!(s.error_correlation >= 0.0 && s.error_correlation <= 1.0)) fail("error_correlation must lie in [0, 1]");
    if (!(s.margin > 0.0 && std::isfinite(s.margin))) fail("margin must be finite and > 0");
    if (!(s.margin_spread >= 0.0 && s.margin_spread < 1.0)) fail("margin_spread must lie in [0, 1)");
    if (!(s.noise > 0.0 && std::isfinite(s.noise))) fail("noise must be finite and > 0");
    if (!(s.inflation_large > 0.0 && std::isfinite(s.inflation_large))) fail("inflation_large must be finite and > 0");
    if (!(s.inflation_small > 0.0 && std::isfinite(s.inflation_small))) fail("inflation_small must be finite and > 0");
    if (!(s.balance >= 0.0 && s.balance <= 1.0)) fail("balance must lie in [0, 1]");
}

SimSpec sim_spec_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(fmt::format("simulation spec: invalid JSON at byte offset {}: {}", e.byte, e.what()));
    }
    if (!j.is_object()) throw InputError("simulation spec: expected a JSON object");
    // Signed reads so that negative sizes are reported rather than wrapped.
    std::int64_t k = 10, n_val = 5000, n_test = 20000;
    SimSpec s;
    read_field(j, "num_classes", k);
    read_field(j, "n_val", n_val);
    read_field(j, "n_test", n_test);
    if (k < 0 || n_val < 0 || n_test < 0) throw InputError("invalid simulation spec: sizes must be non-negative");
    s.num_classes = static_cast<std::size_t>(k);
    s.n_val = static_cast<std::size_t>(n_val);
    s.n_test = static_cast<std::size_t>(n_test);
    read_field(j, "acc_large", s.acc_large);
    read_field(j, "acc_small", s.acc_small);
    read_field(j, "error_correlation", s.error_correlation);
    read_field(j, "margin", s.margin);
    read_field(j, "margin_spread", s.margin_spread);
    read_field(j, "noise", s.noise);
    read_field(j, "inflation_large", s.inflation_large);
    read_field(j, "inflation_small", s.inflation_small);
    read_field(j, "balance", s.balance);
    read_field(j, "seed", s.seed);
    read_field(j, "dataset", s.dataset);
    read_field(j, "large_name", s.large_name);
    read_field(j, "small_name", s.small_name);
    validate(s);
    return s;
}

std::string sim_spec_to_json(const SimSpec& s) {
    nlohmann::ordered_json j;
    j["num_classes"] = s.num_classes;
    j["n_val"] = s.n_val;
    j["n_test"] = s.n_test;
    j["acc_large"] = s.acc_large;
    j["acc_small"] = s.acc_small;
    j["error_correlation"] = s.error_correlation;
    j["margin"] = s.margin;
    j["margin_spread"] = s.margin_spread;
    j["noise"] = s.noise;
    j["inflation_large"] = s.inflation_large;
    j["inflation_small"] = s.inflation_small;
    j["balance"] = s.balance;
    j["seed"] = s.seed;
    j["dataset"] = s.dataset;
    j["large_name"] = s.large_name;
    j["small_name"] = s.small_name;
    return j.dump(2);
}

SimulatedPairs generate(const SimSpec& spec) {
    validate(spec);
    SimRng rng(spec.seed);
    auto [large_val, small_val] = draw_split(spec, spec.n_val, Split::Val, rng);
    auto [large_test, small_test] = draw_split(spec, spec.n_test, Split::Test, rng);
    return {make_bundle_pair(std::move(large_val), std::move(small_val)),
            make_bundle_pair(std::move(large_test), std::move(small_test))};
}

std::string describe(const SimSpec& s) {
    validate(s);
    return fmt::format(
        "synthetic pair on \"{}\": K={} n_val={} n_test={} seed={}\n"
        "  {}: target accuracy {}, inflation {}, flops {}\n"
        "  {}: target accuracy {}, inflation {}, flops {}\n"
        "  error correlation {}, margin {} (spread {}), noise {}\n"
        "  flops balance {}\n",
        s.dataset, s.num_classes, s.n_val, s.n_test, s.seed, s.large_name, s.acc_large, s.inflation_large, 1.0,
        s.small_name, s.acc_small, s.inflation_small, s.balance, s.error_correlation, s.margin, s.margin_spread,
        s.noise, s.balance);
}

void write_simulation(const SimulatedPairs& pairs, const std::filesystem::path& dir) {
    save_bundle(pairs.val.large(), dir / "large_val");
    save_bundle(pairs.test.large(), dir / "large_test");
    save_bundle(pairs.val.small(), dir / "small_val");
    save_bundle(pairs.test.small(), dir / "small_test");
}

}  // namespace duo
