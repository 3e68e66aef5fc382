#pragma once

#include "swarch/model.hpp"
#include "swarch/pricing.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>

namespace swarch {

/// Everything a run needs besides file paths: model parameters, inference and pricing
/// settings, seed and thread count. Read from flat `key=value` files whose keys are the
/// field names below; unknown keys are rejected.
struct RunConfig {
    ModelParams params;
    PricingConfig pricing;
    std::optional<double> sigma_bs;   // per-step Black-Scholes volatility
    std::optional<std::uint64_t> seed;
    int threads = 1;

    /// Applies key/value overrides (same keys as the file format).
    void apply(const std::map<std::string, std::string>& values);
    /// Sorted key=value lines of every effective setting.
    std::string canonical() const;
    /// FNV-1a 64 of canonical(), as 16 hex digits.
    std::string hash() const;
};

RunConfig load_run_config(const std::string& path);

/// FNV-1a 64-bit hash in hex.
std::string fnv1a_hex(const std::string& text);

}  // namespace swarch
