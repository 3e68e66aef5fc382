#pragma once

#include "swarch/black_scholes.hpp"
#include "swarch/model.hpp"
#include "swarch/restart_inference.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace swarch {

struct PricingConfig {
    InferenceConfig inference;
    int n_real = 100;       // forward Y simulations per rho_bar
    int quad_nodes = 96;    // log-sigma trapezoid nodes per inverse-Gamma component
    int threads = 1;
    /// Replaces every rho_hat by a point mass at this per-step volatility.
    std::optional<double> point_mass_sigma;

    void validate(const ModelParams& p) const;
};

struct SigmaTildeStats {
    double mean = 0.0;  // E[sigma_tilde] over past samples, scenarios and rho_bar
    double rms = 0.0;   // sqrt(E[sigma_tilde^2])
    // quantiles over (past sample, scenario) pairs of the per-scenario rms sigma_tilde
    double q05 = 0.0;
    double q50 = 0.0;
    double q95 = 0.0;
};

struct PriceResult {
    double price = 0.0;
    double delta = 0.0;
    SigmaTildeStats sigma_tilde_stats;
    std::size_t n_scenarios = 0;  // future scenarios per past sample
    int n_mc = 0;
    int n_unique_paths = 0;       // distinct sampled past strings
};

/// Model price and Delta of a call: samples past restart strings from `history`
/// (returns up to x_{t0-1}), enumerates future scenarios with at most
/// cfg.inference.max_future_restarts restarts, and averages the closed-form
/// conditional price over rho_bar.
PriceResult price_option(const ContractSpec& contract, const ReturnSeries& history,
                         const ModelParams& p, const PricingConfig& cfg, std::uint64_t seed);

/// Same, for several strikes sharing t0, T and S_prev (one pass over past samples).
std::vector<PriceResult> price_strikes(const ContractSpec& contract, std::span<const double> strikes,
                                       const ReturnSeries& history, const ModelParams& p,
                                       const PricingConfig& cfg, std::uint64_t seed);

/// Pricing stage given already-sampled past strings (each covering [t0-M, t0-1]).
/// Identical strings are merged; the i-th distinct string uses the forward-simulation
/// seed derive_seed(seed, {i}).
std::vector<PriceResult> price_given_past(const ContractSpec& contract, std::span<const double> strikes,
                                          const ReturnSeries& history,
                                          const std::vector<RestartPath>& past, const ModelParams& p,
                                          const PricingConfig& cfg, std::uint64_t seed);

}  // namespace swarch
