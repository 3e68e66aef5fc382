#pragma once

#include "swarch/model.hpp"

#include <span>

namespace swarch {

/// Standard normal CDF, accurate to ~1e-16 absolute.
double normal_cdf(double x);

/// A European call on S with strike K, priced at step t0 and expiring at step T.
struct ContractSpec {
    double K = 0.0;
    long t0 = 1;
    long T = 1;
    double S_prev = 0.0;  // S_{t0-1}

    long steps() const { return T - t0 + 1; }
    void validate() const;
};

/// Gaussian density with standard deviation sigma*a(i) and mean gamma - (sigma*a(i))^2/2,
/// gamma = ln(1+r) - mu.
double martingale_kernel(double x, double sigma, State i, const ModelParams& p);

/// sigma * sqrt(sum a^2(i_t)).
double sigma_tilde(double sigma, std::span<const State> states, double D);

/// Closed-form price and Delta as functions of the effective volatility.
/// sigma_tilde = 0 gives the deterministic limit.
double call_price_effective(const ContractSpec& c, double sigma_tilde, double r);
double call_delta_effective(const ContractSpec& c, double sigma_tilde, double r);

/// Conditional price and Delta given sigma and the future states i_{t0}, ..., i_T.
double conditional_call_price(const ContractSpec& c, double sigma, std::span<const State> states,
                              const ModelParams& p);
double conditional_delta(const ContractSpec& c, double sigma, std::span<const State> states,
                         const ModelParams& p);

/// Discrete Black-Scholes: a = 1 and a constant per-step volatility.
double bs_price(const ContractSpec& c, double sigma_bs, double r);

/// Per-step volatility reproducing `market_price` to 1e-8 in price.
/// Throws NumericError when the price is at or outside the no-arbitrage bounds.
double bs_implied_vol(const ContractSpec& c, double market_price, double r);

}  // namespace swarch
