#include "swarch/black_scholes.hpp"

#include "swarch/errors.hpp"

#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <numbers>
#include <vector>

namespace swarch {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

void ContractSpec::validate() const {
    if (!(K > 0.0)) throw DomainError("contract: strike must be > 0");
    if (T < t0) throw DomainError("contract: need T >= t0");
    if (!(S_prev > 0.0)) throw DomainError("contract: S_prev must be > 0");
}

double martingale_kernel(double x, double sigma, State i, const ModelParams& p) {
    if (!(sigma > 0.0)) throw DomainError("martingale_kernel: sigma must be > 0");
    const double s = sigma * a_coefficient(i, p.D);
    const double gamma = std::log1p(p.r) - p.mu;
    const double z = (x - gamma + 0.5 * s * s) / s;
    return std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * std::numbers::pi));
}

double sigma_tilde(double sigma, std::span<const State> states, double D) {
    if (!(sigma >= 0.0)) throw DomainError("sigma_tilde: sigma must be >= 0");
    double sum = 0.0;
    for (State i : states) {
        const double a = a_coefficient(i, D);
        sum += a * a;
    }
    return sigma * std::sqrt(sum);
}

namespace {

struct D12 {
    double plus;
    double minus;
};

D12 d_terms(const ContractSpec& c, double st, double r) {
    const double drift = std::log(c.S_prev / c.K) + static_cast<double>(c.steps()) * std::log1p(r);
    return {(drift + 0.5 * st * st) / st, (drift - 0.5 * st * st) / st};
}

// K (1+r)^{t0-T-1}
double discounted_strike(const ContractSpec& c, double r) {
    return c.K * std::exp(-static_cast<double>(c.steps()) * std::log1p(r));
}

}  // namespace

double call_price_effective(const ContractSpec& c, double st, double r) {
    c.validate();
    if (!(st >= 0.0)) throw DomainError("call price: effective volatility must be >= 0");
    if (st == 0.0) return (1.0 + r) * std::max(c.S_prev - discounted_strike(c, r), 0.0);
    const auto d = d_terms(c, st, r);
    return (1.0 + r) * (c.S_prev * normal_cdf(d.plus) - discounted_strike(c, r) * normal_cdf(d.minus));
}

double call_delta_effective(const ContractSpec& c, double st, double r) {
    c.validate();
    if (!(st >= 0.0)) throw DomainError("call delta: effective volatility must be >= 0");
    if (st == 0.0) return c.S_prev > discounted_strike(c, r) ? 1.0 + r : 0.0;
    return (1.0 + r) * normal_cdf(d_terms(c, st, r).plus);
}

double conditional_call_price(const ContractSpec& c, double sigma, std::span<const State> states,
                              const ModelParams& p) {
    if (static_cast<long>(states.size()) != c.steps()) {
        throw DomainError("conditional_call_price: need one state per step in [t0, T]");
    }
    return call_price_effective(c, sigma_tilde(sigma, states, p.D), p.r);
}

double conditional_delta(const ContractSpec& c, double sigma, std::span<const State> states,
                         const ModelParams& p) {
    if (static_cast<long>(states.size()) != c.steps()) {
        throw DomainError("conditional_delta: need one state per step in [t0, T]");
    }
    return call_delta_effective(c, sigma_tilde(sigma, states, p.D), p.r);
}

double bs_price(const ContractSpec& c, double sigma_bs, double r) {
    if (!(sigma_bs >= 0.0)) throw DomainError("bs_price: sigma must be >= 0");
    return call_price_effective(c, sigma_bs * std::sqrt(static_cast<double>(c.steps())), r);
}

double bs_implied_vol(const ContractSpec& c, double market_price, double r) {
    c.validate();
    const double lower = bs_price(c, 0.0, r);
    const double upper = (1.0 + r) * c.S_prev;
    const double tol = 1e-12 * upper;
    if (!(market_price > lower + tol) || !(market_price < upper - tol)) {
        throw NumericError("bs_implied_vol: price outside the open no-arbitrage interval, no solution");
    }
    const double sqrt_n = std::sqrt(static_cast<double>(c.steps()));
    auto f = [&](double st) { return call_price_effective(c, st, r) - market_price; };
    // bracket in effective volatility
    double hi = 0.1;
    while (f(hi) < 0.0) {
        hi *= 2.0;
        if (hi > 1e3) throw NumericError("bs_implied_vol: could not bracket the root");
    }
    double lo = hi / 2.0;
    while (f(lo) > 0.0) {
        lo /= 2.0;
        if (lo < 1e-300) throw NumericError("bs_implied_vol: could not bracket the root");
    }
    std::uintmax_t iters = 200;
    const auto root = boost::math::tools::toms748_solve(
        f, lo, hi, [](double a, double b) { return std::abs(b - a) <= 1e-15 * b; }, iters);
    const double st = 0.5 * (root.first + root.second);
    if (std::abs(f(st)) > 1e-8) {
        throw NumericError("bs_implied_vol: did not converge to 1e-8 in price");
    }
    return st / sqrt_n;
}

}  // namespace swarch
