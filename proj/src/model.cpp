#include "swarch/model.hpp"

#include "swarch/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace swarch {

void ModelParams::validate() const {
    if (!(D > 0.0)) throw DomainError("D must be > 0");
    if (!(nu > 0.0 && nu <= 1.0)) throw DomainError("nu must lie in (0, 1]");
    if (!(alpha > 0.0)) throw DomainError("alpha must be > 0");
    if (!(beta > 0.0)) throw DomainError("beta must be > 0");
    if (M < 1) throw DomainError("M must be >= 1");
    if (!(r >= 0.0)) throw DomainError("r must be >= 0");
    if (!std::isfinite(mu)) throw DomainError("mu must be finite");
}

bool RestartPath::satisfies_support() const {
    if (!(weight >= 0.0 && weight <= 1.0)) return false;
    for (std::size_t k = 0; k < states.size(); ++k) {
        if (states[k] < 1) return false;
        if (k > 0 && states[k] != 1 && states[k] != states[k - 1] + 1) return false;
    }
    return true;
}

double a_coefficient(State i, double D) {
    if (i < 1) throw DomainError("a_coefficient: state must be >= 1");
    if (!(D > 0.0)) throw DomainError("a_coefficient: D must be > 0");
    if (i == 1 || D == 0.5) return 1.0;
    const double x = static_cast<double>(i);
    // i^{2D} - (i-1)^{2D} without cancellation for large i
    const double diff = -std::pow(x, 2.0 * D) * std::expm1(2.0 * D * std::log1p(-1.0 / x));
    return std::sqrt(diff);
}

double a_squared_run(State from, State to, double D) {
    if (from < 0 || to < from) throw DomainError("a_squared_run: need 0 <= from <= to");
    if (to == from) return 0.0;
    if (from == 0) return std::pow(static_cast<double>(to), 2.0 * D);
    const double f = static_cast<double>(from);
    const double ratio = static_cast<double>(to - from) / f;
    return std::pow(f, 2.0 * D) * std::expm1(2.0 * D * std::log1p(ratio));
}

double restart_initial_law(State i, double nu) {
    if (i < 1) throw DomainError("restart_initial_law: state must be >= 1");
    if (!(nu > 0.0 && nu <= 1.0)) throw DomainError("restart_initial_law: nu must lie in (0, 1]");
    if (nu == 1.0) return i == 1 ? 1.0 : 0.0;
    return nu * std::exp(static_cast<double>(i - 1) * std::log1p(-nu));
}

double restart_transition(State i, State j, double nu) {
    if (i < 1 || j < 1) throw DomainError("restart_transition: states must be >= 1");
    double p = 0.0;
    if (i == 1) p += nu;
    if (i == j + 1) p += 1.0 - nu;
    return p;
}

double draw_residual(Rng& rng, double shape) {
    std::normal_distribution<double> normal;
    std::chi_squared_distribution<double> chi2(shape);
    const double g = normal(rng);
    return g / std::sqrt(chi2(rng));
}

std::vector<double> y_from_residuals(const ModelParams& p, std::span<const double> z) {
    std::vector<double> y(z.size());
    const double beta2 = p.beta * p.beta;
    for (std::size_t t = 0; t < z.size(); ++t) {
        const std::size_t lags = std::min<std::size_t>(t, static_cast<std::size_t>(p.M));
        double s = beta2;
        for (std::size_t n = 1; n <= lags; ++n) s += y[t - n] * y[t - n];
        y[t] = std::sqrt(s) * z[t];
    }
    return y;
}

std::vector<double> simulate_y(const ModelParams& p, int horizon, std::uint64_t seed) {
    p.validate();
    if (horizon < 1) throw DomainError("simulate_y: horizon must be >= 1");
    Rng rng{seed};
    std::vector<double> z(static_cast<std::size_t>(horizon));
    for (int n = 1; n <= horizon; ++n) {
        const double shape = p.alpha + std::min(n - 1, p.M);
        z[static_cast<std::size_t>(n - 1)] = draw_residual(rng, shape);
    }
    return y_from_residuals(p, z);
}

RestartPath simulate_i_from(const ModelParams& p, State first, int horizon, Rng& rng) {
    if (horizon < 1) throw DomainError("simulate_i: horizon must be >= 1");
    if (first < 1) throw DomainError("simulate_i: first state must be >= 1");
    RestartPath path;
    path.t_start = 1;
    path.t_end = horizon;
    path.states.reserve(static_cast<std::size_t>(horizon));
    path.states.push_back(first);
    std::bernoulli_distribution restart(p.nu);
    for (int t = 1; t < horizon; ++t) {
        path.states.push_back(restart(rng) ? 1 : path.states.back() + 1);
    }
    return path;
}

RestartPath simulate_i(const ModelParams& p, int horizon, std::uint64_t seed) {
    p.validate();
    Rng rng{seed};
    State first = 1;
    if (p.nu < 1.0) {
        std::geometric_distribution<State> geom(p.nu);
        first = geom(rng) + 1;
    }
    return simulate_i_from(p, first, horizon, rng);
}

std::vector<double> compose_returns(std::span<const double> y, std::span<const State> states,
                                    double D) {
    if (y.size() != states.size()) throw DomainError("compose_returns: length mismatch");
    std::vector<double> x(y.size());
    for (std::size_t t = 0; t < y.size(); ++t) x[t] = a_coefficient(states[t], D) * y[t];
    return x;
}

SimulatedPath simulate_x(const ModelParams& p, int horizon, std::uint64_t seed) {
    SimulatedPath out;
    out.y = simulate_y(p, horizon, derive_seed(seed, {0}));
    out.states = simulate_i(p, horizon, derive_seed(seed, {1})).states;
    out.a.resize(out.y.size());
    for (std::size_t t = 0; t < out.y.size(); ++t) out.a[t] = a_coefficient(out.states[t], p.D);
    out.x = compose_returns(out.y, out.states, p.D);
    return out;
}

double log_phi_density(std::span<const double> y, double alpha, double beta) {
    if (y.empty()) throw DomainError("phi_density: need at least one value");
    const double t = static_cast<double>(y.size());
    double s = beta * beta;
    for (double v : y) s += v * v;
    return alpha * std::log(beta) + std::lgamma(0.5 * (alpha + t)) -
           0.5 * t * std::log(std::numbers::pi) - std::lgamma(0.5 * alpha) -
           0.5 * (alpha + t) * std::log(s);
}

double phi_density(std::span<const double> y, double alpha, double beta) {
    return std::exp(log_phi_density(y, alpha, beta));
}

double log_conditional_y_density_lags(double y, std::span<const double> lags, double alpha,
                                      double beta) {
    const double shape = alpha + static_cast<double>(lags.size());
    double s = beta * beta;
    for (double v : lags) s += v * v;
    return std::lgamma(0.5 * (shape + 1.0)) - 0.5 * std::log(std::numbers::pi) -
           std::lgamma(0.5 * shape) + 0.5 * shape * std::log(s) -
           0.5 * (shape + 1.0) * std::log(s + y * y);
}

double conditional_y_density(double y, std::span<const double> lags, double alpha, double beta,
                             int M) {
    if (M < 1 || lags.size() != static_cast<std::size_t>(M)) {
        throw DomainError("conditional_y_density: expected exactly M conditioning values");
    }
    return std::exp(log_conditional_y_density_lags(y, lags, alpha, beta));
}

}  // namespace swarch
