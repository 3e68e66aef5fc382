#include "swarch/volatility_mixture.hpp"

#include "csv.hpp"
#include "swarch/errors.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace swarch {

namespace {

void check_shape_scale(double shape, double scale) {
    if (!(shape > 0.0)) throw DomainError("inverse-Gamma law: shape must be > 0");
    if (!(scale > 0.0) || !std::isfinite(scale)) throw DomainError("inverse-Gamma law: scale must be > 0");
}

double log_inverse_gamma_sigma_density(double sigma, double shape, double scale) {
    return (1.0 - 0.5 * shape) * std::numbers::ln2 - std::lgamma(0.5 * shape) +
           shape * std::log(scale) - (shape + 1.0) * std::log(sigma) -
           scale * scale / (2.0 * sigma * sigma);
}

}  // namespace

double inverse_gamma_sigma_density(double sigma, double shape, double scale) {
    check_shape_scale(shape, scale);
    if (!(sigma > 0.0)) throw DomainError("inverse-Gamma density: sigma must be > 0");
    return std::exp(log_inverse_gamma_sigma_density(sigma, shape, scale));
}

double inverse_gamma_sigma_cdf(double sigma, double shape, double scale) {
    check_shape_scale(shape, scale);
    if (sigma <= 0.0) return 0.0;
    if (std::isinf(sigma)) return 1.0;
    return boost::math::gamma_q(0.5 * shape, scale * scale / (2.0 * sigma * sigma));
}

double inverse_gamma_sigma_quantile(double prob, double shape, double scale) {
    check_shape_scale(shape, scale);
    if (!(prob > 0.0 && prob < 1.0)) throw DomainError("inverse-Gamma quantile: prob must lie in (0, 1)");
    return scale / std::sqrt(2.0 * boost::math::gamma_q_inv(0.5 * shape, prob));
}

SigmaQuadrature inverse_gamma_sigma_quadrature(double shape, int nodes) {
    if (std::isinf(shape)) return {{1.0}, {1.0}};
    if (!(shape > 0.0)) throw DomainError("sigma quadrature: shape must be > 0");
    if (nodes < 2) throw DomainError("sigma quadrature: need at least two nodes");
    SigmaQuadrature rule;
    // Trapezoid rule in log sigma over the central mass of the law.
    const double lo = std::log(inverse_gamma_sigma_quantile(1e-15, shape, 1.0));
    const double hi = -0.5 * std::log(2.0 * boost::math::gamma_p_inv(0.5 * shape, 1e-24));
    const double h = (hi - lo) / (nodes - 1);
    double total = 0.0;
    for (int q = 0; q < nodes; ++q) {
        const double v = lo + h * q;
        const double w = std::exp(log_inverse_gamma_sigma_density(std::exp(v), shape, 1.0) + v);
        rule.multiplier.push_back(std::exp(v));
        rule.weight.push_back(w);
        total += w;
    }
    for (double& w : rule.weight) w /= total;
    return rule;
}

MixtureDensity::MixtureDensity(std::vector<MixtureComponent> components, MixtureProvenance provenance)
    : components_(std::move(components)), provenance_(provenance) {
    if (components_.empty()) throw DomainError("MixtureDensity: no components");
    double total = 0.0;
    for (const auto& c : components_) {
        if (!(c.weight >= 0.0)) throw DomainError("MixtureDensity: negative weight");
        if (!(c.scale > 0.0) || !(c.shape > 0.0)) throw DomainError("MixtureDensity: bad component");
        total += c.weight;
    }
    if (!(total > 0.0) || !std::isfinite(total)) throw DomainError("MixtureDensity: weights must have positive sum");
    for (auto& c : components_) c.weight /= total;
}

MixtureDensity MixtureDensity::point_mass(double sigma) {
    return MixtureDensity({{std::numeric_limits<double>::infinity(), sigma, 1.0}});
}

double MixtureDensity::density(double sigma) const {
    if (!(sigma > 0.0)) throw DomainError("MixtureDensity: sigma must be > 0");
    double v = 0.0;
    for (const auto& c : components_) {
        if (std::isinf(c.shape)) continue;
        v += c.weight * std::exp(log_inverse_gamma_sigma_density(sigma, c.shape, c.scale));
    }
    return v;
}

double MixtureDensity::cdf(double sigma) const {
    double v = 0.0;
    for (const auto& c : components_) {
        if (std::isinf(c.shape)) {
            if (sigma >= c.scale) v += c.weight;
        } else {
            v += c.weight * inverse_gamma_sigma_cdf(sigma, c.shape, c.scale);
        }
    }
    return std::min(v, 1.0);
}

double MixtureDensity::quantile(double prob) const {
    if (!(prob > 0.0 && prob < 1.0)) throw DomainError("MixtureDensity: prob must lie in (0, 1)");
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (const auto& c : components_) {
        if (std::isinf(c.shape)) {
            lo = std::min(lo, c.scale);
            hi = std::max(hi, c.scale);
        } else {
            lo = std::min(lo, inverse_gamma_sigma_quantile(prob, c.shape, c.scale));
            hi = std::max(hi, inverse_gamma_sigma_quantile(prob, c.shape, c.scale));
        }
    }
    // the mixture quantile lies between the extreme component quantiles
    double a = std::log(lo) - 1e-12;
    double b = std::log(hi) + 1e-12;
    for (int it = 0; it < 200 && b - a > 1e-14; ++it) {
        const double m = 0.5 * (a + b);
        (cdf(std::exp(m)) < prob ? a : b) = m;
    }
    return std::exp(b);
}

double MixtureDensity::second_moment() const {
    double v = 0.0;
    for (const auto& c : components_) {
        if (std::isinf(c.shape)) {
            v += c.weight * c.scale * c.scale;
        } else if (c.shape <= 2.0) {
            return std::numeric_limits<double>::infinity();
        } else {
            v += c.weight * c.scale * c.scale / (c.shape - 2.0);
        }
    }
    return v;
}

double MixtureDensity::mean() const {
    double v = 0.0;
    for (const auto& c : components_) {
        if (std::isinf(c.shape)) {
            v += c.weight * c.scale;
        } else if (c.shape <= 1.0) {
            return std::numeric_limits<double>::infinity();
        } else {
            v += c.weight * c.scale *
                 std::exp(std::lgamma(0.5 * (c.shape - 1.0)) - std::lgamma(0.5 * c.shape)) /
                 std::numbers::sqrt2;
        }
    }
    return v;
}

TabulatedMixture MixtureDensity::tabulate(std::span<const double> sigma_grid) const {
    if (sigma_grid.size() < 2) throw DomainError("tabulate: need at least two grid points");
    for (std::size_t k = 1; k < sigma_grid.size(); ++k) {
        if (!(sigma_grid[k] > sigma_grid[k - 1])) throw DomainError("tabulate: grid must be strictly increasing");
    }
    if (!(sigma_grid.front() > 0.0)) throw DomainError("tabulate: grid must be positive");
    TabulatedMixture out;
    out.sigma_grid.assign(sigma_grid.begin(), sigma_grid.end());
    const std::size_t n = sigma_grid.size();
    out.density.resize(n);
    out.weights.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        out.density[k] = density(sigma_grid[k]);
        const double left = k == 0 ? sigma_grid[0] : 0.5 * (sigma_grid[k - 1] + sigma_grid[k]);
        const double right = k + 1 == n ? sigma_grid[n - 1] : 0.5 * (sigma_grid[k] + sigma_grid[k + 1]);
        out.weights[k] = out.density[k] * (right - left);
    }
    for (const auto& c : components_) {
        if (!std::isinf(c.shape)) continue;
        const auto it = std::lower_bound(sigma_grid.begin(), sigma_grid.end(), c.scale);
        std::size_t k = static_cast<std::size_t>(it - sigma_grid.begin());
        if (k == n || (k > 0 && c.scale - sigma_grid[k - 1] < sigma_grid[k] - c.scale)) --k;
        out.weights[k] += c.weight;
    }
    double total = 0.0;
    for (double w : out.weights) total += w;
    if (!(total > 0.0)) throw NumericError("tabulate: no mass on the grid");
    for (double& w : out.weights) w /= total;
    return out;
}

std::vector<double> prior_sigma_grid(double alpha, double beta, int points) {
    if (points < 2) throw DomainError("prior_sigma_grid: need at least two points");
    const double lo = std::log(inverse_gamma_sigma_quantile(1e-4, alpha, beta));
    const double hi = std::log(inverse_gamma_sigma_quantile(1.0 - 1e-4, alpha, beta));
    std::vector<double> grid(static_cast<std::size_t>(points));
    for (int k = 0; k < points; ++k) grid[k] = std::exp(lo + (hi - lo) * k / (points - 1));
    return grid;
}

double rho_hat_closed_form(double sigma, std::span<const double> y_lags, double alpha, double beta,
                           int M) {
    if (static_cast<int>(y_lags.size()) != M) throw DomainError("rho_hat_closed_form: need exactly M lags");
    if (!(sigma > 0.0)) throw DomainError("rho_hat_closed_form: sigma must be > 0");
    double s2 = beta * beta;
    for (double y : y_lags) s2 += y * y;
    return inverse_gamma_sigma_density(sigma, alpha + M, std::sqrt(s2));
}

ForwardScales::ForwardScales(std::span<const double> y_history, int n_steps, const ModelParams& p,
                             int n_real, std::uint64_t seed)
    : n_steps_(n_steps), n_real_(n_real), shape_(p.alpha + p.M) {
    p.validate();
    if (static_cast<int>(y_history.size()) != p.M) throw DomainError("ForwardScales: need exactly M history values");
    if (n_steps < 1) throw DomainError("ForwardScales: need at least one step");
    if (n_real < 1) throw DomainError("ForwardScales: need at least one realisation");
    scales_.resize(static_cast<std::size_t>(n_steps) * n_real);
    const double beta2 = p.beta * p.beta;
    const auto M = static_cast<std::size_t>(p.M);
    std::vector<double> ring(y_history.begin(), y_history.end());
    for (int k = 0; k < n_real; ++k) {
        Rng rng = make_rng(seed, {static_cast<std::uint64_t>(k)});
        std::copy(y_history.begin(), y_history.end(), ring.begin());
        std::size_t oldest = 0;
        for (int j = 0; j < n_steps; ++j) {
            double s2 = beta2;
            for (double v : ring) s2 += v * v;
            const double s = std::sqrt(s2);
            scales_[static_cast<std::size_t>(k) * n_steps + j] = s;
            if (j + 1 < n_steps) {
                ring[oldest] = s * draw_residual(rng, shape_);
                oldest = (oldest + 1) % M;
            }
        }
    }
}

MixtureDensity propagate_rho_hat(std::span<const double> y_history, int steps_ahead,
                                 const ModelParams& p, int n_real, std::uint64_t seed) {
    if (steps_ahead < 0) throw DomainError("propagate_rho_hat: t must be >= t0");
    const double shape = p.alpha + p.M;
    MixtureProvenance prov{0, steps_ahead, -1, steps_ahead == 0 ? 0 : n_real};
    if (steps_ahead == 0) {
        if (static_cast<int>(y_history.size()) != p.M) throw DomainError("propagate_rho_hat: need exactly M history values");
        double s2 = p.beta * p.beta;
        for (double y : y_history) s2 += y * y;
        return MixtureDensity({{shape, std::sqrt(s2), 1.0}}, prov);
    }
    const ForwardScales fs(y_history, steps_ahead + 1, p, n_real, seed);
    std::vector<MixtureComponent> comps;
    comps.reserve(static_cast<std::size_t>(n_real));
    for (int k = 0; k < n_real; ++k) comps.push_back({shape, fs.scale(steps_ahead, k), 1.0});
    return MixtureDensity(std::move(comps), prov);
}

std::vector<double> demodulated_history(const ReturnSeries& history, const RestartPath& path, long t0,
                                        const ModelParams& p) {
    const long first = t0 - p.M;
    if (first < 1 || t0 - 1 > static_cast<long>(history.size())) {
        throw DomainError("history must cover [t0-M, t0-1]");
    }
    if (path.t_start > first || path.t_end < t0 - 1 ||
        static_cast<long>(path.states.size()) != path.t_end - path.t_start + 1) {
        throw DomainError("restart path must cover [t0-M, t0-1]");
    }
    std::vector<double> y;
    y.reserve(static_cast<std::size_t>(p.M));
    for (long t = first; t <= t0 - 1; ++t) {
        const State i = path.states[static_cast<std::size_t>(t - path.t_start)];
        y.push_back(history.returns[static_cast<std::size_t>(t - 1)] / a_coefficient(i, p.D));
    }
    return y;
}

MixtureDensity build_rho_bar(const ReturnSeries& history, const RestartPath& restart_path, long t0,
                             long T, const ModelParams& p, int n_real, std::uint64_t seed) {
    if (T < t0) throw DomainError("build_rho_bar: need T >= t0");
    if (restart_path.t_start > t0 - p.M || restart_path.t_end < T) {
        throw DomainError("build_rho_bar: restart path must cover [t0-M, T]");
    }
    const auto y = demodulated_history(history, restart_path, t0, p);
    const int n = static_cast<int>(T - t0 + 1);
    const double shape = p.alpha + p.M;
    std::vector<MixtureComponent> comps;
    MixtureProvenance prov{t0, T, -1, n_real};
    double a2_total = 0.0;
    std::vector<double> a2(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        const State i = restart_path.states[static_cast<std::size_t>(t0 + j - restart_path.t_start)];
        const double a = a_coefficient(i, p.D);
        a2[j] = a * a;
        a2_total += a2[j];
    }
    if (n == 1) {
        double s2 = p.beta * p.beta;
        for (double v : y) s2 += v * v;
        prov.n_realizations = 0;
        return MixtureDensity({{shape, std::sqrt(s2), 1.0}}, prov);
    }
    const ForwardScales fs(y, n, p, n_real, seed);
    comps.reserve(static_cast<std::size_t>(n) * n_real);
    for (int j = 0; j < n; ++j) {
        for (int k = 0; k < n_real; ++k) {
            comps.push_back({shape, fs.scale(j, k), a2[j] / (a2_total * n_real)});
        }
    }
    return MixtureDensity(std::move(comps), prov);
}

void write_mixture_csv(const std::string& path, const MixtureDensity& mixture,
                       std::span<const double> sigma_grid, const std::string& header_comment) {
    auto out = csv::open_out(path);
    csv::write_comment(out, header_comment);
    out << "sigma,density\n";
    for (double s : sigma_grid) out << csv::fmt(s) << ',' << csv::fmt(mixture.density(s)) << '\n';
}

}  // namespace swarch
