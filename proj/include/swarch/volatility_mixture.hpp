#pragma once

#include "swarch/model.hpp"

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace swarch {

/// rho_{shape,scale}(sigma) = 2^{1-shape/2} / Gamma(shape/2) * scale^shape / sigma^{shape+1}
///                            * exp(-scale^2 / (2 sigma^2)),
/// i.e. sigma = scale / sqrt(chi^2_shape).
double inverse_gamma_sigma_density(double sigma, double shape, double scale);
double inverse_gamma_sigma_cdf(double sigma, double shape, double scale);
double inverse_gamma_sigma_quantile(double prob, double shape, double scale);

/// Quadrature for E[f(sigma)] with sigma ~ rho_{shape,1}: sum_q weight_q f(multiplier_q).
/// Trapezoid rule in log sigma between the 1e-15 and 1 - 1e-24 quantiles, weights
/// renormalised to one. An infinite shape gives the single node (1, 1).
struct SigmaQuadrature {
    std::vector<double> multiplier;
    std::vector<double> weight;
};
SigmaQuadrature inverse_gamma_sigma_quadrature(double shape, int nodes);

struct MixtureComponent {
    double shape;   // infinity = point mass at `scale`
    double scale;
    double weight;
};

struct MixtureProvenance {
    long t0 = 0;
    long T = 0;
    long path_id = -1;
    int n_realizations = 0;
};

/// The volatility density on a discrete grid, for reports and plots.
struct TabulatedMixture {
    std::vector<double> sigma_grid;
    std::vector<double> weights;  // sum to 1
    std::vector<double> density;
};

/// Finite mixture of inverse-Gamma volatility laws (and point masses).
class MixtureDensity {
public:
    MixtureDensity() = default;
    /// Weights must be nonnegative with positive sum; they are normalised to 1.
    explicit MixtureDensity(std::vector<MixtureComponent> components, MixtureProvenance provenance = {});
    static MixtureDensity point_mass(double sigma);

    const std::vector<MixtureComponent>& components() const { return components_; }
    const MixtureProvenance& provenance() const { return provenance_; }

    /// Density of the continuous part.
    double density(double sigma) const;
    double cdf(double sigma) const;
    double quantile(double prob) const;
    /// <sigma^2>; infinite if any component has shape <= 2.
    double second_moment() const;
    double mean() const;

    TabulatedMixture tabulate(std::span<const double> sigma_grid) const;

private:
    std::vector<MixtureComponent> components_;
    MixtureProvenance provenance_;
};

/// 400 log-spaced points between the 1e-4 and 1-1e-4 quantiles of rho_{alpha,beta}.
std::vector<double> prior_sigma_grid(double alpha, double beta, int points = 400);

/// One-step Bayes update of rho_{alpha,beta} given M observed y lags: shape alpha+M,
/// scale sqrt(beta^2 + sum y^2).
double rho_hat_closed_form(double sigma, std::span<const double> y_lags, double alpha, double beta,
                           int M);

/// Scales sqrt(beta^2 + sum of the last M y^2) seen at steps t0, ..., t0+n-1 along
/// n_real forward simulations of Y from M historical values (oldest first).
/// Realisation k uses the seed derive_seed(seed, {k}).
class ForwardScales {
public:
    ForwardScales(std::span<const double> y_history, int n_steps, const ModelParams& p, int n_real,
                  std::uint64_t seed);

    int n_steps() const { return n_steps_; }
    int n_real() const { return n_real_; }
    double shape() const { return shape_; }
    /// Scale at step offset j (t = t0 + j) in realisation k.
    double scale(int j, int k) const { return scales_[static_cast<std::size_t>(k) * n_steps_ + j]; }

private:
    int n_steps_;
    int n_real_;
    double shape_;
    std::vector<double> scales_;
};

/// rho_hat at t = t0 + steps_ahead, averaged over n_real forward simulations.
/// steps_ahead = 0 returns the closed form (a single component).
MixtureDensity propagate_rho_hat(std::span<const double> y_history, int steps_ahead,
                                 const ModelParams& p, int n_real, std::uint64_t seed);

/// De-modulated history y_t = x_t / a(i_t) over [t0-M, t0-1].
std::vector<double> demodulated_history(const ReturnSeries& history, const RestartPath& path, long t0,
                                        const ModelParams& p);

/// rho_bar = sum_t a^2(i_t) rho_hat_t / sum_t a^2(i_t) over t in [t0, T].
/// The restart path must cover [t0-M, T] and history must cover [t0-M, t0-1].
MixtureDensity build_rho_bar(const ReturnSeries& history, const RestartPath& restart_path, long t0,
                             long T, const ModelParams& p, int n_real, std::uint64_t seed);

void write_mixture_csv(const std::string& path, const MixtureDensity& mixture,
                       std::span<const double> sigma_grid, const std::string& header_comment = {});

}  // namespace swarch
