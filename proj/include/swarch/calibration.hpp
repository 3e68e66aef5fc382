#pragma once

#include "swarch/model.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace swarch {

struct MomentSpec {
    std::vector<double> q_set{1.0, 2.0, 4.0};
    std::vector<int> tau_set{1, 2, 5, 10, 21, 42};
    std::vector<int> acf_lags{1, 5, 10, 21, 63};  // lags entering the calibration objective
    int acf_max_lag = 100;                         // lags tabulated by empirical_moments
};

/// Moments of a (demeaned) return series.
struct MomentTable {
    MomentSpec spec;
    std::size_t n = 0;
    double mean = 0.0;
    double second_moment = 0.0;          // (1/n) sum (x - mean)^2
    std::vector<double> abs_moments;     // E|R_tau|^q, index [qi * n_tau + ti], overlapping windows
    std::vector<double> abs_acf;         // autocorrelation of |x - mean| at lags 1..acf_max_lag

    double abs_moment(std::size_t qi, std::size_t ti) const {
        return abs_moments[qi * spec.tau_set.size() + ti];
    }
    /// H(q): least-squares slope of log E|R_tau|^q against log tau, divided by q.
    double hurst(std::size_t qi) const;
    /// Scale-free features: E|R_tau|^q / (E x^2)^{q/2} for every (q, tau), then |x| acf at spec.acf_lags.
    std::vector<double> features() const;
    std::vector<std::string> feature_names() const;
};

/// Throws DomainError when the series is shorter than 5 * max(tau) or than acf_max_lag + 2.
MomentTable empirical_moments(std::span<const double> returns, const MomentSpec& spec = {});
inline MomentTable empirical_moments(const ReturnSeries& series, const MomentSpec& spec = {}) {
    return empirical_moments(std::span<const double>(series.returns), spec);
}

struct GridAxis {
    double lo;
    double hi;
    double step;
    std::vector<double> points() const;  // lo, lo+step, ..., <= hi (+ rounding slack)
};

struct CalibrationGrid {
    GridAxis D{0.1, 0.35, 5e-3};
    GridAxis nu{1e-4, 1e-3, 1e-4};
    GridAxis alpha{3.0, 10.0, 0.5};

    void validate() const;
};

struct ShapeOptions {
    int M = 21;
    int mc_budget = 200;     // simulated paths per grid cell
    int path_length = 0;     // 0: the length of the data series
    int bootstrap_resamples = 200;
    int bootstrap_block = 21;
    int threads = 1;
    MomentSpec moments;
};

struct MomentDiagnostic {
    std::string name;
    double data;
    double model;
    double weight;
};

struct CalibrationResult {
    ModelParams params;
    double sigma_bs = 0.0;
    double objective = 0.0;
    std::vector<MomentDiagnostic> diagnostics;
    std::string window_start;
    std::string window_end;
    std::size_t window_length = 0;
    /// Range of the objective over nu at the fitted (D, alpha). Below 1 the data carry no
    /// usable information on nu (e.g. D = 1/2, where a(i) = 1 for every state).
    double nu_profile_spread = 0.0;
    bool nu_identified = true;
    /// Objective per grid cell (D, nu, alpha, value), in grid order.
    std::vector<std::array<double, 4>> surface;
};

/// Simulated moment matching of (D, nu, alpha) over the grid. Every cell simulates the same
/// mc_budget paths (common random numbers, beta = 1 since the features are scale-free).
CalibrationResult calibrate_shape(const ReturnSeries& series, const CalibrationGrid& grid,
                                  const ShapeOptions& opts, std::uint64_t seed);

struct ScaleOptions {
    int n_paths = 400;
    int burn_in = 252;
    int path_length = 0;     // 0: the length of the data series
};

struct ScaleEstimate {
    double beta;
    double sigma_bs;
    double mu;
};

/// sigma_bs = sample standard deviation, mu = sample mean; beta matches the simulated
/// unconditional E[X^2] of the model to the sample second moment.
ScaleEstimate calibrate_scale(const ReturnSeries& series, const ModelParams& shape_params,
                              const ScaleOptions& opts, std::uint64_t seed);

/// E[X^2] of the model at beta = 1 estimated from simulated paths after burn-in.
double simulated_unit_second_moment(const ModelParams& shape_params, int n_paths, int burn_in,
                                    int length, std::uint64_t seed);

void write_calibration(const std::string& path, const CalibrationResult& result,
                       const std::string& header_comment = {});
CalibrationResult read_calibration(const std::string& path);

}  // namespace swarch
