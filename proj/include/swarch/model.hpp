#pragma once

#include "swarch/dates.hpp"
#include "swarch/rng.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace swarch {

/// Parameters of the switching ARCH return model.
///
/// Returns are X_t = a(I_t) * Y_t where Y is an order-M ARCH process with
/// inverse-Gamma(alpha, beta) volatility mixing, and I_t is a restart chain on
/// the positive integers: with probability nu it jumps back to 1, otherwise it
/// increments. a(i) = sqrt(i^{2D} - (i-1)^{2D}).
struct ModelParams {
    double D = 0.5;      // scaling exponent, > 0
    double nu = 1e-3;    // restart probability per step, (0, 1]
    double alpha = 4.0;  // inverse-Gamma shape, > 0
    double beta = 0.01;  // inverse-Gamma scale (per-step return units), > 0
    int M = 21;          // ARCH memory range, >= 1
    double mu = 0.0;     // mean return rate per step
    double r = 0.0;      // risk-free rate per step, >= 0

    /// Throws DomainError when an invariant is violated.
    void validate() const;
};

using State = std::int64_t;

/// A string of restart-chain states i_{t_start}, ..., i_{t_end} with its probability weight.
struct RestartPath {
    long t_start = 1;
    long t_end = 0;
    std::vector<State> states;
    double weight = 1.0;

    /// States >= 1, consecutive states either restart to 1 or increment, weight in [0, 1].
    bool satisfies_support() const;
};

struct ReturnSeries {
    std::vector<Date> dates;      // empty for undated (simulated) series
    std::vector<double> returns;  // log-returns

    std::size_t size() const { return returns.size(); }
    bool dated() const { return !dates.empty(); }
    /// Strictly increasing dates (when dated), finite values. Throws DataError.
    void validate() const;
    /// Sub-series of returns with dates in (after, upto].
    ReturnSeries window_ending(const Date& upto, std::size_t length) const;
};

ReturnSeries read_return_series(const std::string& path);
void write_return_series(const std::string& path, const ReturnSeries& series,
                         const std::string& header_comment = {});
void write_return_series(std::ostream& out, const ReturnSeries& series,
                         const std::string& header_comment = {});

double a_coefficient(State i, double D);
/// sum_{k=from+1}^{to} a(k)^2 = to^{2D} - from^{2D}.
double a_squared_run(State from, State to, double D);

double restart_initial_law(State i, double nu);
double restart_transition(State i, State j, double nu);

/// Standardised residual with density proportional to (1+z^2)^{-(shape+1)/2},
/// drawn as N(0,1) / sqrt(chi^2_shape).
double draw_residual(Rng& rng, double shape);

/// Y recursion driven by a given residual sequence (Y_1 = beta Z_1, ...).
std::vector<double> y_from_residuals(const ModelParams& p, std::span<const double> z);
std::vector<double> simulate_y(const ModelParams& p, int horizon, std::uint64_t seed);
RestartPath simulate_i(const ModelParams& p, int horizon, std::uint64_t seed);
/// Same as simulate_i but with a given first state.
RestartPath simulate_i_from(const ModelParams& p, State first, int horizon, Rng& rng);

struct SimulatedPath {
    std::vector<State> states;
    std::vector<double> a;
    std::vector<double> y;
    std::vector<double> x;
};

/// X_t = a(I_t) Y_t with independent Y and I streams derived from seed.
SimulatedPath simulate_x(const ModelParams& p, int horizon, std::uint64_t seed);
std::vector<double> compose_returns(std::span<const double> y, std::span<const State> states, double D);

void write_simulation_csv(const std::string& path, const SimulatedPath& sim,
                          const std::string& header_comment = {});
void write_simulation_csv(std::ostream& out, const SimulatedPath& sim,
                          const std::string& header_comment = {});

/// Joint density of t returns of Y (t <= M+1) under inverse-Gamma mixing.
double log_phi_density(std::span<const double> y, double alpha, double beta);
double phi_density(std::span<const double> y, double alpha, double beta);

/// Density of y_t given its preceding lags. The lag count m sets the shape alpha+m.
double log_conditional_y_density_lags(double y, std::span<const double> lags, double alpha,
                                      double beta);
/// Density of y_t given exactly M preceding values (throws DomainError otherwise).
double conditional_y_density(double y, std::span<const double> lags, double alpha, double beta,
                             int M);

}  // namespace swarch
