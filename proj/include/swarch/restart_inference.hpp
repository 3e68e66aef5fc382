#pragma once

#include "swarch/model.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace swarch {

struct InferenceConfig {
    int tau = 3;               // local-window half-width
    int n_mc = 20;             // number of sampled past restart strings
    State i_max = 0;           // truncation of the free-state sums; 0 = default_i_max()
    int max_future_restarts = 2;

    void validate(const ModelParams& p) const;
    State resolved_i_max(const ModelParams& p) const;
};

/// M + tau + ceil(log(1e-12) / log(1 - nu)): the geometric prior tail beyond it is < 1e-12.
State default_i_max(const ModelParams& p, int tau);

/// f^{X,I} for a complete state string over a window of returns (window length <= M+1):
/// pi(i_1) prod W(i_k, i_{k-1}) / prod a(i_k) * phi(x_1/a(i_1), ...).
double log_joint_xi_density(std::span<const State> states, std::span<const double> x_window,
                            const ModelParams& p);
double joint_xi_density(std::span<const State> states, std::span<const double> x_window,
                        const ModelParams& p);

/// Evaluates window marginals of f^{X,I} with all non-fixed states summed out.
///
/// The free first state of a window is summed over [1, i_max]. Below 1024 the sum is
/// term by term; above, states are grouped in blocks of width ~s/512 carrying their exact
/// prior mass and evaluated at the prior-weighted mean state, which keeps the cost flat
/// in i_max (i_max is ~1e5 for nu ~ 1e-4).
class WindowPosterior {
public:
    WindowPosterior(const ModelParams& p, State i_max, int max_window);

    /// log sum of f^{X,I} over all strings whose states at positions
    /// [fixed_begin, fixed_begin + fixed.size()) equal `fixed`.
    double log_marginal(std::span<const double> x, std::size_t fixed_begin,
                        std::span<const State> fixed) const;

    /// Posterior law of the state at window position `centre` (everything else summed).
    struct CentreLaw {
        // Atoms: either a single state or a block of first states [s_lo, s_hi] shifted by centre.
        struct Atom {
            State s_lo;
            State s_hi;
            double prob;
        };
        std::vector<Atom> atoms;
        State centre = 0;
    };
    CentreLaw centre_law(std::span<const double> x, std::size_t centre) const;

    /// Draws a state from a CentreLaw; returns the state and its probability under the law.
    std::pair<State, double> draw(const CentreLaw& law, Rng& rng) const;

    State i_max() const { return i_max_; }

private:
    struct FreeAtom {
        State first;
        State last;
        double rep;       // prior-weighted mean first state of the block
        double log_mass;  // log of the prior mass of the block
    };

    double log_a(double s) const;
    double inv_a2(double s) const;
    template <typename Sink>
    void enumerate(std::span<const double> x, std::size_t fixed_begin, std::span<const State> fixed,
                   Sink&& sink) const;

    ModelParams p_;
    State i_max_;
    int max_window_;
    double log_nu_;
    double log_stay_;
    std::vector<FreeAtom> atoms_;
    std::vector<double> atom_log_a_;   // [atom * max_window + offset]
    std::vector<double> atom_inv_a2_;
};

/// Samples n_mc past restart strings i_{t0-M}, ..., i_{t0-1} from the local-window
/// approximation of their posterior given returns x_{t0-M-tau}, ..., x_{t0-1}.
///
/// history.returns[k] is x_{k+1}; t0 is 1-based and must satisfy t0 - 1 <= size and
/// t0 - M - tau >= 1. Each RestartPath carries its probability under the approximate law.
std::vector<RestartPath> sample_past_restarts(const ReturnSeries& history, long t0,
                                              const ModelParams& p, const InferenceConfig& cfg,
                                              std::uint64_t seed);

/// Probability of a given past string under the same approximate law (product of factors).
double past_string_probability(const ReturnSeries& history, long t0, std::span<const State> states,
                               const ModelParams& p, const InferenceConfig& cfg);

void write_restart_samples_csv(const std::string& path, const std::vector<RestartPath>& samples,
                               const std::string& header_comment = {});

struct FutureRestartScenario {
    int order = 0;                   // number of restarts in [t0, T]
    std::vector<long> restart_times;
    std::vector<State> states;       // i_{t0}, ..., i_T
    double weight = 0.0;             // nu^order (1-nu)^{n-order}
};

struct FutureScenarioSet {
    std::vector<FutureRestartScenario> scenarios;
    double normalization = 0.0;      // A: sum of the weights
};

/// All future state strings over [t0, T] with at most `max_restarts` restarts,
/// continuing from i_prev = i_{t0-1}.
FutureScenarioSet enumerate_future_scenarios(State i_prev, long t0, long T, double nu,
                                             int max_restarts = 2);

}  // namespace swarch
