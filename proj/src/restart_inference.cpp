#include "swarch/restart_inference.hpp"

#include "csv.hpp"
#include "swarch/errors.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

namespace swarch {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr State kExactBelow = 1024;
constexpr State kBlockDivisor = 512;
constexpr int kMaxEnumeratedWindow = 16;

// log(exp(acc) + exp(v))
inline void log_add(double& acc, double v) {
    if (v == kNegInf) return;
    if (acc == kNegInf) {
        acc = v;
    } else if (v > acc) {
        acc = v + std::log1p(std::exp(acc - v));
    } else {
        acc += std::log1p(std::exp(v - acc));
    }
}

double log_prior(State s, double nu) {
    if (nu == 1.0) return s == 1 ? 0.0 : kNegInf;
    return std::log(nu) + static_cast<double>(s - 1) * std::log1p(-nu);
}

double log_a_real(double s, double D) {
    if (s <= 1.0) return 0.0;
    return 0.5 * std::log(-std::pow(s, 2.0 * D) * std::expm1(2.0 * D * std::log1p(-1.0 / s)));
}

}  // namespace

void InferenceConfig::validate(const ModelParams& p) const {
    if (tau < 1) throw DomainError("InferenceConfig: tau must be >= 1");
    if (n_mc < 1) throw DomainError("InferenceConfig: n_mc must be >= 1");
    if (2 * tau + 1 > p.M + 1) {
        throw DomainError("InferenceConfig: local window 2*tau+1 exceeds M+1");
    }
    if (2 * tau + 1 > kMaxEnumeratedWindow) {
        throw DomainError("InferenceConfig: tau too large for window enumeration");
    }
    if (i_max != 0 && i_max < p.M + tau) throw DomainError("InferenceConfig: i_max must be >= M+tau");
    if (max_future_restarts < 0) throw DomainError("InferenceConfig: max_future_restarts must be >= 0");
}

State default_i_max(const ModelParams& p, int tau) {
    const State base = p.M + tau;
    if (p.nu >= 1.0) return base;
    const double tail = std::ceil(std::log(1e-12) / std::log1p(-p.nu));
    // 2e7 bounds memory for nu below ~1.4e-6.
    return base + static_cast<State>(std::min(tail, 2e7));
}

State InferenceConfig::resolved_i_max(const ModelParams& p) const {
    return i_max > 0 ? i_max : default_i_max(p, tau);
}

double log_joint_xi_density(std::span<const State> states, std::span<const double> x_window,
                            const ModelParams& p) {
    if (states.size() != x_window.size() || states.empty()) {
        throw DomainError("joint_xi_density: states and returns must have equal, nonzero length");
    }
    if (x_window.size() > static_cast<std::size_t>(p.M) + 1) {
        throw DomainError("joint_xi_density: window longer than M+1");
    }
    double lw = log_prior(states[0], p.nu);
    std::vector<double> y(x_window.size());
    for (std::size_t k = 0; k < states.size(); ++k) {
        if (k > 0) {
            const double w = restart_transition(states[k], states[k - 1], p.nu);
            if (w == 0.0) return kNegInf;
            lw += std::log(w);
        }
        const double a = a_coefficient(states[k], p.D);
        lw -= std::log(a);
        y[k] = x_window[k] / a;
    }
    return lw + log_phi_density(y, p.alpha, p.beta);
}

double joint_xi_density(std::span<const State> states, std::span<const double> x_window,
                        const ModelParams& p) {
    return std::exp(log_joint_xi_density(states, x_window, p));
}

WindowPosterior::WindowPosterior(const ModelParams& p, State i_max, int max_window)
    : p_(p), i_max_(i_max), max_window_(max_window) {
    p_.validate();
    if (i_max < 1) throw DomainError("WindowPosterior: i_max must be >= 1");
    if (max_window < 1 || max_window > kMaxEnumeratedWindow) {
        throw DomainError("WindowPosterior: unsupported window length");
    }
    log_nu_ = std::log(p.nu);
    log_stay_ = p.nu < 1.0 ? std::log1p(-p.nu) : kNegInf;

    for (State s = 1; s <= i_max_;) {
        const State len = s < kExactBelow ? 1 : std::max<State>(1, s / kBlockDivisor);
        const State last = std::min(i_max_, s + len - 1);
        FreeAtom atom{s, last, static_cast<double>(s), kNegInf};
        if (p.nu == 1.0) {
            atom.log_mass = s == 1 ? 0.0 : kNegInf;
        } else {
            const double count = static_cast<double>(last - s + 1);
            atom.log_mass = static_cast<double>(s - 1) * log_stay_ +
                            std::log(-std::expm1(count * log_stay_));
            if (last > s) {
                double num = 0.0;
                double den = 0.0;
                double w = 1.0;
                const double q = 1.0 - p.nu;
                for (State k = s; k <= last; ++k) {
                    num += w * static_cast<double>(k - s);
                    den += w;
                    w *= q;
                }
                atom.rep = static_cast<double>(s) + num / den;
            }
        }
        if (atom.log_mass != kNegInf) atoms_.push_back(atom);
        s = last + 1;
    }
    const auto W = static_cast<std::size_t>(max_window_);
    atom_log_a_.resize(atoms_.size() * W);
    atom_inv_a2_.resize(atoms_.size() * W);
    for (std::size_t j = 0; j < atoms_.size(); ++j) {
        for (std::size_t o = 0; o < W; ++o) {
            const double la = log_a_real(atoms_[j].rep + static_cast<double>(o), p_.D);
            atom_log_a_[j * W + o] = la;
            atom_inv_a2_[j * W + o] = std::exp(-2.0 * la);
        }
    }
}

double WindowPosterior::log_a(double s) const { return log_a_real(s, p_.D); }
double WindowPosterior::inv_a2(double s) const { return std::exp(-2.0 * log_a_real(s, p_.D)); }

// Visits every window string consistent with the fixed states. The sink receives the
// log weight, the free-atom index (or -1 when the first state is pinned by a fixed
// state), and the restart mask (bit p-1 set <=> restart at position p).
template <typename Sink>
void WindowPosterior::enumerate(std::span<const double> x, std::size_t fixed_begin,
                                std::span<const State> fixed, Sink&& sink) const {
    const std::size_t L = x.size();
    if (L == 0 || L > static_cast<std::size_t>(max_window_)) {
        throw DomainError("WindowPosterior: window length out of range");
    }
    if (fixed_begin + fixed.size() > L) throw DomainError("WindowPosterior: fixed states overflow window");
    const double kappa = 0.5 * (p_.alpha + static_cast<double>(L));
    const double log_const = p_.alpha * std::log(p_.beta) + std::lgamma(kappa) -
                             0.5 * static_cast<double>(L) * std::log(std::numbers::pi) -
                             std::lgamma(0.5 * p_.alpha);
    const double beta2 = p_.beta * p_.beta;
    const auto W = static_cast<std::size_t>(max_window_);
    std::array<double, kMaxEnumeratedWindow> x2{};
    for (std::size_t k = 0; k < L; ++k) x2[k] = x[k] * x[k];

    std::array<State, kMaxEnumeratedWindow> st{};
    const std::uint32_t n_masks = 1u << (L - 1);
    for (std::uint32_t mask = 0; mask < n_masks; ++mask) {
        const int n_restart = std::popcount(mask);
        const int n_stay = static_cast<int>(L) - 1 - n_restart;
        double lt = 0.0;
        if (n_restart > 0) lt += n_restart * log_nu_;
        if (n_stay > 0) lt += n_stay * log_stay_;
        if (lt == kNegInf) continue;

        const std::size_t r1 = mask == 0 ? L : static_cast<std::size_t>(std::countr_zero(mask)) + 1;
        State cur = 0;
        for (std::size_t q = r1; q < L; ++q) {
            cur = (mask >> (q - 1)) & 1u ? 1 : cur + 1;
            st[q] = cur;
        }
        bool ok = true;
        for (std::size_t k = 0; k < fixed.size() && ok; ++k) {
            const std::size_t pos = fixed_begin + k;
            if (pos >= r1 && st[pos] != fixed[k]) ok = false;
        }
        if (!ok) continue;

        double tail_log_a = 0.0;
        double tail_sq = 0.0;
        for (std::size_t q = r1; q < L; ++q) {
            const double la = log_a(static_cast<double>(st[q]));
            tail_log_a += la;
            tail_sq += x2[q] * std::exp(-2.0 * la);
        }

        if (!fixed.empty() && fixed_begin < r1) {
            const State s0 = fixed[0] - static_cast<State>(fixed_begin);
            if (s0 < 1) continue;
            for (std::size_t k = 0; k < fixed.size() && ok; ++k) {
                const std::size_t pos = fixed_begin + k;
                if (pos < r1 && fixed[k] != s0 + static_cast<State>(pos)) ok = false;
            }
            if (!ok) continue;
            double head_log_a = 0.0;
            double head_sq = 0.0;
            for (std::size_t q = 0; q < r1; ++q) {
                const double la = log_a(static_cast<double>(s0 + static_cast<State>(q)));
                head_log_a += la;
                head_sq += x2[q] * std::exp(-2.0 * la);
            }
            const double lw = log_prior(s0, p_.nu) + lt - head_log_a - tail_log_a + log_const -
                              kappa * std::log(beta2 + head_sq + tail_sq);
            sink(lw, -1L, mask);
        } else {
            for (std::size_t j = 0; j < atoms_.size(); ++j) {
                double head_log_a = 0.0;
                double head_sq = 0.0;
                const double* la = &atom_log_a_[j * W];
                const double* ia = &atom_inv_a2_[j * W];
                for (std::size_t q = 0; q < r1; ++q) {
                    head_log_a += la[q];
                    head_sq += x2[q] * ia[q];
                }
                const double lw = atoms_[j].log_mass + lt - head_log_a - tail_log_a + log_const -
                                  kappa * std::log(beta2 + head_sq + tail_sq);
                sink(lw, static_cast<long>(j), mask);
            }
        }
    }
}

double WindowPosterior::log_marginal(std::span<const double> x, std::size_t fixed_begin,
                                     std::span<const State> fixed) const {
    double acc = kNegInf;
    enumerate(x, fixed_begin, fixed, [&](double lw, long, std::uint32_t) { log_add(acc, lw); });
    return acc;
}

WindowPosterior::CentreLaw WindowPosterior::centre_law(std::span<const double> x,
                                                       std::size_t centre) const {
    if (centre >= x.size()) throw DomainError("centre_law: centre outside window");
    // bins [0, centre): state = 1 + index after a restart; bins [centre, ...): free atoms
    std::vector<double> small(centre, kNegInf);
    std::vector<double> free(atoms_.size(), kNegInf);
    enumerate(x, 0, {}, [&](double lw, long atom, std::uint32_t mask) {
        // last restart at or before centre
        const std::uint32_t upto = centre == 0 ? 0u : (mask & ((1u << centre) - 1u));
        if (upto == 0) {
            log_add(free[static_cast<std::size_t>(atom)], lw);
        } else {
            const std::size_t last = static_cast<std::size_t>(std::bit_width(upto));  // position
            const std::size_t state = 1 + centre - last;                             // in [1, centre]
            log_add(small[state - 1], lw);
        }
    });
    double total = kNegInf;
    for (double v : small) log_add(total, v);
    for (double v : free) log_add(total, v);
    if (total == kNegInf || !std::isfinite(total)) {
        throw NumericError("centre_law: posterior has no mass");
    }
    CentreLaw law;
    law.centre = static_cast<State>(centre);
    for (std::size_t k = 0; k < small.size(); ++k) {
        if (small[k] == kNegInf) continue;
        const auto s = static_cast<State>(k + 1);
        law.atoms.push_back({s, s, std::exp(small[k] - total)});
    }
    for (std::size_t j = 0; j < free.size(); ++j) {
        if (free[j] == kNegInf) continue;
        law.atoms.push_back({atoms_[j].first + law.centre, atoms_[j].last + law.centre,
                             std::exp(free[j] - total)});
    }
    return law;
}

std::pair<State, double> WindowPosterior::draw(const CentreLaw& law, Rng& rng) const {
    std::vector<double> w;
    w.reserve(law.atoms.size());
    for (const auto& a : law.atoms) w.push_back(a.prob);
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    const auto& atom = law.atoms[pick(rng)];
    if (atom.s_lo == atom.s_hi) return {atom.s_lo, atom.prob};
    // within a block: first state ~ truncated geometric prior
    const double q = 1.0 - p_.nu;
    const double len = static_cast<double>(atom.s_hi - atom.s_lo + 1);
    const double tail = std::pow(q, len);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u = unif(rng);
    auto k = static_cast<State>(std::floor(std::log1p(-u * (1.0 - tail)) / std::log(q)));
    k = std::clamp<State>(k, 0, atom.s_hi - atom.s_lo);
    const double within = std::pow(q, static_cast<double>(k)) * (1.0 - q) / (1.0 - tail);
    return {atom.s_lo + k, atom.prob * within};
}

namespace {

// Shared machinery for sampling and scoring past strings.
class PastLaw {
public:
    PastLaw(const ReturnSeries& h, long t0, const ModelParams& p, const InferenceConfig& cfg)
        : h_(h), t0_(t0), p_(p), tau_(cfg.tau),
          engine_(p, cfg.resolved_i_max(p), 2 * cfg.tau + 1) {
        p.validate();
        cfg.validate(p);
        if (t0 - p.M - cfg.tau < 1 || t0 - 1 > static_cast<long>(h.size())) {
            throw DataError("restart inference: history must cover [t0-M-tau, t0-1]");
        }
        const long ws = t0 - p.M - tau_;
        const long we = std::min(t0 - p.M + tau_, t0 - 1);
        first_ = engine_.centre_law(window(ws, we), static_cast<std::size_t>(tau_));
    }

    long start() const { return t0_ - p_.M; }
    const WindowPosterior& engine() const { return engine_; }
    const WindowPosterior::CentreLaw& first_law() const { return first_; }

    // Probabilities of {restart, increment} for i_t given states i_{t0-M..t-1}.
    std::array<double, 2> conditional(long t, std::span<const State> prefix) {
        const long ws = t - tau_;
        const long we = std::min(t + tau_, t0_ - 1);
        const long fb = std::max(ws, start());
        std::vector<State> fixed(prefix.begin() + (fb - start()), prefix.end());
        auto& memo = cache_[t];
        if (auto it = memo.find(fixed); it != memo.end()) return it->second;
        const auto x = window(ws, we);
        std::array<double, 2> lm{};
        const State prev = fixed.back();
        for (int c = 0; c < 2; ++c) {
            fixed.push_back(c == 0 ? 1 : prev + 1);
            lm[c] = engine_.log_marginal(x, static_cast<std::size_t>(fb - ws), fixed);
            fixed.pop_back();
        }
        const double mx = std::max(lm[0], lm[1]);
        if (!std::isfinite(mx)) throw NumericError("restart inference: conditional factor has no mass");
        const double e0 = std::exp(lm[0] - mx);
        const double e1 = std::exp(lm[1] - mx);
        std::array<double, 2> probs{e0 / (e0 + e1), e1 / (e0 + e1)};
        memo.emplace(std::move(fixed), probs);
        return probs;
    }

private:
    std::vector<double> window(long from, long to) const {
        return {h_.returns.begin() + (from - 1), h_.returns.begin() + to};
    }

    const ReturnSeries& h_;
    long t0_;
    ModelParams p_;
    long tau_;
    WindowPosterior engine_;
    WindowPosterior::CentreLaw first_;
    std::map<long, std::map<std::vector<State>, std::array<double, 2>>> cache_;
};

}  // namespace

std::vector<RestartPath> sample_past_restarts(const ReturnSeries& history, long t0,
                                              const ModelParams& p, const InferenceConfig& cfg,
                                              std::uint64_t seed) {
    PastLaw law(history, t0, p, cfg);
    std::vector<RestartPath> out;
    out.reserve(static_cast<std::size_t>(cfg.n_mc));
    for (int n = 0; n < cfg.n_mc; ++n) {
        Rng rng = make_rng(seed, {static_cast<std::uint64_t>(n)});
        RestartPath path;
        path.t_start = law.start();
        path.t_end = t0 - 1;
        auto [first, prob] = law.engine().draw(law.first_law(), rng);
        path.states.push_back(first);
        double weight = prob;
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (long t = law.start() + 1; t <= t0 - 1; ++t) {
            const auto probs = law.conditional(t, path.states);
            const bool restart = unif(rng) < probs[0];
            path.states.push_back(restart ? 1 : path.states.back() + 1);
            weight *= restart ? probs[0] : probs[1];
        }
        path.weight = weight;
        out.push_back(std::move(path));
    }
    return out;
}

double past_string_probability(const ReturnSeries& history, long t0, std::span<const State> states,
                               const ModelParams& p, const InferenceConfig& cfg) {
    PastLaw law(history, t0, p, cfg);
    if (states.size() != static_cast<std::size_t>(p.M)) {
        throw DomainError("past_string_probability: need exactly M states");
    }
    double prob = 0.0;
    for (const auto& atom : law.first_law().atoms) {
        if (states[0] < atom.s_lo || states[0] > atom.s_hi) continue;
        if (atom.s_lo == atom.s_hi) {
            prob = atom.prob;
        } else {
            const double q = 1.0 - p.nu;
            const double len = static_cast<double>(atom.s_hi - atom.s_lo + 1);
            prob = atom.prob * std::pow(q, static_cast<double>(states[0] - atom.s_lo)) * (1.0 - q) /
                   (1.0 - std::pow(q, len));
        }
        break;
    }
    for (std::size_t k = 1; k < states.size() && prob > 0.0; ++k) {
        if (states[k] != 1 && states[k] != states[k - 1] + 1) return 0.0;
        const auto probs = law.conditional(law.start() + static_cast<long>(k),
                                           states.subspan(0, k));
        prob *= states[k] == 1 ? probs[0] : probs[1];
    }
    return prob;
}

void write_restart_samples_csv(const std::string& path, const std::vector<RestartPath>& samples,
                               const std::string& header_comment) {
    auto out = csv::open_out(path);
    csv::write_comment(out, header_comment);
    out << "sample_idx,t,i_state,weight\n";
    for (std::size_t n = 0; n < samples.size(); ++n) {
        const auto& s = samples[n];
        for (std::size_t k = 0; k < s.states.size(); ++k) {
            out << n << ',' << (s.t_start + static_cast<long>(k)) << ',' << s.states[k] << ','
                << csv::fmt(s.weight) << '\n';
        }
    }
}

FutureScenarioSet enumerate_future_scenarios(State i_prev, long t0, long T, double nu,
                                             int max_restarts) {
    if (T < t0) throw DomainError("enumerate_future_scenarios: need T >= t0");
    if (i_prev < 1) throw DomainError("enumerate_future_scenarios: i_prev must be >= 1");
    if (!(nu > 0.0 && nu <= 1.0)) throw DomainError("enumerate_future_scenarios: nu must lie in (0, 1]");
    if (max_restarts < 0) throw DomainError("enumerate_future_scenarios: max_restarts must be >= 0");
    const long n = T - t0 + 1;
    const int order_cap = static_cast<int>(std::min<long>(max_restarts, n));
    FutureScenarioSet set;
    std::vector<long> times;
    auto emit = [&]() {
        FutureRestartScenario sc;
        sc.order = static_cast<int>(times.size());
        sc.restart_times = times;
        sc.states.reserve(static_cast<std::size_t>(n));
        State s = i_prev;
        std::size_t next = 0;
        for (long t = t0; t <= T; ++t) {
            if (next < times.size() && times[next] == t) {
                s = 1;
                ++next;
            } else {
                s += 1;
            }
            sc.states.push_back(s);
        }
        sc.weight = std::pow(nu, sc.order) * std::pow(1.0 - nu, static_cast<double>(n - sc.order));
        set.normalization += sc.weight;
        set.scenarios.push_back(std::move(sc));
    };
    // order 0, then 1, then 2, ...: lexicographic restart times within each order
    for (int order = 0; order <= order_cap; ++order) {
        times.assign(static_cast<std::size_t>(order), 0);
        // recursive combination generator over [t0, T]
        auto rec = [&](auto&& self, int depth, long from) -> void {
            if (depth == order) {
                emit();
                return;
            }
            for (long j = from; j <= T - (order - depth - 1); ++j) {
                times[static_cast<std::size_t>(depth)] = j;
                self(self, depth + 1, j + 1);
            }
        };
        rec(rec, 0, t0);
    }
    return set;
}

}  // namespace swarch
