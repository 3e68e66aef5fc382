#include "swarch/pricing.hpp"

#include "swarch/errors.hpp"
#include "swarch/parallel.hpp"
#include "swarch/volatility_mixture.hpp"

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>

namespace swarch {

namespace {

constexpr std::size_t kExactEvaluations = 32;
constexpr std::size_t kExactBudget = std::size_t{1} << 18;  // closed forms per strike
constexpr int kChebyshevNodes = 24;
constexpr int kGNodes = 2048;

struct Scenario {
    std::vector<int> restarts;  // offsets j = t - t0
    double weight = 0.0;
    double a2_total = 0.0;
};

// All restart patterns over offsets [0, n) with at most max_order restarts.
std::vector<Scenario> future_patterns(int n, int max_order, double nu) {
    std::vector<Scenario> out;
    std::vector<int> r;
    const int cap = std::min(max_order, n);
    for (int order = 0; order <= cap; ++order) {
        r.assign(static_cast<std::size_t>(order), 0);
        auto rec = [&](auto&& self, int depth, int from) -> void {
            if (depth == order) {
                Scenario s;
                s.restarts = r;
                s.weight = std::pow(nu, order) * std::pow(1.0 - nu, n - order);
                out.push_back(std::move(s));
                return;
            }
            for (int j = from; j <= n - (order - depth); ++j) {
                r[static_cast<std::size_t>(depth)] = j;
                self(self, depth + 1, j + 1);
            }
        };
        rec(rec, 0, 0);
    }
    return out;
}

// a^2 at every future offset for a pattern continuing from i_prev.
void fill_a2(const Scenario& s, std::span<const double> run, std::span<const double> fresh,
             std::vector<double>& a2) {
    const int n = static_cast<int>(run.size());
    a2.resize(static_cast<std::size_t>(n));
    std::size_t next = 0;
    int last = -1;
    for (int j = 0; j < n; ++j) {
        if (next < s.restarts.size() && s.restarts[next] == j) {
            last = j;
            ++next;
        }
        a2[j] = last < 0 ? run[j] : fresh[j - last];
    }
}

struct PriceDelta {
    double price;
    double delta;
};

// Price and Delta at effective volatility st (st > 0) with precomputed constants.
struct ClosedForm {
    double S;
    double disc_K;  // K (1+r)^{-n}
    double drift;   // ln(S/K) + n ln(1+r)
    double growth;  // 1 + r

    PriceDelta operator()(double st) const {
        if (st <= 0.0) {
            const bool itm = S > disc_K;
            return {growth * std::max(S - disc_K, 0.0), itm ? growth : 0.0};
        }
        const double dp = (drift + 0.5 * st * st) / st;
        const double dm = dp - st;
        const double np = normal_cdf(dp);
        return {growth * (S * np - disc_K * normal_cdf(dm)), growth * np};
    }
};

// Neumaier-compensated running sum.
struct CompensatedSum {
    double sum = 0.0;
    double carry = 0.0;
    void add(double v) {
        const double t = sum + v;
        carry += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
        sum = t;
    }
    double value() const { return sum + carry; }
};

// Cubic B-spline through positive samples in log space, falling back to plain values.
// The spline is stored as one Hermite cubic per interval for fast evaluation.
class PositiveSpline {
public:
    PositiveSpline(std::vector<double> v, double x0, double h) : x0_(x0), h_(h) {
        log_scale_ = std::all_of(v.begin(), v.end(), [](double e) { return e > 1e-300; });
        if (log_scale_) {
            for (double& e : v) e = std::log(e);
        }
        const boost::math::interpolators::cardinal_cubic_b_spline<double> spline(v.begin(), v.end(), x0, h);
        const std::size_t n = v.size() - 1;
        coef_.resize(4 * n);
        double y0 = spline(x0);
        double d0 = spline.prime(x0) * h;
        for (std::size_t i = 0; i < n; ++i) {
            const double x1 = x0 + static_cast<double>(i + 1) * h;
            const double y1 = spline(x1);
            const double d1 = spline.prime(x1) * h;
            coef_[4 * i] = y0;
            coef_[4 * i + 1] = d0;
            coef_[4 * i + 2] = 3.0 * (y1 - y0) - 2.0 * d0 - d1;
            coef_[4 * i + 3] = 2.0 * (y0 - y1) + d0 + d1;
            y0 = y1;
            d0 = d1;
        }
    }

    double operator()(double x) const {
        const double u = std::clamp((x - x0_) / h_, 0.0, static_cast<double>(coef_.size() / 4));
        const std::size_t i = std::min(static_cast<std::size_t>(u), coef_.size() / 4 - 1);
        const double t = u - static_cast<double>(i);
        const double* c = &coef_[4 * i];
        const double y = c[0] + t * (c[1] + t * (c[2] + t * c[3]));
        return log_scale_ ? std::exp(y) : y;
    }

private:
    double x0_;
    double h_;
    std::vector<double> coef_;
    bool log_scale_ = false;
};

struct StringSetup {
    std::vector<std::vector<double>> scales;  // rho_hat scale per (offset, realisation)
    std::vector<double> m1;                   // E[sigma] per offset
    std::vector<double> m2;                   // E[sigma^2] per offset
    std::vector<double> run;                  // a^2 without a restart
    std::vector<double> fresh;                // a^2 after a restart
    std::vector<Scenario> scen;
    std::vector<double> cs;                   // distinct sqrt(sum a^2), sorted
    bool exact = false;                       // G evaluated directly at every distinct c
};

struct StringResult {
    std::vector<double> price;  // per strike, weighted by scenario weight / A
    std::vector<double> delta;
    double sigma_mean = 0.0;
    double sigma_sq = 0.0;
    std::vector<std::pair<double, double>> rms_samples;  // (rms sigma_tilde, weight / A)
};

}  // namespace

void PricingConfig::validate(const ModelParams& p) const {
    p.validate();
    if (n_real < 1) throw DomainError("pricing: n_real must be >= 1");
    if (quad_nodes < 2) throw DomainError("pricing: quad_nodes must be >= 2");
    if (threads < 1) throw DomainError("pricing: threads must be >= 1");
    if (point_mass_sigma && !(*point_mass_sigma > 0.0)) {
        throw DomainError("pricing: point-mass sigma must be > 0");
    }
    if (inference.max_future_restarts < 0) throw DomainError("pricing: max_future_restarts must be >= 0");
}

std::vector<PriceResult> price_given_past(const ContractSpec& contract, std::span<const double> strikes,
                                          const ReturnSeries& history,
                                          const std::vector<RestartPath>& past, const ModelParams& p,
                                          const PricingConfig& cfg, std::uint64_t seed) {
    cfg.validate(p);
    contract.validate();
    if (strikes.empty()) throw DomainError("pricing: no strikes");
    for (double k : strikes) {
        if (!(k > 0.0)) throw DomainError("pricing: strikes must be > 0");
    }
    if (past.empty()) throw NumericError("pricing: no past restart samples");

    const long t0 = contract.t0;
    const int n = static_cast<int>(contract.steps());

    // merge identical past strings, keeping first-appearance order
    std::vector<std::vector<State>> unique;
    std::vector<int> multiplicity;
    std::map<std::vector<State>, std::size_t> index;
    for (const auto& path : past) {
        if (path.t_start > t0 - p.M || path.t_end < t0 - 1) {
            throw DomainError("pricing: past restart string must cover [t0-M, t0-1]");
        }
        std::vector<State> s(path.states.begin() + (t0 - p.M - path.t_start),
                             path.states.begin() + (t0 - path.t_start));
        auto [it, inserted] = index.emplace(s, unique.size());
        if (inserted) {
            unique.push_back(std::move(s));
            multiplicity.push_back(1);
        } else {
            ++multiplicity[it->second];
        }
    }

    auto patterns = future_patterns(n, cfg.inference.max_future_restarts, p.nu);
    double A = 0.0;
    for (const auto& s : patterns) A += s.weight;
    if (!(A > 0.0)) {
        throw NumericError("pricing: all retained future scenarios have zero probability (normalisation A = 0)");
    }

    const double shape = p.alpha + p.M;
    const auto rule = cfg.point_mass_sigma ? SigmaQuadrature{{1.0}, {1.0}}
                                           : inverse_gamma_sigma_quadrature(shape, cfg.quad_nodes);
    std::vector<ClosedForm> forms;
    for (double K : strikes) {
        ContractSpec c = contract;
        c.K = K;
        const double growth = 1.0 + p.r;
        const double disc_K = K * std::exp(-n * std::log1p(p.r));
        forms.push_back({c.S_prev, disc_K, std::log(c.S_prev / K) + n * std::log1p(p.r), growth});
    }
    const std::size_t n_strikes = forms.size();

    // g(v) = E[C(v * sigma)] under the unit-scale law
    auto g_exact = [&](double v, std::size_t strike) {
        PriceDelta acc{0.0, 0.0};
        for (std::size_t q = 0; q < rule.weight.size(); ++q) {
            const auto pd = forms[strike](v * rule.multiplier[q]);
            acc.price += rule.weight[q] * pd.price;
            acc.delta += rule.weight[q] * pd.delta;
        }
        return acc;
    };
    std::vector<StringSetup> setups(unique.size());
    parallel_for(unique.size(), cfg.threads, [&](std::size_t u) {
        const auto& states = unique[u];
        RestartPath path{t0 - p.M, t0 - 1, states, 1.0};
        const auto y = demodulated_history(history, path, t0, p);
        const State i_prev = states.back();

        std::vector<double> run(static_cast<std::size_t>(n));
        std::vector<double> fresh(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j) {
            const double a = a_coefficient(i_prev + 1 + j, p.D);
            const double f = a_coefficient(j + 1, p.D);
            run[j] = a * a;
            fresh[j] = f * f;
        }

        // scales of rho_hat_t per realisation (the sigma law is scale * rule), and moments
        std::vector<std::vector<double>> scales(static_cast<std::size_t>(n));
        std::vector<double> m1(static_cast<std::size_t>(n));
        std::vector<double> m2(static_cast<std::size_t>(n));
        if (cfg.point_mass_sigma) {
            const double s = *cfg.point_mass_sigma;
            for (int j = 0; j < n; ++j) {
                scales[j] = {s};
                m1[j] = s;
                m2[j] = s * s;
            }
        } else {
            const int n_real = n == 1 ? 1 : cfg.n_real;
            const ForwardScales fs(y, n, p, n_real, derive_seed(seed, {u}));
            const double c1 = std::exp(std::lgamma(0.5 * (shape - 1.0)) - std::lgamma(0.5 * shape)) /
                              std::numbers::sqrt2;
            const double c2 = shape > 2.0 ? 1.0 / (shape - 2.0) : std::numeric_limits<double>::infinity();
            for (int j = 0; j < n; ++j) {
                // the first step's scale is the same in every realisation
                const int kk = j == 0 ? 1 : n_real;
                for (int k = 0; k < kk; ++k) {
                    const double s = fs.scale(j, k);
                    scales[j].push_back(s);
                    m1[j] += s * c1 / kk;
                    m2[j] += s * s * c2 / kk;
                }
            }
        }

        std::vector<Scenario> scen = patterns;
        std::vector<double> a2;
        std::vector<double> cs;
        for (auto& s : scen) {
            fill_a2(s, run, fresh, a2);
            double total = 0.0;
            for (double v : a2) total += v;
            s.a2_total = total;
            if (s.weight > 0.0) cs.push_back(std::sqrt(total));
        }
        std::sort(cs.begin(), cs.end());
        cs.erase(std::unique(cs.begin(), cs.end()), cs.end());

        std::size_t n_scales = 0;
        for (const auto& sc : scales) n_scales += sc.size();
        const bool exact = cs.size() <= kExactEvaluations && cs.size() * n_scales * rule.weight.size() <= kExactBudget;
        setups[u] = {std::move(scales), std::move(m1), std::move(m2), std::move(run), std::move(fresh),
                     std::move(scen), std::move(cs), exact};
    });

    // g over log v, shared by every string whose distinct c are too many to evaluate exactly
    double v_lo = std::numeric_limits<double>::infinity();
    double v_hi = -std::numeric_limits<double>::infinity();
    for (const auto& st : setups) {
        if (st.exact) continue;
        for (const auto& sc : st.scales) {
            for (double v : sc) {
                v_lo = std::min(v_lo, std::log(v * st.cs.front()));
                v_hi = std::max(v_hi, std::log(v * st.cs.back()));
            }
        }
    }
    std::vector<std::optional<PositiveSpline>> g_price(n_strikes);
    std::vector<std::optional<PositiveSpline>> g_delta(n_strikes);
    if (v_lo <= v_hi) {
        v_lo -= 1e-3;
        const double v_h = (v_hi + 1e-3 - v_lo) / (kGNodes - 1);
        parallel_for(n_strikes, cfg.threads, [&](std::size_t k) {
            std::vector<double> pv(kGNodes);
            std::vector<double> dv(kGNodes);
            for (int g = 0; g < kGNodes; ++g) {
                const auto v = g_exact(std::exp(v_lo + g * v_h), k);
                pv[g] = v.price;
                dv[g] = v.delta;
            }
            g_price[k].emplace(pv, v_lo, v_h);
            g_delta[k].emplace(dv, v_lo, v_h);
        });
    }

    std::vector<StringResult> results(unique.size());
    parallel_for(unique.size(), cfg.threads, [&](std::size_t u) {
        const auto& scales = setups[u].scales;
        const auto& m1 = setups[u].m1;
        const auto& m2 = setups[u].m2;
        const auto& run = setups[u].run;
        const auto& fresh = setups[u].fresh;
        const auto& scen = setups[u].scen;
        const auto& cs = setups[u].cs;
        std::vector<double> a2;

        // G_t(c) = mean over realisations of g(scale * c). It is evaluated at interpolation nodes
        // in c: the distinct c themselves when few, otherwise Chebyshev nodes in log c.
        const bool exact = setups[u].exact;
        std::vector<std::vector<double>> log_scales(scales.size());
        for (std::size_t j = 0; j < scales.size(); ++j) {
            for (double s : scales[j]) log_scales[j].push_back(std::log(s));
        }
        auto G = [&](int j, double c, std::size_t strike) {
            PriceDelta acc{0.0, 0.0};
            if (exact) {
                for (double s : scales[j]) {
                    const auto v = g_exact(s * c, strike);
                    acc.price += v.price;
                    acc.delta += v.delta;
                }
            } else {
                const double lc = std::log(c);
                const auto& gp_k = *g_price[strike];
                const auto& gd_k = *g_delta[strike];
                for (double ls : log_scales[j]) {
                    acc.price += gp_k(ls + lc);
                    acc.delta += gd_k(ls + lc);
                }
            }
            const double kk = static_cast<double>(scales[j].size());
            return PriceDelta{acc.price / kk, acc.delta / kk};
        };

        std::vector<double> nodes;
        std::vector<double> cheb_x;
        const double mid = 0.5 * (std::log(cs.front()) + std::log(cs.back()));
        const double half = 0.5 * (std::log(cs.back()) - std::log(cs.front()));
        if (exact) {
            nodes = cs;
        } else {
            for (int b = 0; b < kChebyshevNodes; ++b) {
                cheb_x.push_back(std::cos(std::numbers::pi * (2 * b + 1) / (2.0 * kChebyshevNodes)));
                nodes.push_back(std::exp(mid + half * cheb_x.back()));
            }
        }
        const std::size_t n_nodes = nodes.size();

        // interpolation coefficients of every live scenario over the nodes
        std::vector<std::size_t> live;
        std::vector<double> coef;
        for (std::size_t si = 0; si < scen.size(); ++si) {
            if (scen[si].weight <= 0.0) continue;
            live.push_back(si);
            const double c = std::sqrt(scen[si].a2_total);
            const std::size_t at = coef.size();
            coef.resize(at + n_nodes, 0.0);
            if (exact) {
                const auto ci = std::lower_bound(cs.begin(), cs.end(), c) - cs.begin();
                coef[at + static_cast<std::size_t>(ci)] = 1.0;
                continue;
            }
            const double x = std::clamp((std::log(c) - mid) / half, -1.0, 1.0);
            double total = 0.0;
            bool hit = false;
            for (std::size_t b = 0; b < n_nodes && !hit; ++b) {
                if (x == cheb_x[b]) {
                    std::fill(coef.begin() + static_cast<long>(at), coef.end(), 0.0);
                    coef[at + b] = 1.0;
                    hit = true;
                    total = 1.0;
                    break;
                }
                const double sign = b % 2 == 0 ? 1.0 : -1.0;
                const double wb = sign * std::sin(std::numbers::pi * (2.0 * b + 1.0) / (2.0 * n_nodes)) / (x - cheb_x[b]);
                coef[at + b] = wb;
                total += wb;
            }
            for (std::size_t b = 0; b < n_nodes; ++b) coef[at + b] /= total;
        }

        auto& res = results[u];
        for (std::size_t li = 0; li < live.size(); ++li) {
            const auto& s = scen[live[li]];
            fill_a2(s, run, fresh, a2);
            const double w = s.weight / A;
            double m1_bar = 0.0;
            double m2_bar = 0.0;
            for (int j = 0; j < n; ++j) {
                const double wt = a2[j] / s.a2_total;
                m1_bar += wt * m1[j];
                m2_bar += wt * m2[j];
            }
            res.sigma_mean += w * m1_bar * std::sqrt(s.a2_total);
            res.sigma_sq += w * m2_bar * s.a2_total;
            res.rms_samples.emplace_back(std::sqrt(m2_bar * s.a2_total), w);
        }

        // Per node: running sums of a^2 G over the restart-free prefix (R) and over runs
        // started by a restart at offset r (T), so every scenario costs one lookup per segment.
        const auto N = static_cast<std::size_t>(n);
        std::vector<double> gp(n_nodes * N);
        std::vector<double> gd(n_nodes * N);
        std::vector<double> rp(n_nodes * (N + 1));
        std::vector<double> rd(n_nodes * (N + 1));
        std::vector<double> tp(n_nodes * N * (N + 1));
        std::vector<double> td(n_nodes * N * (N + 1));
        for (std::size_t k = 0; k < n_strikes; ++k) {
            for (std::size_t b = 0; b < n_nodes; ++b) {
                for (std::size_t j = 0; j < N; ++j) {
                    const auto v = G(static_cast<int>(j), nodes[b], k);
                    gp[b * N + j] = v.price;
                    gd[b * N + j] = v.delta;
                }
                double* Rp = &rp[b * (N + 1)];
                double* Rd = &rd[b * (N + 1)];
                Rp[0] = Rd[0] = 0.0;
                for (std::size_t e = 1; e <= N; ++e) {
                    Rp[e] = Rp[e - 1] + run[e - 1] * gp[b * N + e - 1];
                    Rd[e] = Rd[e - 1] + run[e - 1] * gd[b * N + e - 1];
                }
                for (std::size_t r = 0; r < N; ++r) {
                    double* Tp = &tp[(b * N + r) * (N + 1)];
                    double* Td = &td[(b * N + r) * (N + 1)];
                    Tp[r] = Td[r] = 0.0;
                    for (std::size_t e = r + 1; e <= N; ++e) {
                        Tp[e] = Tp[e - 1] + fresh[e - 1 - r] * gp[b * N + e - 1];
                        Td[e] = Td[e - 1] + fresh[e - 1 - r] * gd[b * N + e - 1];
                    }
                }
            }
            CompensatedSum price_acc;
            CompensatedSum delta_acc;
            for (std::size_t li = 0; li < live.size(); ++li) {
                const auto& s = scen[live[li]];
                const double* cf = &coef[li * n_nodes];
                double lp = 0.0;
                double ld = 0.0;
                for (std::size_t b = 0; b < n_nodes; ++b) {
                    if (cf[b] == 0.0) continue;
                    const std::size_t first = s.restarts.empty() ? N : static_cast<std::size_t>(s.restarts.front());
                    double sp = rp[b * (N + 1) + first];
                    double sd = rd[b * (N + 1) + first];
                    for (std::size_t q = 0; q < s.restarts.size(); ++q) {
                        const auto r = static_cast<std::size_t>(s.restarts[q]);
                        const std::size_t e = q + 1 < s.restarts.size() ? static_cast<std::size_t>(s.restarts[q + 1]) : N;
                        sp += tp[(b * N + r) * (N + 1) + e];
                        sd += td[(b * N + r) * (N + 1) + e];
                    }
                    lp += cf[b] * sp;
                    ld += cf[b] * sd;
                }
                const double w = s.weight / A / s.a2_total;
                price_acc.add(w * lp);
                delta_acc.add(w * ld);
            }
            res.price.push_back(price_acc.value());
            res.delta.push_back(delta_acc.value());
        }
    });

    const double n_mc = static_cast<double>(past.size());
    std::vector<PriceResult> out(n_strikes);
    SigmaTildeStats stats;
    std::vector<std::pair<double, double>> rms;
    for (std::size_t u = 0; u < unique.size(); ++u) {
        const double m = multiplicity[u] / n_mc;
        for (std::size_t k = 0; k < n_strikes; ++k) {
            out[k].price += m * results[u].price[k];
            out[k].delta += m * results[u].delta[k];
        }
        stats.mean += m * results[u].sigma_mean;
        stats.rms += m * results[u].sigma_sq;
        for (const auto& [v, w] : results[u].rms_samples) rms.emplace_back(v, m * w);
    }
    stats.rms = std::sqrt(stats.rms);
    std::sort(rms.begin(), rms.end());
    auto quantile = [&](double prob) {
        double cum = 0.0;
        for (const auto& [v, w] : rms) {
            cum += w;
            if (cum >= prob) return v;
        }
        return rms.back().first;
    };
    stats.q05 = quantile(0.05);
    stats.q50 = quantile(0.5);
    stats.q95 = quantile(0.95);
    for (auto& r : out) {
        r.sigma_tilde_stats = stats;
        r.n_scenarios = patterns.size();
        r.n_mc = static_cast<int>(past.size());
        r.n_unique_paths = static_cast<int>(unique.size());
    }
    return out;
}

std::vector<PriceResult> price_strikes(const ContractSpec& contract, std::span<const double> strikes,
                                       const ReturnSeries& history, const ModelParams& p,
                                       const PricingConfig& cfg, std::uint64_t seed) {
    cfg.validate(p);
    contract.validate();
    const auto past = sample_past_restarts(history, contract.t0, p, cfg.inference, derive_seed(seed, {0}));
    return price_given_past(contract, strikes, history, past, p, cfg, derive_seed(seed, {1}));
}

PriceResult price_option(const ContractSpec& contract, const ReturnSeries& history,
                         const ModelParams& p, const PricingConfig& cfg, std::uint64_t seed) {
    const double K = contract.K;
    return price_strikes(contract, std::span<const double>(&K, 1), history, p, cfg, seed).front();
}

}  // namespace swarch
