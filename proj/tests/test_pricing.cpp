#include "oracles.hpp"

#include "swarch/errors.hpp"
#include "swarch/pricing.hpp"
#include "swarch/volatility_mixture.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <cmath>
#include <numbers>
#include <random>

using namespace swarch;

namespace {

double Phi(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Discrete Black-Scholes price for n steps of per-step volatility s and rate r, written out directly.
double reference_bs(double S, double K, int n, double s, double r) {
    const double st = s * std::sqrt(static_cast<double>(n));
    const double dp = (std::log(S / K) + n * std::log1p(r) + 0.5 * st * st) / st;
    return (1.0 + r) * (S * Phi(dp) - K * std::pow(1.0 + r, -n) * Phi(dp - st));
}

template <class F>
double gk(F f, double lo, double hi) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, hi, 8, 1e-12);
}

// (1+r)^{1-n} E[(S e^{u_1 + ... + u_n} - K)^+] for n = 1, 2 with u_k ~ N(ln(1+r) - s_k^2/2, s_k^2).
double payoff_quadrature(double S, double K, double r, const std::vector<double>& s) {
    const double g = std::log1p(r);
    auto mean = [&](std::size_t k) { return g - 0.5 * s[k] * s[k]; };
    const double kink = std::log(K / S);
    auto last = [&](double done) {
        const std::size_t k = s.size() - 1;
        const double lo = std::max(kink - done, mean(k) - 14.0 * s[k]);
        const double hi = mean(k) + 14.0 * s[k];
        if (lo >= hi) return 0.0;
        return gk([&](double u) { return (S * std::exp(done + u) - K) * oracle::normal_pdf(u, mean(k), s[k]); }, lo,
                  hi);
    };
    double value;
    if (s.size() == 1) {
        value = last(0.0);
    } else {
        value = gk([&](double u) { return last(u) * oracle::normal_pdf(u, mean(0), s[0]); }, mean(0) - 14.0 * s[0],
                   mean(0) + 14.0 * s[0]);
    }
    return value * std::pow(1.0 + r, 1.0 - static_cast<double>(s.size()));
}

ModelParams toy_model() {
    ModelParams p;
    p.D = 0.25;
    p.nu = 0.01;
    p.alpha = 5.0;
    p.beta = 0.01;
    p.M = 4;
    p.mu = 2e-4;
    p.r = 1e-4;
    return p;
}

ReturnSeries toy_history(const ModelParams& p, int length, std::uint64_t seed) {
    ReturnSeries h;
    h.returns = simulate_x(p, length, seed).x;
    return h;
}

PricingConfig toy_config() {
    PricingConfig cfg;
    cfg.inference.tau = 2;
    cfg.inference.n_mc = 8;
    cfg.n_real = 16;
    return cfg;
}

// One past string ending in state i_last, covering [t0-M, t0-1].
RestartPath past_ending(long t0, const ModelParams& p, State i_last) {
    RestartPath path{t0 - p.M, t0 - 1, {}, 1.0};
    for (int k = p.M - 1; k >= 0; --k) path.states.push_back(std::max<State>(1, i_last - k));
    // keep the string on the chain's support
    for (std::size_t k = 1; k < path.states.size(); ++k) {
        if (path.states[k] != 1) path.states[k] = path.states[k - 1] + 1;
    }
    return path;
}

// The full price rebuilt from its definition: every scenario with at most two restarts, its
// rho_bar mixture, and the integral of the conditional price against each component.
double pipeline_oracle(const ContractSpec& c, const ReturnSeries& h, const RestartPath& past, const ModelParams& p,
                       int n_real, std::uint64_t seed) {
    const auto set = enumerate_future_scenarios(past.states.back(), c.t0, c.T, p.nu, 2);
    std::map<std::pair<double, double>, double> cache;
    double total = 0.0;
    for (const auto& sc : set.scenarios) {
        RestartPath full = past;
        full.t_end = c.T;
        full.states.insert(full.states.end(), sc.states.begin(), sc.states.end());
        const auto rho_bar = build_rho_bar(h, full, c.t0, c.T, p, n_real, derive_seed(seed, {0}));
        double a2 = 0.0;
        for (State i : sc.states) a2 += std::pow(a_coefficient(i, p.D), 2.0);
        const double scale_c = std::sqrt(a2);
        double value = 0.0;
        for (const auto& comp : rho_bar.components()) {
            auto key = std::make_pair(comp.scale, scale_c);
            auto it = cache.find(key);
            if (it == cache.end()) {
                const double centre = comp.scale / std::sqrt(comp.shape);
                const double v = oracle::integrate_sigma(
                    [&](double s) {
                        return call_price_effective(c, s * scale_c, p.r) *
                               oracle::inverse_gamma_sigma_pdf(s, comp.shape, comp.scale);
                    },
                    centre * 1e-2, centre * 1e3);
                it = cache.emplace(key, v).first;
            }
            value += comp.weight * it->second;
        }
        total += sc.weight / set.normalization * value;
    }
    return total;
}

}  // namespace

TEST(Kernel, NormalisedAndMartingale) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 100; ++k) {
        ModelParams p;
        p.D = 0.1 + 0.4 * u(rng);
        p.mu = -1e-3 + 2e-3 * u(rng);
        p.r = 5e-4 * u(rng);
        const double sigma = 0.003 + 0.05 * u(rng);
        const State i = 1 + static_cast<State>(200 * u(rng));
        const double sd = sigma * a_coefficient(i, p.D);
        const double lo = -40.0 * sd - 0.01;
        const double hi = 40.0 * sd + 0.01;
        const double mass = oracle::integrate([&](double x) { return martingale_kernel(x, sigma, i, p); }, lo, hi);
        EXPECT_NEAR(mass, 1.0, 1e-10);
        const double growth = oracle::integrate(
            [&](double x) { return std::exp(p.mu + x) * martingale_kernel(x, sigma, i, p); }, lo, hi);
        EXPECT_NEAR(growth / (1.0 + p.r), 1.0, 1e-10) << k;
    }
}

TEST(Kernel, ZeroExcessDriftCentresAtMinusHalfVariance) {
    ModelParams p;
    p.D = 0.3;
    p.r = 2e-4;
    p.mu = std::log1p(p.r);
    const double s = 0.02 * a_coefficient(3, p.D);
    const double mean =
        oracle::integrate([&](double x) { return x * martingale_kernel(x, 0.02, 3, p); }, -40.0 * s, 40.0 * s);
    EXPECT_NEAR(mean, -0.5 * s * s, 1e-14);
    EXPECT_THROW(martingale_kernel(0.0, 0.0, 1, p), DomainError);
}

TEST(SigmaTilde, Examples) {
    const std::vector<State> flat{4, 5, 1, 2, 3};
    EXPECT_NEAR(sigma_tilde(0.01, flat, 0.5), 0.01 * std::sqrt(5.0), 1e-17);
    const std::vector<State> one{7};
    EXPECT_NEAR(sigma_tilde(0.01, one, 0.3), 0.01 * a_coefficient(7, 0.3), 1e-17);
    const std::vector<State> two{1, 2};
    EXPECT_NEAR(sigma_tilde(0.01, two, 0.25), 0.011892, 5e-7);
}

TEST(ConditionalPrice, AtTheMoneyExample) {
    const ContractSpec c{100.0, 10, 10, 100.0};
    const double expected = 100.0 * (Phi(0.1) - Phi(-0.1));
    EXPECT_NEAR(call_price_effective(c, 0.2, 0.0), expected, 1e-12);
    EXPECT_NEAR(call_price_effective(c, 0.2, 0.0), 7.9656, 5e-5);
    EXPECT_NEAR(payoff_quadrature(100.0, 100.0, 0.0, {0.2}), call_price_effective(c, 0.2, 0.0), 1e-9);
}

TEST(ConditionalPrice, MatchesTwoStepQuadrature) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 20; ++k) {
        ModelParams p;
        p.D = 0.1 + 0.4 * u(rng);
        p.mu = -5e-4 + 1e-3 * u(rng);
        p.r = 3e-4 * u(rng);
        const double sigma = 0.005 + 0.03 * u(rng);
        const State first = 1 + static_cast<State>(50 * u(rng));
        const std::vector<State> states{first, u(rng) < 0.3 ? State{1} : first + 1};
        const ContractSpec c{100.0 * (0.9 + 0.2 * u(rng)), 20, 21, 100.0};
        const std::vector<double> s{sigma * a_coefficient(states[0], p.D), sigma * a_coefficient(states[1], p.D)};
        const double oracle_price = payoff_quadrature(c.S_prev, c.K, p.r, s);
        EXPECT_NEAR(conditional_call_price(c, sigma, states, p) / oracle_price, 1.0, 1e-6) << k;
    }
}

TEST(ConditionalPrice, Limits) {
    ModelParams p = toy_model();
    const std::vector<State> states{3, 4, 1};
    const ContractSpec tiny{1e-9, 5, 7, 80.0};
    EXPECT_NEAR(conditional_call_price(tiny, 0.01, states, p), (1.0 + p.r) * 80.0, 1e-8);
    EXPECT_NEAR(conditional_delta(tiny, 0.01, states, p), 1.0 + p.r, 1e-12);
    const ContractSpec deep{400.0, 5, 7, 80.0};
    EXPECT_LT(conditional_delta(deep, 0.005, states, p), 1e-12);
    const ContractSpec itm{70.0, 5, 7, 80.0};
    EXPECT_NEAR(call_price_effective(itm, 0.0, p.r), (1.0 + p.r) * (80.0 - 70.0 * std::pow(1.0 + p.r, -3)), 1e-12);
    EXPECT_THROW(conditional_call_price(itm, 0.01, std::vector<State>{1, 2}, p), DomainError);
    EXPECT_THROW(ContractSpec({-1.0, 5, 7, 80.0}).validate(), DomainError);
    EXPECT_THROW(ContractSpec({1.0, 8, 7, 80.0}).validate(), DomainError);
}

TEST(Delta, MatchesFiniteDifference) {
    const double r = 2e-4;
    for (double K : {80.0, 95.0, 100.0, 104.0, 130.0}) {
        for (double st : {0.01, 0.05, 0.2}) {
            ContractSpec c{K, 3, 12, 100.0};
            const double h = 1e-4;
            ContractSpec up = c, down = c;
            up.S_prev += h;
            down.S_prev -= h;
            const double fd = (call_price_effective(up, st, r) - call_price_effective(down, st, r)) / (2.0 * h);
            const double delta = call_delta_effective(c, st, r);
            if (delta < 1e-8) continue;
            EXPECT_NEAR(fd / delta, 1.0, 1e-6) << K << ' ' << st;
        }
    }
}

TEST(BlackScholes, ImpliedVolRoundTrip) {
    for (int n : {1, 5, 40}) {
        for (double K : {70.0, 95.0, 100.0, 110.0}) {
            for (double s : {0.004, 0.01, 0.03}) {
                ContractSpec c{K, 10, 9 + n, 100.0};
                const double price = bs_price(c, s, 1e-4);
                if (price - bs_price(c, 0.0, 1e-4) < 1e-9) continue;
                EXPECT_NEAR(bs_implied_vol(c, price, 1e-4) / s, 1.0, 1e-6) << n << ' ' << K << ' ' << s;
            }
        }
    }
}

TEST(BlackScholes, ImpliedVolBoundaryErrors) {
    const ContractSpec c{90.0, 10, 14, 100.0};
    const double r = 1e-4;
    EXPECT_THROW(bs_implied_vol(c, bs_price(c, 0.0, r), r), NumericError);
    EXPECT_THROW(bs_implied_vol(c, (1.0 + r) * 100.0, r), NumericError);
    EXPECT_THROW(bs_implied_vol(c, -1.0, r), NumericError);
}

TEST(BlackScholes, AtTheMoneyFirstOrder) {
    for (double st : {0.001, 0.01, 0.03, 0.05}) {
        const ContractSpec c{100.0, 4, 4, 100.0};
        const double taylor = 100.0 * st / std::sqrt(2.0 * std::numbers::pi);
        EXPECT_NEAR(call_price_effective(c, st, 0.0) / taylor, 1.0, 0.01) << st;
    }
}

TEST(PriceOption, PointMassAtHalfExponentIsBlackScholes) {
    ModelParams p = toy_model();
    p.D = 0.5;
    const auto h = toy_history(p, 200, 41);
    PricingConfig cfg = toy_config();
    cfg.point_mass_sigma = 0.012;
    const long t0 = static_cast<long>(h.size()) + 1;
    for (int n : {1, 2, 5, 21, 63}) {
        for (double K : {80.0, 95.0, 100.0, 105.0, 125.0}) {
            const ContractSpec c{K, t0, t0 + n - 1, 100.0};
            const auto res = price_option(c, h, p, cfg, 9);
            EXPECT_NEAR(res.price, reference_bs(100.0, K, n, 0.012, p.r), 1e-10) << n << ' ' << K;
            EXPECT_NEAR(res.price, bs_price(c, 0.012, p.r), 1e-10);
        }
    }
}

TEST(PriceOption, MatchesScenarioMixtureOracle) {
    const ModelParams p = toy_model();
    const auto h = toy_history(p, 120, 5);
    const long t0 = static_cast<long>(h.size()) + 1;
    PricingConfig cfg = toy_config();
    cfg.n_real = 6;
    const auto past = past_ending(t0, p, 30);
    for (int n : {1, 5}) {
        for (double K : {97.0, 100.0, 103.0}) {
            const ContractSpec c{K, t0, t0 + n - 1, 100.0};
            const auto res = price_given_past(c, std::vector<double>{K}, h, {past}, p, cfg, 77);
            const double expected = pipeline_oracle(c, h, past, p, cfg.n_real, 77);
            EXPECT_NEAR(res[0].price / expected, 1.0, 1e-9) << n << ' ' << K << ' ' << expected;
        }
    }
}

TEST(PriceOption, LongMaturityInterpolationIsAccurate) {
    const ModelParams p = toy_model();
    const auto h = toy_history(p, 120, 6);
    const long t0 = static_cast<long>(h.size()) + 1;
    PricingConfig cfg = toy_config();
    cfg.n_real = 3;
    const auto past = past_ending(t0, p, 12);
    const ContractSpec c{104.0, t0, t0 + 29, 100.0};
    const auto res = price_given_past(c, std::vector<double>{104.0}, h, {past}, p, cfg, 78);
    const double expected = pipeline_oracle(c, h, past, p, cfg.n_real, 78);
    EXPECT_NEAR(res[0].price / expected, 1.0, 1e-10) << expected;
}

TEST(PriceOption, BoundsAndMonotonicity) {
    const ModelParams p = toy_model();
    const auto h = toy_history(p, 150, 12);
    const long t0 = static_cast<long>(h.size()) + 1;
    std::vector<double> strikes;
    for (double K = 70.0; K <= 130.0; K += 2.5) strikes.push_back(K);
    for (int n : {1, 10, 40}) {
        const ContractSpec c{100.0, t0, t0 + n - 1, 100.0};
        const auto res = price_strikes(c, strikes, h, p, toy_config(), 15);
        for (std::size_t k = 0; k < strikes.size(); ++k) {
            const double lower = std::max(0.0, (1.0 + p.r) * 100.0 - strikes[k] * std::pow(1.0 + p.r, 1 - n));
            EXPECT_GE(res[k].price, lower - 1e-12);
            EXPECT_LE(res[k].price, (1.0 + p.r) * 100.0);
            EXPECT_GE(res[k].delta, 0.0);
            EXPECT_LE(res[k].delta, 1.0 + p.r);
            if (k > 0) {
                EXPECT_LE(res[k].price, res[k - 1].price);
                EXPECT_LE(res[k].delta, res[k - 1].delta + 1e-12);
            }
        }
    }
}

TEST(PriceOption, LinearInThePastMixture) {
    const ModelParams p = toy_model();
    const auto h = toy_history(p, 100, 13);
    const long t0 = static_cast<long>(h.size()) + 1;
    const auto a = past_ending(t0, p, 3);
    const auto b = past_ending(t0, p, 60);
    const std::vector<double> strikes{95.0, 100.0, 106.0};
    const ContractSpec c{100.0, t0, t0, 100.0};
    const auto cfg = toy_config();
    const auto pa = price_given_past(c, strikes, h, {a}, p, cfg, 1);
    const auto pb = price_given_past(c, strikes, h, {b}, p, cfg, 1);
    const auto mix = price_given_past(c, strikes, h, {a, b}, p, cfg, 1);
    const auto weighted = price_given_past(c, strikes, h, {b, a, b}, p, cfg, 1);
    for (std::size_t k = 0; k < strikes.size(); ++k) {
        EXPECT_NEAR(mix[k].price, 0.5 * (pa[k].price + pb[k].price), 1e-13);
        EXPECT_NEAR(mix[k].delta, 0.5 * (pa[k].delta + pb[k].delta), 1e-13);
        EXPECT_NEAR(weighted[k].price, (pa[k].price + 2.0 * pb[k].price) / 3.0, 1e-13);
    }
    EXPECT_EQ(mix[0].n_unique_paths, 2);
    EXPECT_EQ(weighted[0].n_mc, 3);
}

TEST(PriceOption, TruncationOrderIsBelowNu) {
    for (double nu : {1e-3, 1e-2}) {
        ModelParams p = toy_model();
        p.nu = nu;
        const auto h = toy_history(p, 120, 21);
        const long t0 = static_cast<long>(h.size()) + 1;
        PricingConfig two = toy_config();
        PricingConfig three = two;
        three.inference.max_future_restarts = 3;
        for (int k = 0; k < 10; ++k) {
            const int n = 1 + k;
            const double K = 97.0 + 0.7 * k;
            const auto past = past_ending(t0, p, 10 + 17 * k);
            const ContractSpec c{K, t0, t0 + n - 1, 100.0};
            const double c2 = price_given_past(c, std::vector<double>{K}, h, {past}, p, two, 3)[0].price;
            const double c3 = price_given_past(c, std::vector<double>{K}, h, {past}, p, three, 3)[0].price;
            EXPECT_LT(std::abs(c2 - c3) / c3, nu) << nu << ' ' << k;
        }
    }
}

TEST(PriceOption, ContinuousInNuWithFullEnumeration) {
    ModelParams p = toy_model();
    const auto h = toy_history(p, 100, 22);
    const long t0 = static_cast<long>(h.size()) + 1;
    PricingConfig cfg = toy_config();
    cfg.inference.max_future_restarts = 3;
    const auto past = past_ending(t0, p, 8);
    const ContractSpec c{101.0, t0, t0 + 2, 100.0};
    double previous = -1.0;
    for (double nu = 0.9; nu <= 1.0 + 1e-12; nu += 0.005) {
        p.nu = std::min(nu, 1.0);
        const double price = price_given_past(c, std::vector<double>{101.0}, h, {past}, p, cfg, 4)[0].price;
        if (previous > 0.0) {
            EXPECT_LT(std::abs(price - previous), 0.01 * previous);
        }
        previous = price;
    }
}

TEST(PriceOption, ZeroNormalisationIsAnError) {
    ModelParams p = toy_model();
    p.nu = 1.0;
    const auto h = toy_history(p, 60, 23);
    const long t0 = static_cast<long>(h.size()) + 1;
    const auto past = past_ending(t0, p, 1);
    const auto cfg = toy_config();
    const ContractSpec c{100.0, t0, t0 + 4, 100.0};
    EXPECT_THROW(price_given_past(c, std::vector<double>{100.0}, h, {past}, p, cfg, 1), NumericError);
    const ContractSpec shortc{100.0, t0, t0 + 1, 100.0};
    EXPECT_GT(price_given_past(shortc, std::vector<double>{100.0}, h, {past}, p, cfg, 1)[0].price, 0.0);
}

TEST(PriceOption, InputErrors) {
    const ModelParams p = toy_model();
    const auto h = toy_history(p, 60, 24);
    const long t0 = static_cast<long>(h.size()) + 1;
    const ContractSpec c{100.0, t0, t0 + 4, 100.0};
    const auto cfg = toy_config();
    EXPECT_THROW(price_given_past(c, std::vector<double>{100.0}, h, {}, p, cfg, 1), NumericError);
    RestartPath shortp{t0 - 2, t0 - 1, {1, 2}, 1.0};
    EXPECT_THROW(price_given_past(c, std::vector<double>{100.0}, h, {shortp}, p, cfg, 1), DomainError);
    EXPECT_THROW(price_given_past(c, std::vector<double>{}, h, {past_ending(t0, p, 3)}, p, cfg, 1), DomainError);
    PricingConfig bad = cfg;
    bad.quad_nodes = 1;
    EXPECT_THROW(price_option(c, h, p, bad, 1), DomainError);
    bad = cfg;
    bad.point_mass_sigma = 0.0;
    EXPECT_THROW(price_option(c, h, p, bad, 1), DomainError);
    const ReturnSeries tiny{{}, {0.01, 0.02}};
    const ContractSpec early{100.0, 3, 5, 100.0};
    EXPECT_THROW(price_option(early, tiny, p, cfg, 1), DataError);
}

TEST(PriceOption, ReproducibleAndThreadInvariant) {
    const ModelParams p = toy_model();
    const auto h = toy_history(p, 150, 25);
    const long t0 = static_cast<long>(h.size()) + 1;
    const ContractSpec c{100.0, t0, t0 + 9, 100.0};
    PricingConfig cfg = toy_config();
    const auto a = price_option(c, h, p, cfg, 31);
    cfg.threads = 3;
    const auto b = price_option(c, h, p, cfg, 31);
    EXPECT_EQ(a.price, b.price);
    EXPECT_EQ(a.delta, b.delta);
    EXPECT_EQ(a.n_mc, cfg.inference.n_mc);
    EXPECT_EQ(a.n_scenarios, 1u + 10u + 45u);
    const auto& st = a.sigma_tilde_stats;
    EXPECT_GT(st.mean, 0.0);
    EXPECT_GE(st.rms, st.mean);
    EXPECT_LE(st.q05, st.q50);
    EXPECT_LE(st.q50, st.q95);
}

TEST(PriceOption, SmileAwayFromHalfExponent) {
    ModelParams p = toy_model();
    p.M = 10;
    const auto h = toy_history(p, 250, 26);
    const long t0 = static_cast<long>(h.size()) + 1;
    const int n = 21;
    std::vector<double> strikes;
    for (double m = 0.85; m <= 1.15 + 1e-9; m += 0.05) strikes.push_back(100.0 * m);
    const ContractSpec c{100.0, t0, t0 + n - 1, 100.0};
    const auto res = price_strikes(c, strikes, h, p, toy_config(), 27);
    std::vector<double> iv;
    for (std::size_t k = 0; k < strikes.size(); ++k) {
        ContractSpec ck = c;
        ck.K = strikes[k];
        iv.push_back(bs_implied_vol(ck, res[k].price, p.r));
    }
    const auto [lo, hi] = std::minmax_element(iv.begin(), iv.end());
    EXPECT_GT(*hi - *lo, 1e-4 * *hi);
    // heavier tails than Gaussian lift the wings above the centre
    EXPECT_GT(iv.front(), iv[3]);
    EXPECT_GT(iv.back(), iv[3]);
}
