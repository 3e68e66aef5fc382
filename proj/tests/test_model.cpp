#include "oracles.hpp"

#include "swarch/errors.hpp"
#include "swarch/model.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

using namespace swarch;

namespace {

double phi_by_quadrature(const std::vector<double>& y, double alpha, double beta) {
    auto integrand = [&](double s) {
        double v = oracle::inverse_gamma_sigma_pdf(s, alpha, beta);
        for (double yk : y) v *= oracle::normal_pdf(yk, 0.0, s);
        return v;
    };
    return oracle::integrate_sigma(integrand, beta * 1e-3, beta * 1e3);
}

std::vector<double> random_vector(Rng& rng, std::size_t n, double scale) {
    std::normal_distribution<double> g(0.0, scale);
    std::vector<double> v(n);
    for (auto& x : v) x = g(rng);
    return v;
}

// CDF of z with density proportional to (1 + z^2)^{-(shape+1)/2}: z sqrt(shape) is Student t.
double residual_cdf(double z, double shape) {
    return boost::math::cdf(boost::math::students_t(shape), z * std::sqrt(shape));
}

double ks_statistic(std::vector<double> draws, auto cdf) {
    std::sort(draws.begin(), draws.end());
    const double n = static_cast<double>(draws.size());
    double d = 0.0;
    for (std::size_t k = 0; k < draws.size(); ++k) {
        const double F = cdf(draws[k]);
        d = std::max({d, (k + 1) / n - F, F - k / n});
    }
    return d;
}

}  // namespace

TEST(ACoefficient, FirstStateIsOne) {
    EXPECT_DOUBLE_EQ(a_coefficient(1, 0.225), 1.0);
    EXPECT_DOUBLE_EQ(a_coefficient(1, 1.7), 1.0);
}

TEST(ACoefficient, HalfExponentIsFlat) {
    for (State i = 1; i <= 200; ++i) EXPECT_NEAR(a_coefficient(i, 0.5), 1.0, 1e-12) << i;
}

TEST(ACoefficient, KnownValue) {
    EXPECT_NEAR(a_coefficient(2, 0.25), std::sqrt(std::sqrt(2.0) - 1.0), 1e-15);
    EXPECT_NEAR(a_coefficient(2, 0.25), 0.643594, 1e-6);
}

TEST(ACoefficient, DecreasingBelowHalf) {
    for (double D : {0.1, 0.224, 0.35, 0.49}) {
        for (State i = 1; i < 5000; i += 7) EXPECT_GT(a_coefficient(i, D), a_coefficient(i + 1, D));
    }
}

TEST(ACoefficient, LargeStatesStayAccurate) {
    // i^{2D} - (i-1)^{2D} ~ 2D i^{2D-1}
    const double D = 0.2;
    const State i = 100000000;
    const double approx = 2.0 * D * std::pow(static_cast<double>(i), 2.0 * D - 1.0);
    EXPECT_NEAR(a_coefficient(i, D) * a_coefficient(i, D) / approx, 1.0, 1e-6);
}

TEST(ACoefficient, DomainErrors) {
    EXPECT_THROW(a_coefficient(0, 0.3), DomainError);
    EXPECT_THROW(a_coefficient(3, 0.0), DomainError);
    EXPECT_THROW(a_coefficient(3, -0.1), DomainError);
}

TEST(ACoefficient, SquaredRunTelescopes) {
    const double D = 0.3;
    double sum = 0.0;
    for (State k = 6; k <= 40; ++k) sum += a_coefficient(k, D) * a_coefficient(k, D);
    EXPECT_NEAR(a_squared_run(5, 40, D), sum, 1e-12);
}

TEST(RestartChain, InitialLawExamples) {
    EXPECT_DOUBLE_EQ(restart_initial_law(1, 1.0), 1.0);
    EXPECT_DOUBLE_EQ(restart_initial_law(3, 0.5), 0.125);
}

TEST(RestartChain, InitialLawSumsToOne) {
    for (double nu : {0.5, 0.01, 2e-4}) {
        const State stop = static_cast<State>(std::ceil(std::log(1e-13) / std::log1p(-nu))) + 1;
        double sum = 0.0;
        for (State i = 1; i <= stop; ++i) sum += restart_initial_law(i, nu);
        EXPECT_NEAR(sum, 1.0, 1e-12) << nu;
    }
}

TEST(RestartChain, TransitionExamples) {
    EXPECT_DOUBLE_EQ(restart_transition(1, 7, 0.0002), 0.0002);
    EXPECT_DOUBLE_EQ(restart_transition(8, 7, 0.0002), 0.9998);
    EXPECT_DOUBLE_EQ(restart_transition(5, 7, 0.3), 0.0);
}

TEST(RestartChain, TransitionColumnsSumToOne) {
    for (State j = 1; j < 30; ++j) {
        double sum = 0.0;
        for (State i = 1; i < 40; ++i) sum += restart_transition(i, j, 0.37);
        EXPECT_NEAR(sum, 1.0, 1e-15);
    }
}

TEST(RestartChain, CertainRestart) {
    ModelParams p;
    p.nu = 1.0;
    const auto path = simulate_i(p, 50, 3);
    EXPECT_TRUE(std::all_of(path.states.begin(), path.states.end(), [](State s) { return s == 1; }));
    EXPECT_TRUE(path.satisfies_support());
}

TEST(RestartChain, NearDeterministicIncrement) {
    ModelParams p;
    p.nu = 1e-12;
    Rng rng(11);
    const auto path = simulate_i_from(p, 3, 5, rng);
    EXPECT_EQ(path.states, (std::vector<State>{3, 4, 5, 6, 7}));
}

TEST(RestartChain, RestartFrequencyWithinBinomialBand) {
    ModelParams p;
    p.nu = 2e-4;
    const int n = 1000000;
    const auto path = simulate_i(p, n, 2024);
    ASSERT_TRUE(path.satisfies_support());
    long restarts = 0;
    for (std::size_t t = 1; t < path.states.size(); ++t) restarts += path.states[t] == 1;
    const double trials = n - 1;
    const double sd = std::sqrt(trials * p.nu * (1.0 - p.nu));
    EXPECT_LT(std::abs(restarts - trials * p.nu), 3.0 * sd) << restarts;
}

TEST(RestartChain, SupportInvariant) {
    RestartPath good{1, 4, {3, 4, 1, 2}, 0.5};
    EXPECT_TRUE(good.satisfies_support());
    RestartPath skip{1, 3, {3, 5, 6}, 1.0};
    EXPECT_FALSE(skip.satisfies_support());
    RestartPath zero{1, 2, {0, 1}, 1.0};
    EXPECT_FALSE(zero.satisfies_support());
    RestartPath heavy{1, 2, {1, 2}, 1.5};
    EXPECT_FALSE(heavy.satisfies_support());
}

TEST(Residuals, FirstStepIsBetaTimesZ) {
    ModelParams p;
    p.beta = 0.01;
    const std::vector<double> z{1.0};
    EXPECT_DOUBLE_EQ(y_from_residuals(p, z)[0], 0.01);
}

TEST(Residuals, ZeroResidualsGiveZeroPath) {
    ModelParams p;
    const std::vector<double> z(40, 0.0);
    const auto y = y_from_residuals(p, z);
    EXPECT_TRUE(std::all_of(y.begin(), y.end(), [](double v) { return v == 0.0; }));
}

TEST(Residuals, RecursionUsesAtMostMLags) {
    ModelParams p;
    p.M = 3;
    p.beta = 0.02;
    Rng rng(5);
    const auto z = random_vector(rng, 12, 0.7);
    const auto y = y_from_residuals(p, z);
    for (std::size_t t = 0; t < z.size(); ++t) {
        double s2 = p.beta * p.beta;
        for (std::size_t k = 1; k <= std::min<std::size_t>(t, 3); ++k) s2 += y[t - k] * y[t - k];
        EXPECT_NEAR(y[t], std::sqrt(s2) * z[t], 1e-15) << t;
    }
}

TEST(Residuals, MatchStudentLawKS) {
    Rng rng(99);
    const double shape = 4.0;
    std::vector<double> draws(100000);
    for (auto& d : draws) d = draw_residual(rng, shape);
    const double ks = ks_statistic(draws, [&](double z) { return residual_cdf(z, shape); });
    EXPECT_LT(ks, 1.628 / std::sqrt(static_cast<double>(draws.size())));
}

TEST(Residuals, VarianceMatchesDensityMoment) {
    // second moment of (1+z^2)^{-(a+1)/2}, normalised, by quadrature
    for (double shape : {4.0, 10.0}) {
        auto unnorm = [&](double z) { return std::pow(1.0 + z * z, -(shape + 1.0) / 2.0); };
        const double mass = oracle::integrate_line(unnorm);
        const double m2 = oracle::integrate_line([&](double z) { return z * z * unnorm(z); }) / mass;
        EXPECT_NEAR(m2, 1.0 / (shape - 2.0), 1e-9);
        Rng rng(7);
        double acc = 0.0;
        const int n = 1000000;
        for (int k = 0; k < n; ++k) {
            const double z = draw_residual(rng, shape);
            acc += z * z;
        }
        EXPECT_NEAR(acc / n / m2, 1.0, shape == 4.0 ? 0.04 : 0.01) << shape;
    }
}

TEST(Simulation, Deterministic) {
    ModelParams p;
    p.D = 0.25;
    p.nu = 0.01;
    const auto a = simulate_x(p, 500, 42);
    const auto b = simulate_x(p, 500, 42);
    EXPECT_EQ(a.x, b.x);
    EXPECT_EQ(a.states, b.states);
    const auto c = simulate_x(p, 500, 43);
    EXPECT_NE(a.x, c.x);
}

TEST(Simulation, HalfExponentReturnsEqualY) {
    ModelParams p;
    p.D = 0.5;
    p.nu = 0.05;
    const auto sim = simulate_x(p, 300, 8);
    for (std::size_t t = 0; t < sim.x.size(); ++t) EXPECT_NEAR(sim.x[t], sim.y[t], 1e-15 * std::abs(sim.y[t]));
}

TEST(Simulation, AllOnesStatesReturnEqualY) {
    ModelParams p;
    p.D = 0.2;
    const auto y = simulate_y(p, 100, 1);
    const std::vector<State> ones(100, 1);
    EXPECT_EQ(compose_returns(y, ones, p.D), y);
}

TEST(Simulation, ComposesAWithY) {
    ModelParams p;
    p.D = 0.2;
    p.nu = 0.02;
    const auto sim = simulate_x(p, 400, 77);
    for (std::size_t t = 0; t < sim.x.size(); ++t) {
        EXPECT_DOUBLE_EQ(sim.a[t], a_coefficient(sim.states[t], p.D));
        EXPECT_DOUBLE_EQ(sim.x[t], sim.a[t] * sim.y[t]);
    }
}

TEST(Simulation, SecondMomentFactorises) {
    // E[X_t^2] = E[a(I_t)^2] E[Y_t^2] by independence of the two components.
    ModelParams p;
    p.D = 0.25;
    p.nu = 0.05;
    p.M = 2;
    p.alpha = 8.0;
    p.beta = 0.01;
    const int t = 5;
    const int n = 200000;
    double x2 = 0.0, x4 = 0.0, a2 = 0.0, y2 = 0.0;
    for (int k = 0; k < n; ++k) {
        const auto sim = simulate_x(p, t, derive_seed(3, {static_cast<std::uint64_t>(k)}));
        const double x = sim.x.back();
        x2 += x * x;
        x4 += x * x * x * x;
        a2 += sim.a.back() * sim.a.back();
        y2 += sim.y.back() * sim.y.back();
    }
    x2 /= n;
    const double sd = std::sqrt((x4 / n - x2 * x2) / n);
    const double predicted = (a2 / n) * (y2 / n);
    EXPECT_LT(std::abs(x2 - predicted), 3.0 * sd + 0.01 * predicted);
}

TEST(PhiDensity, KnownValue) {
    const std::vector<double> y{0.0};
    EXPECT_NEAR(phi_density(y, 4.0, 0.1), std::tgamma(2.5) / (std::sqrt(std::numbers::pi) * 0.1), 1e-12);
    EXPECT_NEAR(phi_density(y, 4.0, 0.1), 7.5, 1e-12);
    EXPECT_NEAR(phi_by_quadrature(y, 4.0, 0.1), 7.5, 1e-9);
}

TEST(PhiDensity, MatchesMixtureIntegral) {
    Rng rng(17);
    for (int k = 0; k < 20; ++k) {
        const std::size_t t = 1 + k % 5;
        const double alpha = 2.5 + k * 0.4;
        const double beta = 0.005 + 0.001 * k;
        const auto y = random_vector(rng, t, beta);
        const double expected = phi_by_quadrature(y, alpha, beta);
        EXPECT_NEAR(phi_density(y, alpha, beta) / expected, 1.0, 1e-8) << k;
    }
}

TEST(PhiDensity, SymmetricAndNormalised) {
    const std::vector<double> a{0.01, -0.03}, b{-0.03, 0.01}, c{-0.01, 0.03};
    EXPECT_DOUBLE_EQ(phi_density(a, 5.0, 0.02), phi_density(b, 5.0, 0.02));
    EXPECT_DOUBLE_EQ(phi_density(a, 5.0, 0.02), phi_density(c, 5.0, 0.02));
    const double mass = oracle::integrate_line([](double y) {
        const std::vector<double> v{y};
        return phi_density(v, 4.0, 0.1);
    });
    EXPECT_NEAR(mass, 1.0, 1e-10);
}

TEST(ConditionalDensity, KnownValue) {
    const std::vector<double> lags{0.0};
    const double expected = std::tgamma(3.0) / (std::sqrt(std::numbers::pi) * std::tgamma(2.5)) / 0.1;
    EXPECT_NEAR(conditional_y_density(0.0, lags, 4.0, 0.1, 1), expected, 1e-12);
    EXPECT_NEAR(expected, 8.48826, 1e-5);
}

TEST(ConditionalDensity, NormalisedAndSignSymmetric) {
    const std::vector<double> lags{0.02, -0.01, 0.005};
    const double mass =
        oracle::integrate_line([&](double y) { return conditional_y_density(y, lags, 3.5, 0.01, 3); });
    EXPECT_NEAR(mass, 1.0, 1e-10);
    const std::vector<double> flipped{-0.02, 0.01, -0.005};
    EXPECT_DOUBLE_EQ(conditional_y_density(0.013, lags, 3.5, 0.01, 3),
                     conditional_y_density(-0.013, flipped, 3.5, 0.01, 3));
}

TEST(ConditionalDensity, RatioOfJointDensities) {
    Rng rng(21);
    for (int k = 0; k < 50; ++k) {
        const int M = 1 + k % 6;
        const double alpha = 3.0 + 0.1 * k;
        const double beta = 0.01;
        auto window = random_vector(rng, static_cast<std::size_t>(M) + 1, 0.015);
        const std::span<const double> lags(window.data(), static_cast<std::size_t>(M));
        const double lhs = conditional_y_density(window.back(), lags, alpha, beta, M) * phi_density(lags, alpha, beta);
        const double rhs = phi_density(window, alpha, beta);
        EXPECT_NEAR(lhs / rhs, 1.0, 1e-10) << k;
    }
}

TEST(ConditionalDensity, WrongLagCount) {
    const std::vector<double> lags{0.0, 0.0};
    EXPECT_THROW(conditional_y_density(0.0, lags, 4.0, 0.1, 3), DomainError);
}

TEST(ConditionalDensity, MatchesSimulatedConditionalDraws) {
    // Y_t given its M lags is sqrt(beta^2 + sum lags^2) times a residual of shape alpha + M.
    ModelParams p;
    p.M = 2;
    p.alpha = 3.0;
    p.beta = 0.01;
    const std::vector<double> lags{0.012, -0.02};
    const double scale = std::sqrt(p.beta * p.beta + 0.012 * 0.012 + 0.02 * 0.02);
    Rng rng(4);
    std::vector<double> draws(100000);
    for (auto& d : draws) d = scale * draw_residual(rng, p.alpha + p.M);
    std::sort(draws.begin(), draws.end());
    auto density = [&](double y) { return conditional_y_density(y, lags, p.alpha, p.beta, p.M); };
    using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
    double F = 0.5 - GK::integrate(density, draws.front(), 0.0, 20, 1e-12);
    double d = 0.0;
    const double n = static_cast<double>(draws.size());
    for (std::size_t k = 0; k < draws.size(); ++k) {
        if (k > 0) F += GK::integrate(density, draws[k - 1], draws[k], 0);
        d = std::max({d, (k + 1) / n - F, F - k / n});
    }
    EXPECT_LT(d, 1.628 / std::sqrt(n));
}

TEST(ReturnSeriesIo, RoundTrip) {
    const auto dir = std::filesystem::temp_directory_path() / "swarch_test_model";
    std::filesystem::create_directories(dir);
    ReturnSeries s;
    s.dates = {parse_date("2010-01-04"), parse_date("2010-01-05"), parse_date("2010-01-06")};
    s.returns = {0.01, -0.0123456789012345, 3e-7};
    const auto path = (dir / "r.csv").string();
    write_return_series(path, s, "note=1");
    const auto back = read_return_series(path);
    EXPECT_EQ(back.dates, s.dates);
    EXPECT_EQ(back.returns, s.returns);
}

TEST(ReturnSeriesIo, RejectsUnorderedDatesAndBadHeader) {
    const auto dir = std::filesystem::temp_directory_path() / "swarch_test_model";
    std::filesystem::create_directories(dir);
    const auto path = (dir / "bad.csv").string();
    {
        std::ofstream f(path);
        f << "date,log_return\n2010-01-05,0.1\n2010-01-04,0.2\n";
    }
    EXPECT_THROW(read_return_series(path), DataError);
    {
        std::ofstream f(path);
        f << "day,ret\n2010-01-05,0.1\n";
    }
    EXPECT_THROW(read_return_series(path), DataError);
    {
        std::ofstream f(path);
        f << "date,log_return\n2010-01-05,abc\n";
    }
    EXPECT_THROW(read_return_series(path), DataError);
}

TEST(ReturnSeriesIo, WindowEnding) {
    ReturnSeries s;
    for (int d = 4; d <= 8; ++d) {
        s.dates.push_back(Date{std::chrono::year{2010}, std::chrono::January, std::chrono::day(d)});
        s.returns.push_back(d);
    }
    const auto w = s.window_ending(parse_date("2010-01-07"), 2);
    EXPECT_EQ(w.returns, (std::vector<double>{6.0, 7.0}));
    EXPECT_THROW(s.window_ending(parse_date("2010-01-05"), 3), DataError);
}

TEST(ModelParams, Validation) {
    ModelParams p;
    EXPECT_NO_THROW(p.validate());
    p.nu = 0.0;
    EXPECT_THROW(p.validate(), DomainError);
    p = {};
    p.M = 0;
    EXPECT_THROW(p.validate(), DomainError);
    p = {};
    p.beta = -1.0;
    EXPECT_THROW(p.validate(), DomainError);
}
