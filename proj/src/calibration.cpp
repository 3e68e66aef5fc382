#include "swarch/calibration.hpp"

#include "kv.hpp"
#include "swarch/errors.hpp"
#include "swarch/parallel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>

namespace swarch {

namespace {

// X path at beta = 1 with separate engines for the Gaussian, chi-square and restart
// draws, so that cells differing in (D, nu) reuse exactly the same Y path and cells
// differing in alpha share the Gaussian and restart streams.
void simulate_unit_path(double D, double nu, double alpha, int M, int length, std::uint64_t seed,
                        std::vector<double>& x) {
    Rng gauss = make_rng(seed, {0});
    Rng chi = make_rng(seed, {1});
    Rng restart = make_rng(seed, {2});
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::gamma_distribution<double>> chi2;
    for (int m = 0; m <= M; ++m) chi2.emplace_back(0.5 * (alpha + m), 2.0);

    x.resize(static_cast<std::size_t>(length));
    std::vector<double> ring(static_cast<std::size_t>(M), 0.0);
    State i = 1;
    if (nu < 1.0) {
        const double u = 1.0 - unif(restart);  // (0, 1]
        i = 1 + static_cast<State>(std::floor(std::log(u) / std::log1p(-nu)));
    }
    double sum2 = 0.0;
    for (int t = 0; t < length; ++t) {
        if (t > 0) i = unif(restart) < nu ? 1 : i + 1;
        const int lags = std::min(t, M);
        const double z = normal(gauss) / std::sqrt(chi2[static_cast<std::size_t>(lags)](chi));
        const double y = std::sqrt(1.0 + sum2) * z;
        // ring holds the last M values of y
        const std::size_t slot = static_cast<std::size_t>(t % M);
        ring[slot] = y;
        sum2 = 0.0;
        for (double v : ring) sum2 += v * v;
        x[static_cast<std::size_t>(t)] = a_coefficient(i, D) * y;
    }
}

constexpr int kReweightRounds = 10;

double sample_mean(std::span<const double> x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

}  // namespace

double MomentTable::hurst(std::size_t qi) const {
    const std::size_t nt = spec.tau_set.size();
    if (nt < 2) throw DomainError("hurst: need at least two time scales");
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t ti = 0; ti < nt; ++ti) {
        const double lx = std::log(static_cast<double>(spec.tau_set[ti]));
        const double ly = std::log(abs_moment(qi, ti));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double n = static_cast<double>(nt);
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return slope / spec.q_set[qi];
}

std::vector<double> MomentTable::features() const {
    std::vector<double> f;
    for (std::size_t qi = 0; qi < spec.q_set.size(); ++qi) {
        const double norm = std::pow(second_moment, 0.5 * spec.q_set[qi]);
        for (std::size_t ti = 0; ti < spec.tau_set.size(); ++ti) f.push_back(abs_moment(qi, ti) / norm);
    }
    for (int lag : spec.acf_lags) f.push_back(abs_acf[static_cast<std::size_t>(lag - 1)]);
    return f;
}

std::vector<std::string> MomentTable::feature_names() const {
    std::vector<std::string> names;
    for (double q : spec.q_set) {
        for (int tau : spec.tau_set) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "absmom_q%g_tau%d", q, tau);
            names.emplace_back(buf);
        }
    }
    for (int lag : spec.acf_lags) names.push_back("absacf_lag" + std::to_string(lag));
    return names;
}

MomentTable empirical_moments(std::span<const double> returns, const MomentSpec& spec) {
    if (spec.q_set.empty() || spec.tau_set.empty()) throw DomainError("empirical_moments: empty q or tau set");
    for (int tau : spec.tau_set) {
        if (tau < 1) throw DomainError("empirical_moments: tau must be >= 1");
    }
    for (int lag : spec.acf_lags) {
        if (lag < 1 || lag > spec.acf_max_lag) throw DomainError("empirical_moments: acf lag out of range");
    }
    const int max_tau = *std::max_element(spec.tau_set.begin(), spec.tau_set.end());
    const std::size_t n = returns.size();
    if (n < static_cast<std::size_t>(5 * max_tau) || n < static_cast<std::size_t>(spec.acf_max_lag) + 2) {
        throw DomainError("empirical_moments: insufficient data (" + std::to_string(n) + " returns)");
    }
    MomentTable t;
    t.spec = spec;
    t.n = n;
    t.mean = sample_mean(returns);
    std::vector<double> d(n);
    for (std::size_t k = 0; k < n; ++k) d[k] = returns[k] - t.mean;
    std::vector<double> cum(n + 1, 0.0);
    for (std::size_t k = 0; k < n; ++k) cum[k + 1] = cum[k] + d[k];
    double s2 = 0.0;
    for (double v : d) s2 += v * v;
    t.second_moment = s2 / static_cast<double>(n);
    if (!(t.second_moment > 0.0) ||
        std::all_of(returns.begin(), returns.end(), [&](double v) { return v == returns.front(); })) {
        throw DomainError("empirical_moments: zero-variance series");
    }

    for (double q : spec.q_set) {
        for (int tau : spec.tau_set) {
            const std::size_t windows = n - static_cast<std::size_t>(tau) + 1;
            double acc = 0.0;
            for (std::size_t s = 0; s < windows; ++s) acc += std::pow(std::abs(cum[s + tau] - cum[s]), q);
            t.abs_moments.push_back(acc / static_cast<double>(windows));
        }
    }
    std::vector<double> a(n);
    for (std::size_t k = 0; k < n; ++k) a[k] = std::abs(d[k]);
    const double am = sample_mean(a);
    double var = 0.0;
    for (double& v : a) {
        v -= am;
        var += v * v;
    }
    for (int lag = 1; lag <= spec.acf_max_lag; ++lag) {
        double c = 0.0;
        for (std::size_t k = 0; k + lag < n; ++k) c += a[k] * a[k + lag];
        t.abs_acf.push_back(var > 0.0 ? c / var : 0.0);
    }
    return t;
}

std::vector<double> GridAxis::points() const {
    if (!(step > 0.0)) throw DomainError("grid: step must be > 0");
    if (hi < lo) throw DomainError("grid: hi < lo");
    std::vector<double> out;
    const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9)) + 1;
    for (long k = 0; k < count; ++k) out.push_back(lo + static_cast<double>(k) * step);
    return out;
}

void CalibrationGrid::validate() const {
    for (const auto* axis : {&D, &nu, &alpha}) {
        if (axis->points().empty()) throw DomainError("calibration grid: empty axis");
    }
    if (!(D.lo > 0.0)) throw DomainError("calibration grid: D must be > 0");
    if (!(nu.lo > 0.0 && nu.hi <= 1.0)) throw DomainError("calibration grid: nu must lie in (0, 1]");
    if (!(alpha.lo > 0.0)) throw DomainError("calibration grid: alpha must be > 0");
}

CalibrationResult calibrate_shape(const ReturnSeries& series, const CalibrationGrid& grid,
                                  const ShapeOptions& opts, std::uint64_t seed) {
    grid.validate();
    if (opts.M < 1) throw DomainError("calibrate_shape: M must be >= 1");
    if (opts.mc_budget < 1) throw DomainError("calibrate_shape: mc_budget must be >= 1");
    if (opts.bootstrap_resamples < 2 || opts.bootstrap_block < 1) {
        throw DomainError("calibrate_shape: bad bootstrap settings");
    }
    // moment ratios enter in logs: their single-window law is strongly right-skewed
    const std::size_t n_ratio = opts.moments.q_set.size() * opts.moments.tau_set.size();
    auto fit_features = [&](const MomentTable& t) {
        auto f = t.features();
        for (std::size_t k = 0; k < n_ratio; ++k) f[k] = std::log(f[k]);
        return f;
    };
    const auto data = empirical_moments(series, opts.moments);
    const auto target = fit_features(data);
    const std::size_t nf = target.size();
    const std::size_t n = series.size();
    const int length = opts.path_length > 0 ? opts.path_length : static_cast<int>(n);

    // moving-block bootstrap variances of the data features
    std::vector<double> mean_f(nf, 0.0), sq_f(nf, 0.0);
    {
        Rng rng = make_rng(seed, {1});
        const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(opts.bootstrap_block), n);
        std::uniform_int_distribution<std::size_t> start(0, n - b);
        std::vector<double> resampled(n);
        for (int r = 0; r < opts.bootstrap_resamples; ++r) {
            for (std::size_t k = 0; k < n;) {
                const std::size_t s = start(rng);
                for (std::size_t j = 0; j < b && k < n; ++j, ++k) resampled[k] = series.returns[s + j];
            }
            const auto f = fit_features(empirical_moments(resampled, opts.moments));
            for (std::size_t k = 0; k < nf; ++k) {
                mean_f[k] += f[k];
                sq_f[k] += f[k] * f[k];
            }
        }
    }
    Eigen::MatrixXd weight = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nf), static_cast<Eigen::Index>(nf));
    const double R = opts.bootstrap_resamples;
    for (std::size_t k = 0; k < nf; ++k) {
        const double m = mean_f[k] / R;
        const double var = std::max((sq_f[k] / R - m * m) * R / (R - 1.0), 0.0);
        weight(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) = var > 0.0 ? 1.0 / var : 0.0;
    }

    struct Cell {
        double D, nu, alpha;
    };
    std::vector<Cell> cells;
    for (double d : grid.D.points()) {
        for (double v : grid.nu.points()) {
            for (double a : grid.alpha.points()) cells.push_back({d, v, a});
        }
    }
    const double B = opts.mc_budget;
    std::vector<Eigen::VectorXd> model_features(cells.size());
    std::vector<Eigen::MatrixXd> model_covariance(cells.size());
    parallel_for(cells.size(), opts.threads, [&](std::size_t c) {
        // per-path features averaged, so that the model side estimates the same
        // single-window statistic as the data
        const auto k = static_cast<Eigen::Index>(nf);
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(k);
        Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(k, k);
        std::vector<double> x;
        for (int path = 0; path < opts.mc_budget; ++path) {
            simulate_unit_path(cells[c].D, cells[c].nu, cells[c].alpha, opts.M, length,
                               derive_seed(seed, {2, static_cast<std::uint64_t>(path)}), x);
            const auto f = fit_features(empirical_moments(x, opts.moments));
            const Eigen::Map<const Eigen::VectorXd> v(f.data(), k);
            sum += v;
            cross.noalias() += v * v.transpose();
        }
        model_features[c] = sum / B;
        model_covariance[c] = B > 1.0 ? Eigen::MatrixXd((cross - sum * sum.transpose() / B) / (B - 1.0))
                                      : Eigen::MatrixXd::Zero(k, k);
    });

    // Inverse of the simulated single-window covariance of the features at one cell,
    // restricted to features that vary; null when it is not usable.
    auto efficient_weight = [&](std::size_t c) -> std::optional<Eigen::MatrixXd> {
        std::vector<Eigen::Index> live;
        for (std::size_t k = 0; k < nf; ++k) {
            const auto i = static_cast<Eigen::Index>(k);
            const double scale = 1.0 + model_features[c](i) * model_features[c](i);
            if (model_covariance[c](i, i) > 1e-14 * scale) live.push_back(i);
        }
        if (live.empty() || B < 2.0 * static_cast<double>(live.size())) return std::nullopt;
        const auto L = static_cast<Eigen::Index>(live.size());
        Eigen::MatrixXd sub(L, L);
        for (Eigen::Index a = 0; a < L; ++a) {
            for (Eigen::Index b = 0; b < L; ++b) sub(a, b) = model_covariance[c](live[a], live[b]);
        }
        const Eigen::LLT<Eigen::MatrixXd> llt(sub);
        if (llt.info() != Eigen::Success) return std::nullopt;
        const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(L, L));
        Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nf), static_cast<Eigen::Index>(nf));
        for (Eigen::Index a = 0; a < L; ++a) {
            for (Eigen::Index b = 0; b < L; ++b) w(live[a], live[b]) = inv(a, b);
        }
        // the simulated mean carries 1/B of the single-window variance on top of the data's
        return w * (B / (B + 1.0));
    };

    const Eigen::Map<const Eigen::VectorXd> target_v(target.data(), static_cast<Eigen::Index>(nf));
    std::vector<double> objective(cells.size());
    auto evaluate = [&] {
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const Eigen::VectorXd diff = model_features[c] - target_v;
            const double obj = diff.dot(weight * diff);
            objective[c] = std::isfinite(obj) ? obj : std::numeric_limits<double>::infinity();
        }
        return static_cast<std::size_t>(std::min_element(objective.begin(), objective.end()) - objective.begin());
    };
    // A bootstrap of one heavy-tailed window understates the sampling spread of the
    // features; the weighting matrix is re-estimated from simulated windows at the current
    // minimiser until the minimiser is stable.
    std::size_t best = evaluate();
    for (int round = 0; round < kReweightRounds; ++round) {
        if (!std::isfinite(objective[best])) break;
        const auto w = efficient_weight(best);
        if (!w) break;
        weight = *w;
        const std::size_t next = evaluate();
        if (next == best) break;
        best = next;
    }
    if (!std::isfinite(objective[best])) throw NumericError("calibrate_shape: objective not finite on any cell");
    CalibrationResult res;
    res.params.D = cells[best].D;
    res.params.nu = cells[best].nu;
    res.params.alpha = cells[best].alpha;
    res.params.M = opts.M;
    res.objective = objective[best];
    res.window_length = n;
    if (series.dated()) {
        res.window_start = format_date(series.dates.front());
        res.window_end = format_date(series.dates.back());
    }
    const auto names = data.feature_names();
    for (std::size_t k = 0; k < nf; ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        res.diagnostics.push_back({names[k], target[k], model_features[best](i), weight(i, i)});
    }
    double lo = objective[best];
    double hi = objective[best];
    for (std::size_t c = 0; c < cells.size(); ++c) {
        res.surface.push_back({cells[c].D, cells[c].nu, cells[c].alpha, objective[c]});
        if (cells[c].D == cells[best].D && cells[c].alpha == cells[best].alpha) {
            lo = std::min(lo, objective[c]);
            hi = std::max(hi, objective[c]);
        }
    }
    res.nu_profile_spread = hi - lo;
    res.nu_identified = res.nu_profile_spread >= 1.0;
    return res;
}

double simulated_unit_second_moment(const ModelParams& p, int n_paths, int burn_in, int length,
                                    std::uint64_t seed) {
    p.validate();
    if (!(p.alpha > 2.0)) throw DomainError("second moment is infinite for alpha <= 2");
    if (n_paths < 1 || burn_in < 0 || length < 1) throw DomainError("simulated second moment: bad sizes");
    double total = 0.0;
    std::vector<double> x;
    for (int path = 0; path < n_paths; ++path) {
        simulate_unit_path(p.D, p.nu, p.alpha, p.M, burn_in + length,
                           derive_seed(seed, {static_cast<std::uint64_t>(path)}), x);
        double s = 0.0;
        for (int t = burn_in; t < burn_in + length; ++t) s += x[t] * x[t];
        total += s / length;
    }
    return total / n_paths;
}

ScaleEstimate calibrate_scale(const ReturnSeries& series, const ModelParams& shape_params,
                              const ScaleOptions& opts, std::uint64_t seed) {
    const std::size_t n = series.size();
    if (n < 2) throw DomainError("calibrate_scale: need at least two returns");
    const double mu = sample_mean(series.returns);
    double ss = 0.0;
    for (double v : series.returns) ss += (v - mu) * (v - mu);
    if (!(ss > 0.0) || std::all_of(series.returns.begin(), series.returns.end(),
                                   [&](double v) { return v == series.returns.front(); })) {
        throw DomainError("calibrate_scale: zero-variance window");
    }
    const double sigma_bs = std::sqrt(ss / static_cast<double>(n - 1));
    const double target = ss / static_cast<double>(n);
    const int length = opts.path_length > 0 ? opts.path_length : static_cast<int>(n);
    ModelParams p = shape_params;
    p.beta = 1.0;
    const double unit = simulated_unit_second_moment(p, opts.n_paths, opts.burn_in, length, seed);
    // The simulated moment is beta^2 * unit exactly (Y is linear in beta under fixed draws),
    // so bisection on beta converges to this root.
    const double root = std::sqrt(target / unit);
    double lo = 0.0;
    double hi = 2.0 * root + 1e-300;
    while ((hi - lo) > 1e-6 * root) {
        const double mid = 0.5 * (lo + hi);
        (mid * mid * unit < target ? lo : hi) = mid;
    }
    return {0.5 * (lo + hi), sigma_bs, mu};
}

void write_calibration(const std::string& path, const CalibrationResult& r,
                       const std::string& header_comment) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write file: " + path);
    out.precision(17);
    if (!header_comment.empty()) out << "# " << header_comment << '\n';
    out << "D=" << r.params.D << '\n'
        << "nu=" << r.params.nu << '\n'
        << "alpha=" << r.params.alpha << '\n'
        << "beta=" << r.params.beta << '\n'
        << "M=" << r.params.M << '\n'
        << "mu=" << r.params.mu << '\n'
        << "r=" << r.params.r << '\n'
        << "sigma_bs=" << r.sigma_bs << '\n'
        << "objective=" << r.objective << '\n'
        << "window_start=" << r.window_start << '\n'
        << "window_end=" << r.window_end << '\n'
        << "window_length=" << r.window_length << '\n'
        << "nu_profile_spread=" << r.nu_profile_spread << '\n'
        << "nu_identified=" << (r.nu_identified ? 1 : 0) << '\n';
    // nu as printed with one significant digit, next to the raw grid value
    char rounded[32];
    std::snprintf(rounded, sizeof rounded, "%.1g", r.params.nu);
    out << "nu_rounded=" << rounded << '\n';
    for (const auto& d : r.diagnostics) {
        out << "moment." << d.name << '=' << d.data << ',' << d.model << ',' << d.weight << '\n';
    }
}

CalibrationResult read_calibration(const std::string& path) {
    const auto t = kv::read(path);
    CalibrationResult r;
    auto num = [&](const char* key) { return kv::to_double(key, kv::require(t, key)); };
    r.params.D = num("D");
    r.params.nu = num("nu");
    r.params.alpha = num("alpha");
    r.params.beta = num("beta");
    r.params.M = static_cast<int>(kv::to_long("M", kv::require(t, "M")));
    r.params.mu = num("mu");
    r.params.r = num("r");
    r.sigma_bs = num("sigma_bs");
    if (t.count("objective")) r.objective = kv::to_double("objective", t.at("objective"));
    if (t.count("window_start")) r.window_start = t.at("window_start");
    if (t.count("window_end")) r.window_end = t.at("window_end");
    if (t.count("nu_profile_spread")) r.nu_profile_spread = kv::to_double("nu_profile_spread", t.at("nu_profile_spread"));
    if (t.count("nu_identified")) r.nu_identified = kv::to_long("nu_identified", t.at("nu_identified")) != 0;
    r.params.validate();
    return r;
}

}  // namespace swarch
