#include "swarch/cli.hpp"

#include "csv.hpp"
#include "kv.hpp"
#include "swarch/black_scholes.hpp"
#include "swarch/calibration.hpp"
#include "swarch/config.hpp"
#include "swarch/errors.hpp"
#include "swarch/market_data.hpp"
#include "swarch/pricing.hpp"
#include "swarch/restart_inference.hpp"
#include "swarch/volatility_mixture.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>

namespace swarch::cli {

namespace {

constexpr double kTradingDays = 252.0;

struct Common {
    std::string config_path;
    std::string calibration_path;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    int threads = 0;

    void add_to(CLI::App* app) {
        app->add_option("--config", config_path, "key=value run configuration file")->check(CLI::ExistingFile);
        app->add_option("--calibration", calibration_path, "calibration result file (model parameters)")
            ->check(CLI::ExistingFile);
        app->add_option("--set", sets, "override a configuration key: --set key=value");
        app->add_option("--seed", seed, "master random seed");
        app->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    }

    RunConfig resolve(bool need_seed) const {
        RunConfig cfg;
        if (!config_path.empty()) cfg = load_run_config(config_path);
        if (!calibration_path.empty()) {
            const auto cal = read_calibration(calibration_path);
            cfg.params.D = cal.params.D;
            cfg.params.nu = cal.params.nu;
            cfg.params.alpha = cal.params.alpha;
            cfg.params.beta = cal.params.beta;
            cfg.params.M = cal.params.M;
            cfg.params.mu = cal.params.mu;
            cfg.params.r = cal.params.r;
            if (cal.sigma_bs > 0.0) cfg.sigma_bs = cal.sigma_bs;
        }
        std::map<std::string, std::string> overrides;
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw DomainError("--set expects key=value, got '" + s + "'");
            overrides[std::string(kv::trim(s.substr(0, eq)))] = std::string(kv::trim(s.substr(eq + 1)));
        }
        cfg.apply(overrides);
        if (seed) cfg.seed = seed;
        if (threads > 0) cfg.threads = threads;
        cfg.pricing.threads = cfg.threads;
        cfg.params.validate();
        if (need_seed && !cfg.seed) throw DomainError("a seed is required (--seed or seed= in the config)");
        return cfg;
    }
};

std::string header(const RunConfig& cfg, const std::string& command) {
    std::string h = "config_hash=" + cfg.hash();
    if (cfg.seed) h += " seed=" + std::to_string(*cfg.seed);
    return h + " command=" + command;
}

long day_number(const Date& d) { return to_days(d).time_since_epoch().count(); }

// Number of returns dated on or before `d`.
long returns_up_to(const ReturnSeries& s, const Date& d) {
    return static_cast<long>(std::upper_bound(s.dates.begin(), s.dates.end(), d) - s.dates.begin());
}

double sample_sd_before(const ReturnSeries& s, long count, long window) {
    const long first = std::max(0L, count - window);
    if (count - first < 2) throw DataError("not enough returns to estimate sigma_bs");
    const auto b = s.returns.begin() + first;
    const auto e = s.returns.begin() + count;
    const double n = static_cast<double>(count - first);
    const double m = std::accumulate(b, e, 0.0) / n;
    double ss = 0.0;
    for (auto it = b; it != e; ++it) ss += (*it - m) * (*it - m);
    return std::sqrt(ss / (n - 1.0));
}

struct Market {
    ReturnSeries returns;
    TradingCalendar calendar;
    std::optional<RateCurve> rates;

    long dtm(const Date& quote, const Date& expiry) const {
        if (!calendar.empty()) return calendar.open_days_between(quote, expiry);
        return TradingCalendar::weekdays(quote, expiry).open_days_between(quote, expiry);
    }
};

Market load_market(const std::string& returns_path, const std::string& calendar_path,
                   const std::string& rates_path) {
    Market m;
    m.returns = read_return_series(returns_path);
    if (!m.returns.dated()) throw DataError(returns_path + ": return series has no dates");
    if (!calendar_path.empty()) m.calendar = TradingCalendar::load(calendar_path);
    if (!rates_path.empty()) m.rates = RateCurve::load(rates_path);
    return m;
}

struct GroupPrice {
    std::vector<PriceResult> model;
    std::vector<double> bs;
    ContractSpec contract;
    double r_step = 0.0;
    double sigma_bs = 0.0;
};

// Prices calls sharing (quote date, expiry): t0 - 1 is the quote date.
GroupPrice price_group(const Date& quote, const Date& expiry, double S_prev, std::span<const double> strikes,
                       const Market& market, const RunConfig& cfg) {
    const long count = returns_up_to(market.returns, quote);
    const long dtm = market.dtm(quote, expiry);
    if (dtm < 1) throw DataError("no open-market day between " + format_date(quote) + " and " + format_date(expiry));
    GroupPrice g;
    g.contract = ContractSpec{strikes.front(), count + 1, count + dtm, S_prev};
    ModelParams p = cfg.params;
    if (market.rates) p.r = per_step_rate(select_rate(quote, dtm, *market.rates));
    g.r_step = p.r;
    g.sigma_bs = cfg.sigma_bs ? *cfg.sigma_bs : sample_sd_before(market.returns, count, 252);
    const auto seed = derive_seed(*cfg.seed, {static_cast<std::uint64_t>(day_number(quote)),
                                              static_cast<std::uint64_t>(day_number(expiry))});
    g.model = price_strikes(g.contract, strikes, market.returns, p, cfg.pricing, seed);
    for (double K : strikes) {
        ContractSpec c = g.contract;
        c.K = K;
        g.bs.push_back(bs_price(c, g.sigma_bs, p.r));
    }
    return g;
}

double annualised_iv(const ContractSpec& c, double price, double r) {
    try {
        return bs_implied_vol(c, price, r) * std::sqrt(kTradingDays);
    } catch (const NumericError&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

std::string fmt_or_empty(double v) { return std::isfinite(v) ? csv::fmt(v) : std::string(); }

std::ofstream open_in_dir(const std::string& dir, const std::string& name) {
    std::filesystem::create_directories(dir);
    return csv::open_out((std::filesystem::path(dir) / name).string());
}

std::vector<double> parse_range(const std::string& text, const char* what) {
    double lo = 0.0, hi = 0.0, step = 0.0;
    char extra = 0;
    if (std::sscanf(text.c_str(), "%lf:%lf:%lf%c", &lo, &hi, &step, &extra) != 3) {
        throw DomainError(std::string(what) + ": expected lo:hi:step, got '" + text + "'");
    }
    return GridAxis{lo, hi, step}.points();
}

GridAxis parse_axis(const std::string& text, const char* what) {
    double lo = 0.0, hi = 0.0, step = 0.0;
    char extra = 0;
    if (std::sscanf(text.c_str(), "%lf:%lf:%lf%c", &lo, &hi, &step, &extra) != 3) {
        throw DomainError(std::string(what) + ": expected lo:hi:step, got '" + text + "'");
    }
    GridAxis axis{lo, hi, step};
    axis.points();
    return axis;
}

// ---- subcommands ----

struct SimulateCmd {
    Common common;
    int days = 0;
    std::string out = "-";
    std::string format = "path";
    std::string start_date = "2000-01-03";

    void add(CLI::App& app) {
        auto* sub = app.add_subcommand("simulate", "simulate a return path of the model");
        common.add_to(sub);
        sub->add_option("--days", days, "number of steps")->required()->check(CLI::PositiveNumber);
        sub->add_option("--out", out, "output file ('-' for standard output)");
        sub->add_option("--format", format, "path: t,i_state,a_coeff,y,x; returns: date,log_return")
            ->check(CLI::IsMember({"path", "returns"}));
        sub->add_option("--start-date", start_date, "first date of the returns format (weekdays)");
    }

    int run(std::ostream& stdout_) const {
        const auto cfg = common.resolve(true);
        const auto sim = simulate_x(cfg.params, days, *cfg.seed);
        const auto h = header(cfg, "simulate");
        auto emit = [&](std::ostream& o) {
            if (format == "path") {
                write_simulation_csv(o, sim, h);
            } else {
                ReturnSeries s;
                s.returns = sim.x;
                Date d = parse_date(start_date);
                while (s.dates.size() < sim.x.size()) {
                    if (is_weekday(d)) s.dates.push_back(d);
                    d = Date{to_days(d) + std::chrono::days{1}};
                }
                write_return_series(o, s, h);
            }
        };
        if (out == "-") {
            emit(stdout_);
        } else {
            auto f = csv::open_out(out);
            emit(f);
        }
        return ok;
    }
};

struct CalibrateCmd {
    Common common;
    std::string returns_path;
    std::string end_date;
    int shape_days = 1260;
    int scale_days = 252;
    std::string grid_D = "0.1:0.35:0.005";
    std::string grid_nu = "0.0001:0.001:0.0001";
    std::string grid_alpha = "3:10:0.5";
    int M = 21;
    int mc_budget = 200;
    int scale_paths = 400;
    std::string out;
    std::string surface_out;

    void add(CLI::App& app) {
        auto* sub = app.add_subcommand("calibrate", "estimate (D, nu, alpha) and (beta, sigma_bs, mu)");
        common.add_to(sub);
        sub->add_option("--returns", returns_path, "return series CSV")->required()->check(CLI::ExistingFile);
        sub->add_option("--end-date", end_date, "last date of both windows (default: last return)");
        sub->add_option("--shape-days", shape_days, "length of the (D, nu, alpha) window");
        sub->add_option("--scale-days", scale_days, "length of the (beta, sigma_bs, mu) window");
        sub->add_option("--grid-D", grid_D, "lo:hi:step");
        sub->add_option("--grid-nu", grid_nu, "lo:hi:step");
        sub->add_option("--grid-alpha", grid_alpha, "lo:hi:step");
        sub->add_option("--M", M, "memory range")->check(CLI::PositiveNumber);
        sub->add_option("--mc-budget", mc_budget, "simulated paths per grid cell")->check(CLI::PositiveNumber);
        sub->add_option("--scale-paths", scale_paths, "simulated paths for the beta moment")->check(CLI::PositiveNumber);
        sub->add_option("--out", out, "calibration result file")->required();
        sub->add_option("--surface-out", surface_out, "objective surface CSV");
    }

    int run(std::ostream& err) const {
        auto cfg = common.resolve(true);
        const auto series = read_return_series(returns_path);
        const Date end = end_date.empty() ? series.dates.back() : parse_date(end_date);
        const auto shape_window = series.window_ending(end, static_cast<std::size_t>(shape_days));
        const auto scale_window = series.window_ending(end, static_cast<std::size_t>(scale_days));
        CalibrationGrid grid{parse_axis(grid_D, "--grid-D"), parse_axis(grid_nu, "--grid-nu"),
                             parse_axis(grid_alpha, "--grid-alpha")};
        ShapeOptions so;
        so.M = M;
        so.mc_budget = mc_budget;
        so.threads = cfg.threads;
        auto result = calibrate_shape(shape_window, grid, so, derive_seed(*cfg.seed, {0}));
        ScaleOptions sc;
        sc.n_paths = scale_paths;
        const auto scale = calibrate_scale(scale_window, result.params, sc, derive_seed(*cfg.seed, {1}));
        result.params.beta = scale.beta;
        result.params.mu = scale.mu;
        result.params.r = cfg.params.r;
        result.sigma_bs = scale.sigma_bs;
        write_calibration(out, result, header(cfg, "calibrate"));
        if (!result.nu_identified) {
            err << "warning: objective is flat in nu at the fitted (D, alpha) (spread " << result.nu_profile_spread
                << "); nu is not identified by the data\n";
        }
        if (!surface_out.empty()) {
            auto f = csv::open_out(surface_out);
            csv::write_comment(f, header(cfg, "calibrate"));
            f << "D,nu,alpha,objective\n";
            for (const auto& c : result.surface) {
                f << csv::fmt(c[0]) << ',' << csv::fmt(c[1]) << ',' << csv::fmt(c[2]) << ',' << csv::fmt(c[3]) << '\n';
            }
        }
        return ok;
    }
};

struct InferCmd {
    Common common;
    std::string returns_path;
    std::string date;
    long t0 = 0;
    std::string out;

    void add(CLI::App& app) {
        auto* sub = app.add_subcommand("infer-restarts", "sample past restart strings before a pricing step");
        common.add_to(sub);
        sub->add_option("--returns", returns_path, "return series CSV")->required()->check(CLI::ExistingFile);
        auto* d = sub->add_option("--date", date, "last observed date (t0 - 1)");
        auto* t = sub->add_option("--t0", t0, "pricing step, 1-based");
        d->excludes(t);
        sub->add_option("--out", out, "restart samples CSV")->required();
    }

    int run() const {
        const auto cfg = common.resolve(true);
        const auto series = read_return_series(returns_path);
        long step = t0;
        if (!date.empty()) step = returns_up_to(series, parse_date(date)) + 1;
        if (step <= 0) step = static_cast<long>(series.size()) + 1;
        const auto samples = sample_past_restarts(series, step, cfg.params, cfg.pricing.inference, *cfg.seed);
        write_restart_samples_csv(out, samples, header(cfg, "infer-restarts"));
        return ok;
    }
};

struct PriceCmd {
    Common common;
    std::string contracts_path;
    std::string returns_path;
    std::string rates_path;
    std::string calendar_path;
    std::string market_path;
    std::string out;

    void add(CLI::App& app) {
        auto* sub = app.add_subcommand("price", "price call contracts with the model and Black-Scholes");
        common.add_to(sub);
        sub->add_option("--contracts", contracts_path, "CSV quote_date,expiry,strike,S_prev")
            ->required()->check(CLI::ExistingFile);
        sub->add_option("--returns", returns_path, "return series CSV")->required()->check(CLI::ExistingFile);
        sub->add_option("--rates", rates_path, "rates CSV (otherwise r from the configuration)")
            ->check(CLI::ExistingFile);
        sub->add_option("--calendar", calendar_path, "trading calendar (default: weekdays)")
            ->check(CLI::ExistingFile);
        sub->add_option("--market", market_path, "option chain with market prices for implied_vol_market")
            ->check(CLI::ExistingFile);
        sub->add_option("--out", out, "output CSV")->required();
    }

    int run(std::ostream& err) const {
        const auto cfg = common.resolve(true);
        const auto market = load_market(returns_path, calendar_path, rates_path);
        struct Row {
            Date quote, expiry;
            double strike, S_prev;
        };
        std::vector<Row> rows;
        {
            csv::Reader reader(contracts_path, "quote_date,expiry,strike,S_prev");
            std::vector<std::string> f;
            while (reader.next(f)) {
                rows.push_back({parse_date(f[0]), parse_date(f[1]), reader.number(f[2]), reader.number(f[3])});
            }
        }
        std::map<std::tuple<long, long, double>, double> market_prices;
        if (!market_path.empty()) {
            for (const auto& q : read_option_chain(market_path)) {
                if (q.type == OptionType::call) {
                    market_prices[{day_number(q.quote_date), day_number(q.expiry), q.strike}] = q.price;
                }
            }
        }
        std::map<std::tuple<long, long, double>, std::vector<std::size_t>> groups;
        for (std::size_t k = 0; k < rows.size(); ++k) {
            groups[{day_number(rows[k].quote), day_number(rows[k].expiry), rows[k].S_prev}].push_back(k);
        }
        std::vector<std::array<double, 5>> values(rows.size());
        std::vector<ContractSpec> specs(rows.size());
        for (const auto& [key, idx] : groups) {
            std::vector<double> strikes;
            for (auto k : idx) strikes.push_back(rows[k].strike);
            const auto& r0 = rows[idx.front()];
            const auto g = price_group(r0.quote, r0.expiry, r0.S_prev, strikes, market, cfg);
            for (std::size_t j = 0; j < idx.size(); ++j) {
                ContractSpec c = g.contract;
                c.K = strikes[j];
                const auto it = market_prices.find({day_number(r0.quote), day_number(r0.expiry), strikes[j]});
                const double mkt = it == market_prices.end() ? std::numeric_limits<double>::quiet_NaN()
                                                             : annualised_iv(c, it->second, g.r_step);
                values[idx[j]] = {g.model[j].price, g.model[j].delta, g.bs[j],
                                  annualised_iv(c, g.model[j].price, g.r_step), mkt};
            }
        }
        auto f = csv::open_out(out);
        csv::write_comment(f, header(cfg, "price"));
        f << "strike,expiry,model_price,delta,bs_price,implied_vol_model,implied_vol_market\n";
        for (std::size_t k = 0; k < rows.size(); ++k) {
            const auto& v = values[k];
            f << csv::fmt(rows[k].strike) << ',' << format_date(rows[k].expiry) << ',' << csv::fmt(v[0]) << ','
              << csv::fmt(v[1]) << ',' << csv::fmt(v[2]) << ',' << fmt_or_empty(v[3]) << ',' << fmt_or_empty(v[4])
              << '\n';
        }
        if (!market_path.empty()) {
            for (std::size_t k = 0; k < rows.size(); ++k) {
                if (!std::isfinite(values[k][4])) {
                    err << "warning: no market price for strike " << rows[k].strike << " expiry "
                        << format_date(rows[k].expiry) << '\n';
                }
            }
        }
        return ok;
    }
};

struct EvaluateCmd {
    Common common;
    std::string chain_path;
    std::string returns_path;
    std::string rates_path;
    std::string calendar_path;
    std::string out_dir;
    std::string smile_date;
    std::string smile_expiry;

    void add(CLI::App& app) {
        auto* sub = app.add_subcommand("evaluate", "filter an option chain and compare model and Black-Scholes prices");
        common.add_to(sub);
        sub->add_option("--chain", chain_path, "option chain CSV")->required()->check(CLI::ExistingFile);
        sub->add_option("--returns", returns_path, "return series CSV")->required()->check(CLI::ExistingFile);
        sub->add_option("--rates", rates_path, "rates CSV")->required()->check(CLI::ExistingFile);
        sub->add_option("--calendar", calendar_path, "trading calendar (default: weekdays)")
            ->check(CLI::ExistingFile);
        sub->add_option("--out-dir", out_dir, "output directory")->required();
        sub->add_option("--smile-date", smile_date, "quote date of the smile output");
        sub->add_option("--smile-expiry", smile_expiry, "expiry of the smile output");
    }

    int run(std::ostream& err) const {
        const auto cfg = common.resolve(true);
        const auto market = load_market(returns_path, calendar_path, rates_path);
        const auto raw = read_option_chain(chain_path);
        std::vector<std::string> warnings;
        MarketContext ctx{market.calendar, *market.rates,
                          adjust_chain(raw, market.calendar, *market.rates, &warnings), 0.125};
        for (const auto& w : warnings) err << "warning: " << w << '\n';
        const auto filtered = filter_chain(raw, ctx);
        const auto h = header(cfg, "evaluate");

        std::map<std::pair<long, long>, std::vector<OptionQuote>> groups;
        for (const auto& q : filtered.kept) {
            if (q.type == OptionType::call) groups[{day_number(q.quote_date), day_number(q.expiry)}].push_back(q);
        }
        std::vector<EvaluationRecord> records;
        struct SmilePoint {
            double strike, iv_model, iv_market;
        };
        std::map<std::pair<long, long>, std::vector<SmilePoint>> smiles;
        for (const auto& [key, quotes] : groups) {
            std::vector<double> strikes;
            for (const auto& q : quotes) strikes.push_back(q.strike);
            const double S = ctx.index_for(quotes.front());
            const auto g = price_group(quotes.front().quote_date, quotes.front().expiry, S, strikes, market, cfg);
            for (std::size_t j = 0; j < quotes.size(); ++j) {
                ContractSpec c = g.contract;
                c.K = strikes[j];
                EvaluationRecord rec;
                rec.quote = quotes[j];
                rec.dtm = g.contract.steps();
                rec.market = quotes[j].price;
                rec.model = g.model[j].price;
                rec.bs = g.bs[j];
                rec.bs_implied_vol = annualised_iv(c, rec.market, g.r_step);
                records.push_back(rec);
                smiles[key].push_back({strikes[j], annualised_iv(c, rec.model, g.r_step), rec.bs_implied_vol});
            }
        }
        const auto report = bucket_and_report(records);
        {
            std::filesystem::create_directories(out_dir);
            write_report_csv((std::filesystem::path(out_dir) / "report.csv").string(), report, h);
            write_rejections_csv((std::filesystem::path(out_dir) / "rejections.csv").string(), filtered.rejected, h);
        }
        {
            auto f = open_in_dir(out_dir, "prices.csv");
            csv::write_comment(f, h);
            f << "quote_date,expiry,strike,dtm,moneyness,market_price,model_price,bs_price,implied_vol_market\n";
            for (const auto& r : records) {
                f << format_date(r.quote.quote_date) << ',' << format_date(r.quote.expiry) << ','
                  << csv::fmt(r.quote.strike) << ',' << r.dtm << ',' << csv::fmt(r.quote.moneyness()) << ','
                  << csv::fmt(r.market) << ',' << csv::fmt(r.model) << ',' << csv::fmt(r.bs) << ','
                  << fmt_or_empty(r.bs_implied_vol) << '\n';
            }
        }
        {
            std::map<long, std::array<double, 3>> by_dtm;
            for (const auto& r : records) {
                auto& a = by_dtm[r.dtm];
                a[0] += 1.0;
                a[1] += (r.model - r.market) * (r.model - r.market);
                a[2] += (r.bs - r.market) * (r.bs - r.market);
            }
            auto f = open_in_dir(out_dir, "mse_by_maturity.csv");
            csv::write_comment(f, h);
            f << "dtm,count,mse_model,mse_bs\n";
            for (const auto& [d, a] : by_dtm) {
                f << d << ',' << a[0] << ',' << csv::fmt(a[1] / a[0]) << ',' << csv::fmt(a[2] / a[0]) << '\n';
            }
        }
        {
            std::pair<long, long> key{0, 0};
            if (!smile_date.empty() && !smile_expiry.empty()) {
                key = {day_number(parse_date(smile_date)), day_number(parse_date(smile_expiry))};
            } else {
                std::size_t most = 0;
                for (const auto& [k, v] : smiles) {
                    if (v.size() > most) {
                        most = v.size();
                        key = k;
                    }
                }
            }
            auto f = open_in_dir(out_dir, "smile.csv");
            csv::write_comment(f, h);
            f << "strike,implied_vol_model,implied_vol_market\n";
            if (const auto it = smiles.find(key); it != smiles.end()) {
                for (const auto& s : it->second) {
                    f << csv::fmt(s.strike) << ',' << fmt_or_empty(s.iv_model) << ',' << fmt_or_empty(s.iv_market)
                      << '\n';
                }
            }
        }
        err << "evaluated " << records.size() << " calls; rejected " << filtered.rejected.size() << " of "
            << raw.size() << " quotes; RMSE model " << report.overall.rmse_model << ", BS "
            << report.overall.rmse_bs << '\n';
        return ok;
    }
};

struct ImpliedVolCmd {
    double price = 0.0;
    double strike = 0.0;
    double spot = 0.0;
    long days = 0;
    double rate = 0.0;

    void add(CLI::App& app) {
        auto* sub = app.add_subcommand("implied-vol", "Black-Scholes implied volatility of a call price");
        sub->add_option("--price", price, "call price")->required();
        sub->add_option("--strike", strike, "strike")->required();
        sub->add_option("--spot", spot, "underlying level S_{t0-1}")->required();
        sub->add_option("--days", days, "open-market days to expiry")->required()->check(CLI::PositiveNumber);
        sub->add_option("--rate", rate, "annualised risk-free rate");
    }

    int run(std::ostream& out) const {
        const ContractSpec c{strike, 1, days, spot};
        const double per_step = bs_implied_vol(c, price, per_step_rate(rate));
        out << "implied_vol_annual,implied_vol_per_step\n"
            << csv::fmt(per_step * std::sqrt(kTradingDays)) << ',' << csv::fmt(per_step) << '\n';
        return ok;
    }
};

struct EmitPlotsCmd {
    Common common;
    std::string returns_path;
    std::string date;
    std::vector<int> horizons{1, 5, 21, 63, 252};
    int smile_days = 21;
    std::string moneyness = "0.8:1.2:0.025";
    std::string out_dir;

    void add(CLI::App& app) {
        auto* sub = app.add_subcommand("emit-plots", "write plot data: rho_bar densities and a model smile");
        common.add_to(sub);
        sub->add_option("--returns", returns_path, "return series CSV")->required()->check(CLI::ExistingFile);
        sub->add_option("--date", date, "last observed date (default: last return)");
        sub->add_option("--horizons", horizons, "maturities T - t0 + 1 for rho_bar")->delimiter(',');
        sub->add_option("--smile-days", smile_days, "maturity of the smile")->check(CLI::PositiveNumber);
        sub->add_option("--moneyness", moneyness, "strike grid as S/K lo:hi:step");
        sub->add_option("--out-dir", out_dir, "output directory")->required();
    }

    int run() const {
        const auto cfg = common.resolve(true);
        const auto series = read_return_series(returns_path);
        const long count = date.empty() ? static_cast<long>(series.size()) : returns_up_to(series, parse_date(date));
        const long t0 = count + 1;
        const auto h = header(cfg, "emit-plots");
        const auto& p = cfg.params;
        auto past = sample_past_restarts(series, t0, p, cfg.pricing.inference, derive_seed(*cfg.seed, {0}));
        const auto grid = prior_sigma_grid(p.alpha, p.beta);
        {
            auto f = open_in_dir(out_dir, "rho_prior.csv");
            csv::write_comment(f, h);
            f << "sigma,density\n";
            for (double s : grid) f << csv::fmt(s) << ',' << csv::fmt(inverse_gamma_sigma_density(s, p.alpha, p.beta)) << '\n';
        }
        for (int n : horizons) {
            if (n < 1) throw DomainError("--horizons must be >= 1");
            // the first sampled past string, continued without future restarts
            RestartPath path = past.front();
            for (int j = 0; j < n; ++j) path.states.push_back(path.states.back() + 1);
            path.t_end = t0 + n - 1;
            const auto mix = build_rho_bar(series, path, t0, t0 + n - 1, p, cfg.pricing.n_real,
                                           derive_seed(*cfg.seed, {1, static_cast<std::uint64_t>(n)}));
            write_mixture_csv((std::filesystem::path(out_dir) / ("rho_bar_" + std::to_string(n) + ".csv")).string(),
                              mix, grid, h);
        }
        {
            const double S = std::exp(std::accumulate(series.returns.begin(), series.returns.begin() + count, 0.0));
            std::vector<double> strikes;
            for (double m : parse_range(moneyness, "--moneyness")) strikes.push_back(S / m);
            std::sort(strikes.begin(), strikes.end());
            const ContractSpec c{strikes.front(), t0, t0 + smile_days - 1, S};
            const auto res = price_given_past(c, strikes, series, past, p, cfg.pricing, derive_seed(*cfg.seed, {2}));
            auto f = open_in_dir(out_dir, "smile.csv");
            csv::write_comment(f, h);
            f << "strike,implied_vol_model,implied_vol_market\n";
            for (std::size_t k = 0; k < strikes.size(); ++k) {
                ContractSpec ck = c;
                ck.K = strikes[k];
                f << csv::fmt(strikes[k]) << ',' << fmt_or_empty(annualised_iv(ck, res[k].price, p.r)) << ",\n";
            }
        }
        return ok;
    }
};

void report_error(std::ostream& err, const char* kind, const std::string& message) {
    std::string escaped;
    for (char c : message) {
        if (c == '"' || c == '\\') escaped += '\\';
        escaped += c == '\n' ? ' ' : c;
    }
    err << "error kind=" << kind << " message=\"" << escaped << "\"\n";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Switching-ARCH model: simulation, calibration and option pricing"};
    app.require_subcommand(1);
    SimulateCmd simulate;
    CalibrateCmd calibrate;
    InferCmd infer;
    PriceCmd price;
    EvaluateCmd evaluate;
    ImpliedVolCmd implied;
    EmitPlotsCmd plots;
    simulate.add(app);
    calibrate.add(app);
    infer.add(app);
    price.add(app);
    evaluate.add(app);
    implied.add(app);
    plots.add(app);
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return ok;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return ok;
        }
        report_error(err, "usage", e.what());
        return usage_error;
    }
    try {
        const std::string name = app.get_subcommands().front()->get_name();
        if (name == "simulate") return simulate.run(out);
        if (name == "calibrate") return calibrate.run(err);
        if (name == "infer-restarts") return infer.run();
        if (name == "price") return price.run(err);
        if (name == "evaluate") return evaluate.run(err);
        if (name == "implied-vol") return implied.run(out);
        if (name == "emit-plots") return plots.run();
        report_error(err, "usage", "unknown subcommand " + name);
        return usage_error;
    } catch (const DomainError& e) {
        report_error(err, "usage", e.what());
        return usage_error;
    } catch (const DataError& e) {
        report_error(err, "data", e.what());
        return data_error;
    } catch (const NumericError& e) {
        report_error(err, "numeric", e.what());
        return numeric_error;
    } catch (const std::exception& e) {
        report_error(err, "numeric", e.what());
        return numeric_error;
    }
}

}  // namespace swarch::cli
