#include "swarch/market_data.hpp"

#include "csv.hpp"
#include "swarch/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace swarch {

namespace {

long day_number(const Date& d) { return to_days(d).time_since_epoch().count(); }

constexpr double kTradingDaysPerYear = 252.0;

}  // namespace

std::vector<OptionQuote> read_option_chain(const std::string& path) {
    csv::Reader reader(path, "quote_date,expiry,strike,cp_flag,price,underlying_close");
    std::vector<OptionQuote> out;
    std::vector<std::string> f;
    while (reader.next(f)) {
        OptionQuote q;
        q.quote_date = parse_date(f[0]);
        q.expiry = parse_date(f[1]);
        q.strike = reader.number(f[2]);
        if (f[3] == "C" || f[3] == "c") {
            q.type = OptionType::call;
        } else if (f[3] == "P" || f[3] == "p") {
            q.type = OptionType::put;
        } else {
            throw DataError(reader.where() + ": cp_flag must be C or P");
        }
        q.price = reader.number(f[4]);
        q.underlying_close = reader.number(f[5]);
        out.push_back(q);
    }
    return out;
}

RateCurve RateCurve::load(const std::string& path, bool allow_negative) {
    csv::Reader reader(path, "date,r1m,r3m,r6m,r12m");
    RateCurve curve(allow_negative);
    std::vector<std::string> f;
    while (reader.next(f)) {
        RateQuote q{parse_date(f[0]), reader.number(f[1]), reader.number(f[2]), reader.number(f[3]),
                    reader.number(f[4])};
        try {
            curve.add(q);
        } catch (const DataError& e) {
            throw DataError(reader.where() + ": " + e.what());
        }
    }
    return curve;
}

void RateCurve::add(const RateQuote& q) {
    for (double v : {q.r1m, q.r3m, q.r6m, q.r12m}) {
        if (!std::isfinite(v)) throw DataError("rate curve: non-finite rate on " + format_date(q.date));
        if (v < 0.0 && !allow_negative_) {
            throw DataError("rate curve: negative rate on " + format_date(q.date));
        }
    }
    by_day_[day_number(q.date)] = q;
}

bool RateCurve::has(const Date& d) const { return by_day_.count(day_number(d)) != 0; }

const RateQuote& RateCurve::at(const Date& d) const {
    const auto it = by_day_.find(day_number(d));
    if (it == by_day_.end()) throw DataError("rate curve: no rates for " + format_date(d));
    return it->second;
}

RateTenor rate_tenor(long days) {
    if (days < 1) throw DomainError("rate_tenor: days to expiry must be >= 1");
    if (days <= 40) return RateTenor::m1;
    if (days <= 82) return RateTenor::m3;
    if (days <= 183) return RateTenor::m6;
    return RateTenor::m12;
}

double select_rate(const Date& quote_date, long days, const RateCurve& curve) {
    const auto& q = curve.at(quote_date);
    switch (rate_tenor(days)) {
        case RateTenor::m1: return q.r1m;
        case RateTenor::m3: return q.r3m;
        case RateTenor::m6: return q.r6m;
        case RateTenor::m12: return q.r12m;
    }
    throw DomainError("select_rate: unknown tenor");
}

double per_step_rate(double annual_rate) {
    if (!(annual_rate > -1.0)) throw DomainError("per_step_rate: rate must exceed -1");
    return std::expm1(std::log1p(annual_rate) / kTradingDaysPerYear);
}

AdjustedIndex dividend_adjusted_index(std::span<const OptionQuote> chain, double index_level,
                                      double rate, double tau_years) {
    if (!(index_level > 0.0)) throw DomainError("dividend_adjusted_index: index level must be > 0");
    if (!(tau_years >= 0.0)) throw DomainError("dividend_adjusted_index: tau must be >= 0");
    std::map<double, std::pair<const OptionQuote*, const OptionQuote*>> by_strike;
    for (const auto& q : chain) {
        auto& slot = by_strike[q.strike];
        (q.type == OptionType::call ? slot.first : slot.second) = &q;
    }
    const OptionQuote* call = nullptr;
    const OptionQuote* put = nullptr;
    double best = std::numeric_limits<double>::infinity();
    double strike = 0.0;
    // ascending strikes: a strict improvement is required, so ties keep the lower strike
    for (const auto& [k, pair] : by_strike) {
        if (!pair.first || !pair.second) continue;
        const double dist = std::abs(k - index_level);
        if (dist < best) {
            best = dist;
            call = pair.first;
            put = pair.second;
            strike = k;
        }
    }
    if (!call) return {index_level, true};
    return {call->price - put->price + strike * std::exp(-rate * tau_years), false, strike};
}

std::string_view reason_code(RejectReason r) {
    switch (r) {
        case RejectReason::invalid: return "invalid";
        case RejectReason::not_wednesday: return "not_wednesday";
        case RejectReason::maturity_over_one_year: return "maturity_over_one_year";
        case RejectReason::last_week: return "last_week";
        case RejectReason::below_tick_threshold: return "below_tick_threshold";
        case RejectReason::missing_rate: return "missing_rate";
        case RejectReason::arbitrage_violation: return "arbitrage_violation";
    }
    return "unknown";
}

long MarketContext::days_to_maturity(const OptionQuote& q) const {
    if (!calendar.empty()) return calendar.open_days_between(q.quote_date, q.expiry);
    return TradingCalendar::weekdays(q.quote_date, q.expiry).open_days_between(q.quote_date, q.expiry);
}

double MarketContext::index_for(const OptionQuote& q) const {
    const auto it = adjusted.find({day_number(q.quote_date), day_number(q.expiry)});
    return it == adjusted.end() ? q.underlying_close : it->second.value;
}

std::map<std::pair<long, long>, AdjustedIndex> adjust_chain(std::span<const OptionQuote> quotes,
                                                           const TradingCalendar& calendar,
                                                           const RateCurve& rates,
                                                           std::vector<std::string>* warnings) {
    std::map<std::pair<long, long>, std::vector<OptionQuote>> groups;
    for (const auto& q : quotes) {
        if (!(q.expiry > q.quote_date) || !(q.underlying_close > 0.0)) continue;
        groups[{day_number(q.quote_date), day_number(q.expiry)}].push_back(q);
    }
    MarketContext ctx{calendar, RateCurve{}, {}, 0.125};
    std::map<std::pair<long, long>, AdjustedIndex> out;
    for (const auto& [key, chain] : groups) {
        const auto& first = chain.front();
        const long dtm = ctx.days_to_maturity(first);
        AdjustedIndex adj{first.underlying_close, true};
        if (dtm >= 1 && rates.has(first.quote_date)) {
            const double r = select_rate(first.quote_date, dtm, rates);
            adj = dividend_adjusted_index(chain, first.underlying_close, r, dtm / kTradingDaysPerYear);
        }
        if (adj.fallback && warnings) {
            warnings->push_back("no put-call pair or rate for " + format_date(first.quote_date) + " expiry " +
                                format_date(first.expiry) + ": using the raw index");
        }
        out[key] = adj;
    }
    return out;
}

FilterResult filter_chain(std::span<const OptionQuote> quotes, const MarketContext& ctx) {
    FilterResult out;
    for (const auto& q : quotes) {
        auto reject = [&](RejectReason r) { out.rejected.push_back({q, r}); };
        if (!(std::isfinite(q.price) && q.price > 0.0 && q.strike > 0.0 && q.underlying_close > 0.0 &&
              q.expiry > q.quote_date)) {
            reject(RejectReason::invalid);
            continue;
        }
        if (!is_wednesday(q.quote_date)) {
            reject(RejectReason::not_wednesday);
            continue;
        }
        const long calendar_days = days_between(q.quote_date, q.expiry);
        if (calendar_days > 365) {
            reject(RejectReason::maturity_over_one_year);
            continue;
        }
        if (calendar_days <= 7) {
            reject(RejectReason::last_week);
            continue;
        }
        if (q.price < ctx.tick_threshold) {
            reject(RejectReason::below_tick_threshold);
            continue;
        }
        const long dtm = ctx.days_to_maturity(q);
        if (dtm < 1 || !ctx.rates.has(q.quote_date)) {
            reject(RejectReason::missing_rate);
            continue;
        }
        const double r = select_rate(q.quote_date, dtm, ctx.rates);
        const double disc_K = q.strike * std::exp(-r * dtm / kTradingDaysPerYear);
        const double S = ctx.index_for(q);
        const double bound = q.type == OptionType::call ? std::max(0.0, S - disc_K) : std::max(0.0, disc_K - S);
        if (q.price < bound) {
            reject(RejectReason::arbitrage_violation);
            continue;
        }
        out.kept.push_back(q);
    }
    return out;
}

void write_rejections_csv(const std::string& path, std::span<const Rejection> rejected,
                          const std::string& header_comment) {
    auto out = csv::open_out(path);
    csv::write_comment(out, header_comment);
    out << "quote_date,expiry,strike,cp_flag,price,underlying_close,reason\n";
    for (const auto& r : rejected) {
        const auto& q = r.quote;
        out << format_date(q.quote_date) << ',' << format_date(q.expiry) << ',' << csv::fmt(q.strike) << ','
            << (q.type == OptionType::call ? 'C' : 'P') << ',' << csv::fmt(q.price) << ','
            << csv::fmt(q.underlying_close) << ',' << reason_code(r.reason) << '\n';
    }
}

std::size_t bucket_index(double value, std::span<const double> edges) {
    return static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), value) - edges.begin());
}

BucketStats summarize(std::span<const EvaluationRecord> records) {
    BucketStats s;
    s.count = records.size();
    if (records.empty()) return s;
    double price = 0.0, em = 0.0, eb = 0.0, iv = 0.0;
    std::size_t n_iv = 0;
    for (const auto& r : records) {
        price += r.market;
        em += (r.model - r.market) * (r.model - r.market);
        eb += (r.bs - r.market) * (r.bs - r.market);
        if (std::isfinite(r.bs_implied_vol)) {
            iv += r.bs_implied_vol;
            ++n_iv;
        }
    }
    const double n = static_cast<double>(records.size());
    s.avg_price = price / n;
    s.rmse_model = std::sqrt(em / n);
    s.rmse_bs = std::sqrt(eb / n);
    if (n_iv > 0) s.avg_implied_vol = iv / static_cast<double>(n_iv);
    return s;
}

EvaluationReport bucket_and_report(std::span<const EvaluationRecord> records) {
    EvaluationReport rep;
    const std::size_t nm = rep.moneyness_edges.size() + 1;
    const std::size_t nd = rep.dtm_edges.size() + 1;
    std::vector<double> dtm_edges(rep.dtm_edges.begin(), rep.dtm_edges.end());
    std::vector<std::vector<std::vector<EvaluationRecord>>> groups(nm, std::vector<std::vector<EvaluationRecord>>(nd));
    std::vector<std::vector<EvaluationRecord>> by_m(nm), by_d(nd);
    for (const auto& r : records) {
        const auto m = bucket_index(r.quote.moneyness(), rep.moneyness_edges);
        const auto d = bucket_index(static_cast<double>(r.dtm), dtm_edges);
        groups[m][d].push_back(r);
        by_m[m].push_back(r);
        by_d[d].push_back(r);
    }
    rep.cells.assign(nm, std::vector<BucketStats>(nd));
    for (std::size_t m = 0; m < nm; ++m) {
        for (std::size_t d = 0; d < nd; ++d) rep.cells[m][d] = summarize(groups[m][d]);
        rep.moneyness_all.push_back(summarize(by_m[m]));
    }
    for (std::size_t d = 0; d < nd; ++d) rep.dtm_all.push_back(summarize(by_d[d]));
    rep.overall = summarize(records);
    return rep;
}

std::string EvaluationReport::moneyness_label(std::size_t m) const {
    auto f = [](double v) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };
    if (m == 0) return "<" + f(moneyness_edges.front());
    if (m == moneyness_edges.size()) return ">=" + f(moneyness_edges.back());
    return f(moneyness_edges[m - 1]) + "-" + f(moneyness_edges[m]);
}

std::string EvaluationReport::dtm_label(std::size_t d) const {
    if (d == 0) return "<" + std::to_string(dtm_edges.front());
    if (d == dtm_edges.size()) return ">=" + std::to_string(dtm_edges.back());
    return std::to_string(dtm_edges[d - 1]) + "-" + std::to_string(dtm_edges[d]);
}

void write_report_csv(const std::string& path, const EvaluationReport& rep,
                      const std::string& header_comment) {
    auto out = csv::open_out(path);
    csv::write_comment(out, header_comment);
    out << "moneyness,dtm,count,avg_price,avg_implied_vol,rmse_model,rmse_bs\n";
    auto row = [&](const std::string& m, const std::string& d, const BucketStats& s) {
        out << m << ',' << d << ',' << s.count << ',' << csv::fmt(s.avg_price) << ','
            << csv::fmt(s.avg_implied_vol) << ',' << csv::fmt(s.rmse_model) << ',' << csv::fmt(s.rmse_bs)
            << '\n';
    };
    for (std::size_t m = 0; m < rep.cells.size(); ++m) {
        for (std::size_t d = 0; d < rep.cells[m].size(); ++d) {
            row(rep.moneyness_label(m), rep.dtm_label(d), rep.cells[m][d]);
        }
        row(rep.moneyness_label(m), "All", rep.moneyness_all[m]);
    }
    for (std::size_t d = 0; d < rep.dtm_all.size(); ++d) row("All", rep.dtm_label(d), rep.dtm_all[d]);
    row("All", "All", rep.overall);
}

}  // namespace swarch
