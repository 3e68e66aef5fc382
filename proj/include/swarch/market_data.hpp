#pragma once

#include "swarch/dates.hpp"

#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace swarch {

enum class OptionType { call, put };

struct OptionQuote {
    Date quote_date;
    Date expiry;
    double strike = 0.0;
    OptionType type = OptionType::call;
    double price = 0.0;
    double underlying_close = 0.0;

    double moneyness() const { return underlying_close / strike; }
};

/// Reads `quote_date,expiry,strike,cp_flag,price,underlying_close` (cp_flag C or P).
std::vector<OptionQuote> read_option_chain(const std::string& path);

struct RateQuote {
    Date date;
    double r1m;
    double r3m;
    double r6m;
    double r12m;
};

/// Annualised interbank rates by date.
class RateCurve {
public:
    explicit RateCurve(bool allow_negative = false) : allow_negative_(allow_negative) {}
    /// Reads `date,r1m,r3m,r6m,r12m`.
    static RateCurve load(const std::string& path, bool allow_negative = false);

    void add(const RateQuote& q);
    bool has(const Date& d) const;
    /// Throws DataError when the date is missing.
    const RateQuote& at(const Date& d) const;

private:
    bool allow_negative_;
    std::map<long, RateQuote> by_day_;
};

enum class RateTenor { m1, m3, m6, m12 };

/// [1, 40] -> 1m, [41, 82] -> 3m, [83, 183] -> 6m, >= 184 -> 12m open-market days.
RateTenor rate_tenor(long days_to_expiry);
double select_rate(const Date& quote_date, long days_to_expiry, const RateCurve& curve);

/// Per-step rate from an annualised one: (1 + r)^{1/252} - 1.
double per_step_rate(double annual_rate);

struct AdjustedIndex {
    double value = 0.0;
    bool fallback = false;  // no put-call pair: raw index returned
    double strike_used = std::numeric_limits<double>::quiet_NaN();
};

/// Dividend-discounted index from the put-call pair closest to the money
/// (ties go to the lower strike): S_adj = C - P + K e^{-r tau}.
/// `chain` holds quotes of one quote date and one expiry; `rate` is continuous, tau in years.
AdjustedIndex dividend_adjusted_index(std::span<const OptionQuote> chain, double index_level,
                                      double rate, double tau_years);

enum class RejectReason {
    invalid,
    not_wednesday,
    maturity_over_one_year,
    last_week,
    below_tick_threshold,
    missing_rate,
    arbitrage_violation,
};
std::string_view reason_code(RejectReason r);

struct Rejection {
    OptionQuote quote;
    RejectReason reason;
};

/// Day-count and adjustment inputs for the quote filters.
struct MarketContext {
    TradingCalendar calendar;
    RateCurve rates;
    /// Adjusted index by (quote date, expiry) in days since epoch.
    std::map<std::pair<long, long>, AdjustedIndex> adjusted;
    double tick_threshold = 0.125;

    long days_to_maturity(const OptionQuote& q) const;
    /// Adjusted index for the quote's (date, expiry), or its raw close when not precomputed.
    double index_for(const OptionQuote& q) const;
};

/// Computes dividend-adjusted indices for every (quote date, expiry) of a raw chain.
/// Pairs without a rate fall back to the raw close.
std::map<std::pair<long, long>, AdjustedIndex> adjust_chain(std::span<const OptionQuote> quotes,
                                                           const TradingCalendar& calendar,
                                                           const RateCurve& rates,
                                                           std::vector<std::string>* warnings = nullptr);

struct FilterResult {
    std::vector<OptionQuote> kept;
    std::vector<Rejection> rejected;
};

/// Applies, in order: invalid, not_wednesday, maturity_over_one_year (> 365 calendar days),
/// last_week (<= 7 calendar days to expiry), below_tick_threshold, missing_rate,
/// arbitrage_violation (calls: C < max(0, S_adj - K e^{-r tau}), puts symmetric).
FilterResult filter_chain(std::span<const OptionQuote> quotes, const MarketContext& ctx);

void write_rejections_csv(const std::string& path, std::span<const Rejection> rejected,
                          const std::string& header_comment = {});

struct EvaluationRecord {
    OptionQuote quote;
    long dtm = 0;
    double market = 0.0;
    double model = 0.0;
    double bs = 0.0;
    double bs_implied_vol = std::numeric_limits<double>::quiet_NaN();  // annualised, NaN if none
};

struct BucketStats {
    std::size_t count = 0;
    double avg_price = 0.0;
    double avg_implied_vol = std::numeric_limits<double>::quiet_NaN();
    double rmse_model = 0.0;
    double rmse_bs = 0.0;
};

struct EvaluationReport {
    std::vector<double> moneyness_edges{0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5};
    std::vector<long> dtm_edges{21, 63, 126};  // last bucket: >= 126
    /// cells[m][d]; m in [0, moneyness_edges.size()], d in [0, dtm_edges.size()].
    std::vector<std::vector<BucketStats>> cells;
    std::vector<BucketStats> moneyness_all;  // "All" column
    std::vector<BucketStats> dtm_all;        // "All" row
    BucketStats overall;

    std::string moneyness_label(std::size_t m) const;
    std::string dtm_label(std::size_t d) const;
};

/// Left-closed buckets: index of the first edge > value.
std::size_t bucket_index(double value, std::span<const double> edges);
BucketStats summarize(std::span<const EvaluationRecord> records);
EvaluationReport bucket_and_report(std::span<const EvaluationRecord> records);

/// One row per (moneyness bucket, DTM bucket) including "All" marginals.
void write_report_csv(const std::string& path, const EvaluationReport& report,
                      const std::string& header_comment = {});

}  // namespace swarch
