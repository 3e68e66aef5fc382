#pragma once

#include <chrono>
#include <string>
#include <string_view>
#include <vector>

namespace swarch {

using Date = std::chrono::year_month_day;

/// Parses "YYYY-MM-DD". Throws DataError on anything else.
Date parse_date(std::string_view text);
std::string format_date(const Date& d);

inline std::chrono::sys_days to_days(const Date& d) { return std::chrono::sys_days{d}; }
inline long days_between(const Date& from, const Date& to) {
    return (to_days(to) - to_days(from)).count();
}
bool is_wednesday(const Date& d);
bool is_weekday(const Date& d);

/// Sorted set of open-market days.
class TradingCalendar {
public:
    TradingCalendar() = default;
    explicit TradingCalendar(std::vector<Date> days);

    /// Mon-Fri calendar covering [first, last]; used when no exchange calendar is supplied.
    static TradingCalendar weekdays(const Date& first, const Date& last);
    static TradingCalendar load(const std::string& path);

    /// Number of open-market days d with from < d <= to.
    long open_days_between(const Date& from, const Date& to) const;
    bool contains(const Date& d) const;
    const std::vector<Date>& days() const { return days_; }
    bool empty() const { return days_.empty(); }

private:
    std::vector<Date> days_;
};

}  // namespace swarch
