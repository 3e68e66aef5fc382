#include "swarch/dates.hpp"

#include "swarch/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace swarch {

Date parse_date(std::string_view text) {
    int y = 0;
    unsigned m = 0;
    unsigned d = 0;
    std::string buf(text);
    char tail = 0;
    if (buf.size() != 10 || std::sscanf(buf.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3) {
        throw DataError("invalid ISO date: '" + buf + "'");
    }
    Date out{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!out.ok()) {
        throw DataError("invalid calendar date: '" + buf + "'");
    }
    return out;
}

std::string format_date(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                  static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
    return buf;
}

bool is_wednesday(const Date& d) {
    return std::chrono::weekday{to_days(d)} == std::chrono::Wednesday;
}

bool is_weekday(const Date& d) {
    const auto wd = std::chrono::weekday{to_days(d)};
    return wd != std::chrono::Saturday && wd != std::chrono::Sunday;
}

TradingCalendar::TradingCalendar(std::vector<Date> days) : days_(std::move(days)) {
    std::sort(days_.begin(), days_.end());
    days_.erase(std::unique(days_.begin(), days_.end()), days_.end());
}

TradingCalendar TradingCalendar::weekdays(const Date& first, const Date& last) {
    std::vector<Date> days;
    for (auto d = to_days(first); d <= to_days(last); d += std::chrono::days{1}) {
        Date ymd{d};
        if (is_weekday(ymd)) days.push_back(ymd);
    }
    return TradingCalendar{std::move(days)};
}

TradingCalendar TradingCalendar::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open calendar file: " + path);
    std::vector<Date> days;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        days.push_back(parse_date(line));
    }
    return TradingCalendar{std::move(days)};
}

long TradingCalendar::open_days_between(const Date& from, const Date& to) const {
    auto lo = std::upper_bound(days_.begin(), days_.end(), from);
    auto hi = std::upper_bound(days_.begin(), days_.end(), to);
    return hi > lo ? static_cast<long>(hi - lo) : 0L;
}

bool TradingCalendar::contains(const Date& d) const {
    return std::binary_search(days_.begin(), days_.end(), d);
}

}  // namespace swarch
