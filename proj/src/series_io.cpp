#include "csv.hpp"
#include "swarch/errors.hpp"
#include "swarch/model.hpp"

#include <algorithm>
#include <cmath>

namespace swarch {

void ReturnSeries::validate() const {
    if (dated() && dates.size() != returns.size()) {
        throw DataError("return series: dates and returns differ in length");
    }
    for (std::size_t k = 1; k < dates.size(); ++k) {
        if (!(dates[k - 1] < dates[k])) {
            throw DataError("return series: dates not strictly increasing at " + format_date(dates[k]));
        }
    }
    for (double v : returns) {
        if (!std::isfinite(v)) throw DataError("return series: non-finite return");
    }
}

ReturnSeries ReturnSeries::window_ending(const Date& upto, std::size_t length) const {
    if (!dated()) throw DataError("window_ending requires a dated series");
    const auto end = std::upper_bound(dates.begin(), dates.end(), upto);
    const auto n_end = static_cast<std::size_t>(end - dates.begin());
    if (n_end < length) {
        throw DataError("return series: need " + std::to_string(length) + " returns up to " +
                        format_date(upto) + ", have " + std::to_string(n_end));
    }
    ReturnSeries out;
    out.dates.assign(dates.begin() + static_cast<long>(n_end - length), end);
    out.returns.assign(returns.begin() + static_cast<long>(n_end - length),
                       returns.begin() + static_cast<long>(n_end));
    return out;
}

ReturnSeries read_return_series(const std::string& path) {
    csv::Reader reader(path, "date,log_return");
    ReturnSeries series;
    std::vector<std::string> f;
    while (reader.next(f)) {
        series.dates.push_back(parse_date(f[0]));
        series.returns.push_back(reader.number(f[1]));
    }
    series.validate();
    return series;
}

void write_return_series(const std::string& path, const ReturnSeries& series,
                         const std::string& header_comment) {
    if (!series.dated()) throw DataError("write_return_series: series has no dates");
    auto out = csv::open_out(path);
    write_return_series(out, series, header_comment);
}

void write_return_series(std::ostream& out, const ReturnSeries& series,
                         const std::string& header_comment) {
    if (!series.dated()) throw DataError("write_return_series: series has no dates");
    csv::write_comment(out, header_comment);
    out << "date,log_return\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        out << format_date(series.dates[k]) << ',' << csv::fmt(series.returns[k]) << '\n';
    }
}

void write_simulation_csv(const std::string& path, const SimulatedPath& sim,
                          const std::string& header_comment) {
    auto out = csv::open_out(path);
    write_simulation_csv(out, sim, header_comment);
}

void write_simulation_csv(std::ostream& out, const SimulatedPath& sim,
                          const std::string& header_comment) {
    csv::write_comment(out, header_comment);
    out << "t,i_state,a_coeff,y,x\n";
    for (std::size_t k = 0; k < sim.x.size(); ++k) {
        out << (k + 1) << ',' << sim.states[k] << ',' << csv::fmt(sim.a[k]) << ','
            << csv::fmt(sim.y[k]) << ',' << csv::fmt(sim.x[k]) << '\n';
    }
}

}  // namespace swarch
