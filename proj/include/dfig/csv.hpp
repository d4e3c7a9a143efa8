#pragma once

// Plain CSV: '.' decimal separator, LF line endings, doubles printed with 17 significant
// digits so that a write/read round trip is exact.

#include <algorithm>
#include <array>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "dfig/errors.hpp"
#include "dfig/sim.hpp"

namespace dfig {

/// Shortest-safe text form of a double: 17 significant digits, locale independent.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return {buf, res.ptr};
}

inline double parse_double(std::string_view s) {
    double v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw DomainError("csv: cannot parse number '" + std::string(s) + "'");
    return v;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline void write_csv(std::ostream& os, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << '\n';
    for (const auto& r : rows) {
        if (r.size() != header.size()) throw DomainError("csv: row width does not match header");
        for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << format_double(r[i]);
        os << '\n';
    }
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

inline CsvTable read_csv(std::istream& is) {
    CsvTable t;
    std::string line;
    if (!std::getline(is, line)) throw DomainError("csv: missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    for (auto f : split_fields(line)) t.header.emplace_back(f);
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() != t.header.size())
            throw DomainError("csv: line " + std::to_string(lineno) + " has " + std::to_string(fields.size()) +
                              " fields, expected " + std::to_string(t.header.size()));
        std::vector<double> row;
        row.reserve(fields.size());
        for (auto f : fields) row.push_back(parse_double(f));
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline std::vector<std::string> timeseries_header() {
    return {Sample::column_names.begin(), Sample::column_names.end()};
}

/// Every `decimate`-th sample, starting with the first.
inline void write_timeseries_csv(std::ostream& os, const TimeSeries& ts, std::size_t decimate = 1) {
    if (decimate < 1) throw ConfigError("decimate", "must be >= 1");
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < ts.samples.size(); i += decimate) {
        const auto v = ts.samples[i].values();
        rows.emplace_back(v.begin(), v.end());
    }
    write_csv(os, timeseries_header(), rows);
}

inline TimeSeries read_timeseries_csv(std::istream& is) {
    const auto table = read_csv(is);
    if (table.header != timeseries_header()) throw DomainError("csv: header is not the time-series column set");
    TimeSeries ts;
    for (const auto& r : table.rows) {
        std::array<double, Sample::kColumns> v{};
        std::copy(r.begin(), r.end(), v.begin());
        ts.samples.push_back(Sample::from_values(v));
    }
    return ts;
}

/// Wind samples with header `t,v_w`; speeds in pu, or in m/s when `v_w_base_mps` is given.
inline SampledWind read_wind_csv(std::istream& is, Interpolation interp = Interpolation::linear,
                                 double v_w_base_mps = 0.0) {
    const auto table = read_csv(is);
    if (table.header != std::vector<std::string>{"t", "v_w"}) throw DomainError("wind csv: header must be 't,v_w'");
    SampledWind w;
    w.interpolation = interp;
    for (const auto& r : table.rows) {
        w.t.push_back(r[0]);
        w.v_w.push_back(v_w_base_mps > 0 ? r[1] / v_w_base_mps : r[1]);
    }
    validate(WindProfile{w});
    return w;
}

}  // namespace dfig
