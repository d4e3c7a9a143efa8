#pragma once

// Static SVG line charts: axes with ticks, one polyline per series, legend.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "dfig/errors.hpp"

namespace dfig {

struct SvgSeries {
    std::string label;
    std::vector<double> y;
};

struct SvgChart {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<double> x;
    std::vector<SvgSeries> series;
    int width = 800;
    int height = 400;
};

namespace detail {

inline std::string svg_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string svg_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

// Round step (1, 2 or 5 times a power of ten) giving about `n` ticks over `span`.
inline double nice_step(double span, int n) {
    const double raw = span / n;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double f = raw / mag;
    return (f < 1.5 ? 1.0 : f < 3.5 ? 2.0 : f < 7.5 ? 5.0 : 10.0) * mag;
}

}  // namespace detail

inline std::string render_svg(const SvgChart& c) {
    if (c.x.empty()) throw DomainError("svg: no data");
    for (const auto& s : c.series)
        if (s.y.size() != c.x.size()) throw DomainError("svg: series '" + s.label + "' length differs from x");

    const double ml = 70, mr = 20, mt = 40, mb = 50;
    const double pw = c.width - ml - mr, ph = c.height - mt - mb;

    double x0 = *std::min_element(c.x.begin(), c.x.end());
    double x1 = *std::max_element(c.x.begin(), c.x.end());
    double y0 = std::numeric_limits<double>::infinity(), y1 = -y0;
    for (const auto& s : c.series)
        for (double v : s.y)
            if (std::isfinite(v)) {
                y0 = std::min(y0, v);
                y1 = std::max(y1, v);
            }
    if (!std::isfinite(y0)) y0 = 0, y1 = 1;
    if (x1 <= x0) x1 = x0 + 1;
    if (y1 <= y0) {
        const double pad = std::max(1e-9, std::abs(y0) * 0.05);
        y0 -= pad;
        y1 += pad;
    }
    auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return mt + (1.0 - (y - y0) / (y1 - y0)) * ph; };

    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
    using detail::svg_num;
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << c.width << "\" height=\"" << c.height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << svg_num(c.width / 2.0) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << detail::svg_escape(c.title) << "</text>\n";
    o << "<rect x=\"" << svg_num(ml) << "\" y=\"" << svg_num(mt) << "\" width=\"" << svg_num(pw) << "\" height=\""
      << svg_num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";

    const double xs = detail::nice_step(x1 - x0, 8), ys = detail::nice_step(y1 - y0, 6);
    for (double v = std::ceil(x0 / xs) * xs; v <= x1 + 1e-9 * xs; v += xs) {
        o << "<line x1=\"" << svg_num(px(v)) << "\" y1=\"" << svg_num(mt + ph) << "\" x2=\"" << svg_num(px(v))
          << "\" y2=\"" << svg_num(mt + ph + 5) << "\" stroke=\"black\"/>";
        o << "<text x=\"" << svg_num(px(v)) << "\" y=\"" << svg_num(mt + ph + 18) << "\" text-anchor=\"middle\">"
          << detail::tick_label(v) << "</text>\n";
    }
    for (double v = std::ceil(y0 / ys) * ys; v <= y1 + 1e-9 * ys; v += ys) {
        o << "<line x1=\"" << svg_num(ml - 5) << "\" y1=\"" << svg_num(py(v)) << "\" x2=\"" << svg_num(ml + pw)
          << "\" y2=\"" << svg_num(py(v)) << "\" stroke=\"#dddddd\"/>";
        o << "<text x=\"" << svg_num(ml - 8) << "\" y=\"" << svg_num(py(v) + 4) << "\" text-anchor=\"end\">"
          << detail::tick_label(v) << "</text>\n";
    }
    o << "<text x=\"" << svg_num(ml + pw / 2) << "\" y=\"" << svg_num(c.height - 10.0) << "\" text-anchor=\"middle\">"
      << detail::svg_escape(c.x_label) << "</text>\n";
    o << "<text transform=\"translate(16," << svg_num(mt + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << detail::svg_escape(c.y_label) << "</text>\n";

    for (std::size_t k = 0; k < c.series.size(); ++k) {
        const char* color = palette[k % (sizeof palette / sizeof *palette)];
        o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
        for (std::size_t i = 0; i < c.x.size(); ++i) {
            const double y = c.series[k].y[i];
            if (!std::isfinite(y)) continue;
            o << svg_num(px(c.x[i])) << ',' << svg_num(py(std::clamp(y, y0, y1))) << ' ';
        }
        o << "\"/>\n";
        const double ly = mt + 14 + 16.0 * static_cast<double>(k);
        o << "<line x1=\"" << svg_num(ml + pw - 130) << "\" y1=\"" << svg_num(ly - 4) << "\" x2=\"" << svg_num(ml + pw - 110)
          << "\" y2=\"" << svg_num(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>";
        o << "<text x=\"" << svg_num(ml + pw - 105) << "\" y=\"" << svg_num(ly) << "\">"
          << detail::svg_escape(c.series[k].label) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

}  // namespace dfig
