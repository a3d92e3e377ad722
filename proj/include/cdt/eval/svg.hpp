// SPDX-License-Identifier: Apache-2.0
#pragma once

// Minimal static SVG bar charts. Output depends only on the data.

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

namespace cdt::eval::svg {

inline std::string escape(const std::string& s) {
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

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

struct Group {
    std::string label;
    std::vector<double> values;  // one per series
};

/// Vertical grouped bar chart; every group has one bar per series.
inline std::string grouped_bars(const std::string& title, const std::vector<std::string>& series,
                                const std::vector<Group>& groups, const std::string& y_label) {
    static const char* colors[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"};
    const double bar = 22, gap = 30, left = 60, top = 40, height = 240;
    double vmax = 0;
    for (const auto& g : groups)
        for (double v : g.values) vmax = std::max(vmax, v);
    if (vmax <= 0) vmax = 1;
    const double group_w = bar * static_cast<double>(series.size()) + gap;
    const double width = left + group_w * static_cast<double>(groups.size()) + 160;
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" +
                    num(top + height + 70) + "\">\n";
    s += "<text x=\"" + num(left) + "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" + escape(title) +
         "</text>\n";
    s += "<text x=\"12\" y=\"" + num(top + height / 2) + "\" font-family=\"sans-serif\" font-size=\"11\" transform=\"rotate(-90 12 " +
         num(top + height / 2) + ")\">" + escape(y_label) + "</text>\n";
    s += "<line x1=\"" + num(left) + "\" y1=\"" + num(top + height) + "\" x2=\"" +
         num(left + group_w * static_cast<double>(groups.size())) + "\" y2=\"" + num(top + height) +
         "\" stroke=\"black\"/>\n";
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const double x0 = left + gap / 2 + group_w * static_cast<double>(gi);
        for (std::size_t si = 0; si < groups[gi].values.size(); ++si) {
            const double v = groups[gi].values[si];
            const double h = height * v / vmax;
            const double x = x0 + bar * static_cast<double>(si);
            s += "<rect x=\"" + num(x) + "\" y=\"" + num(top + height - h) + "\" width=\"" + num(bar - 2) +
                 "\" height=\"" + num(h) + "\" fill=\"" + colors[si % 6] + "\"><title>" +
                 escape(series[si] + " " + num(v)) + "</title></rect>\n";
        }
        s += "<text x=\"" + num(x0) + "\" y=\"" + num(top + height + 16) +
             "\" font-family=\"sans-serif\" font-size=\"11\">" + escape(groups[gi].label) + "</text>\n";
    }
    const double lx = left + group_w * static_cast<double>(groups.size()) + 10;
    for (std::size_t si = 0; si < series.size(); ++si) {
        const double y = top + 16 * static_cast<double>(si);
        s += "<rect x=\"" + num(lx) + "\" y=\"" + num(y) + "\" width=\"10\" height=\"10\" fill=\"" + colors[si % 6] +
             "\"/>\n";
        s += "<text x=\"" + num(lx + 14) + "\" y=\"" + num(y + 9) + "\" font-family=\"sans-serif\" font-size=\"11\">" +
             escape(series[si]) + "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

/// Horizontal bars, one per (label, value) row, in the given order.
inline std::string horizontal_bars(const std::string& title, const std::vector<std::pair<std::string, double>>& rows) {
    const double left = 260, top = 36, row_h = 18, width = 300;
    double vmax = 0;
    for (const auto& [_, v] : rows) vmax = std::max(vmax, v);
    if (vmax <= 0) vmax = 1;
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(left + width + 80) + "\" height=\"" +
                    num(top + row_h * static_cast<double>(rows.size()) + 20) + "\">\n";
    s += "<text x=\"10\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" + escape(title) + "</text>\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double y = top + row_h * static_cast<double>(i);
        const double w = width * rows[i].second / vmax;
        s += "<text x=\"" + num(left - 6) + "\" y=\"" + num(y + 12) +
             "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + escape(rows[i].first) + "</text>\n";
        s += "<rect x=\"" + num(left) + "\" y=\"" + num(y) + "\" width=\"" + num(w) + "\" height=\"" + num(row_h - 4) +
             "\" fill=\"#4c72b0\"/>\n";
        s += "<text x=\"" + num(left + w + 4) + "\" y=\"" + num(y + 12) + "\" font-family=\"sans-serif\" font-size=\"11\">" +
             num(rows[i].second) + "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

}  // namespace cdt::eval::svg
