#include "mixcast/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>

#include "mixcast/errors.hpp"

namespace mixcast {

namespace {

double tx(const ChartSpec& spec, double x) { return spec.log2_x ? std::log2(x) : x; }

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

double ChartLayout::map_x(double x) const {
    const double w = width - margin_left - margin_right;
    if (x_max == x_min) return margin_left + 0.5 * w;
    return margin_left + (x - x_min) / (x_max - x_min) * w;
}

double ChartLayout::map_y(double y) const {
    const double h = height - margin_top - margin_bottom;
    if (y_max == y_min) return margin_top + 0.5 * h;
    return margin_top + (y_max - y) / (y_max - y_min) * h;
}

double ChartLayout::unmap_x(double px) const {
    const double w = width - margin_left - margin_right;
    return x_min + (px - margin_left) / w * (x_max - x_min);
}

double ChartLayout::unmap_y(double py) const {
    const double h = height - margin_top - margin_bottom;
    return y_max - (py - margin_top) / h * (y_max - y_min);
}

ChartLayout chart_layout(const ChartSpec& spec) {
    ChartLayout l;
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : spec.series)
        for (const auto& [x, y] : s.points) {
            xmin = std::min(xmin, tx(spec, x));
            xmax = std::max(xmax, tx(spec, x));
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    for (const auto& h : spec.hlines) {
        ymin = std::min(ymin, h.y);
        ymax = std::max(ymax, h.y);
    }
    if (!std::isfinite(xmin)) {
        xmin = 0;
        xmax = 1;
        ymin = 0;
        ymax = 1;
    }
    if (ymax == ymin) {
        ymax += 1.0;
        ymin -= 1.0;
    }
    const double pad = 0.05 * (ymax - ymin);
    l.x_min = xmin;
    l.x_max = xmax == xmin ? xmin + 1.0 : xmax;
    l.y_min = ymin - pad;
    l.y_max = ymax + pad;
    return l;
}

void write_line_chart(const ChartSpec& spec, std::ostream& os) {
    static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                     "#ff7f0e", "#8c564b", "#17becf"};
    const ChartLayout l = chart_layout(spec);

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << l.width << "\" height=\""
       << l.height << "\" viewBox=\"0 0 " << l.width << " " << l.height << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << l.width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
       << spec.title << "</text>\n";

    // Axes.
    const double x0 = l.margin_left, x1 = l.width - l.margin_right;
    const double y0 = l.height - l.margin_bottom, y1 = l.margin_top;
    os << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1
       << "\" stroke=\"black\"/>\n";

    for (int i = 0; i <= 4; ++i) {
        const double fx = l.x_min + (l.x_max - l.x_min) * i / 4.0;
        const double px = l.map_x(fx);
        const double label = spec.log2_x ? std::exp2(fx) : fx;
        os << "<line x1=\"" << px << "\" y1=\"" << y0 << "\" x2=\"" << px << "\" y2=\"" << y0 + 4
           << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << px << "\" y=\"" << y0 + 18
           << "\" text-anchor=\"middle\" font-size=\"10\">" << num(label) << "</text>\n";
        const double fy = l.y_min + (l.y_max - l.y_min) * i / 4.0;
        const double py = l.map_y(fy);
        os << "<line x1=\"" << x0 - 4 << "\" y1=\"" << py << "\" x2=\"" << x0 << "\" y2=\"" << py
           << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << x0 - 8 << "\" y=\"" << py + 3
           << "\" text-anchor=\"end\" font-size=\"10\">" << num(fy) << "</text>\n";
    }
    os << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << l.height - 10
       << "\" text-anchor=\"middle\" font-size=\"11\">" << spec.x_label << "</text>\n";
    os << "<text x=\"16\" y=\"" << (y0 + y1) / 2 << "\" text-anchor=\"middle\" font-size=\"11\" "
       << "transform=\"rotate(-90 16 " << (y0 + y1) / 2 << ")\">" << spec.y_label << "</text>\n";

    for (const auto& h : spec.hlines) {
        const double py = l.map_y(h.y);
        os << "<line x1=\"" << x0 << "\" y1=\"" << py << "\" x2=\"" << x1 << "\" y2=\"" << py
           << "\" stroke=\"gray\" stroke-dasharray=\"6 4\"/>\n";
        os << "<text x=\"" << x1 + 6 << "\" y=\"" << py + 3 << "\" font-size=\"10\">" << h.name
           << "</text>\n";
    }

    std::size_t color_idx = 0;
    double legend_y = y1 + 10;
    for (const auto& s : spec.series) {
        const std::string color =
            s.color.empty() ? kPalette[color_idx++ % (sizeof kPalette / sizeof *kPalette)]
                            : s.color;
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : s.points)
            os << num(l.map_x(tx(spec, x))) << ',' << num(l.map_y(y)) << ' ';
        os << "\"/>\n";
        os << "<line x1=\"" << x1 + 6 << "\" y1=\"" << legend_y << "\" x2=\"" << x1 + 26
           << "\" y2=\"" << legend_y << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << x1 + 30 << "\" y=\"" << legend_y + 3 << "\" font-size=\"10\">"
           << s.name << "</text>\n";
        legend_y += 14;
    }
    os << "</svg>\n";
}

void write_line_chart(const ChartSpec& spec, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    write_line_chart(spec, os);
}

}  // namespace mixcast
