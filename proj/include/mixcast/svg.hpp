#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mixcast {

struct ChartSeries {
    std::string name;
    std::string color;
    std::vector<std::pair<double, double>> points;
};

struct ChartHLine {
    std::string name;
    double y = 0.0;
};

struct ChartSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log2_x = false;  // plot x on a log2 axis
    std::vector<ChartSeries> series;
    std::vector<ChartHLine> hlines;
};

// Pixel geometry of a rendered chart; exposed so the mapping between data and
// polyline coordinates stays testable.
struct ChartLayout {
    double width = 720, height = 420;
    double margin_left = 64, margin_right = 120, margin_top = 36, margin_bottom = 48;
    double x_min = 0, x_max = 1, y_min = 0, y_max = 1;

    double map_x(double x) const;
    double map_y(double y) const;
    double unmap_x(double px) const;
    double unmap_y(double py) const;
};

ChartLayout chart_layout(const ChartSpec& spec);
void write_line_chart(const ChartSpec& spec, std::ostream& os);
void write_line_chart(const ChartSpec& spec, const std::string& path);

}  // namespace mixcast
