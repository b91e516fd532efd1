#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace infusion::plot {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
};

/// Self-contained SVG line chart. Long series are decimated for file size.
void write_line_plot(std::ostream& out, const PlotSpec& spec, const std::vector<Series>& series);

} // namespace infusion::plot
