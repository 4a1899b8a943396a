#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "edgesem/metrics.hpp"

namespace edgesem {

struct NamedCurve {
  std::string name;
  std::vector<CurvePoint> points;
};

/// Line chart on the unit square, one polyline per curve.
void write_curve_svg(const std::filesystem::path& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<NamedCurve>& curves);

/// Overlaid benign / malicious score histograms with shared bins.
void write_histogram_svg(const std::filesystem::path& path, const std::string& title,
                         const LabeledScores& scores, int bins = 40);

}  // namespace edgesem
