#include "edgesem/plots.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "edgesem/errors.hpp"

namespace edgesem {

namespace {

constexpr double kWidth = 480.0;
constexpr double kHeight = 400.0;
constexpr double kLeft = 60.0;
constexpr double kTop = 40.0;
constexpr double kPlotW = 380.0;
constexpr double kPlotH = 300.0;
constexpr std::array<const char*, 6> kColors = {"#1f77b4", "#d62728", "#2ca02c",
                                                "#9467bd", "#ff7f0e", "#8c564b"};

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

void frame(std::ostream& out, const std::string& title, const std::string& x_label,
           const std::string& y_label, double x_max, double y_max) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << escape_xml(title) << "</text>\n"
      << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kPlotW
      << "\" height=\"" << kPlotH << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double f = i / 4.0;
    const double x = kLeft + f * kPlotW;
    const double y = kTop + kPlotH - f * kPlotH;
    out << "<text x=\"" << x << "\" y=\"" << kTop + kPlotH + 16
        << "\" text-anchor=\"middle\">" << f * x_max << "</text>\n"
        << "<text x=\"" << kLeft - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">"
        << f * y_max << "</text>\n";
  }
  out << "<text x=\"" << kLeft + kPlotW / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\">" << escape_xml(x_label) << "</text>\n"
      << "<text transform=\"translate(16," << kTop + kPlotH / 2
      << ") rotate(-90)\" text-anchor=\"middle\">" << escape_xml(y_label) << "</text>\n";
}

void save(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << body;
}

}  // namespace

void write_curve_svg(const std::filesystem::path& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<NamedCurve>& curves) {
  std::ostringstream out;
  frame(out, title, x_label, y_label, 1.0, 1.0);
  for (std::size_t c = 0; c < curves.size(); ++c) {
    const char* color = kColors[c % kColors.size()];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& p : curves[c].points)
      out << kLeft + p.x * kPlotW << ',' << kTop + kPlotH - p.y * kPlotH << ' ';
    out << "\"/>\n"
        << "<text x=\"" << kLeft + kPlotW - 4 << "\" y=\"" << kTop + kPlotH - 10 - 16.0 * static_cast<double>(c)
        << "\" text-anchor=\"end\" fill=\"" << color << "\">" << escape_xml(curves[c].name)
        << "</text>\n";
  }
  out << "</svg>\n";
  save(path, out.str());
}

void write_histogram_svg(const std::filesystem::path& path, const std::string& title,
                         const LabeledScores& scores, int bins) {
  if (scores.scores.empty() || bins < 1) throw DataError("nothing to plot");
  const auto [lo_it, hi_it] = std::minmax_element(scores.scores.begin(), scores.scores.end());
  const double lo = *lo_it;
  const double span = std::max(*hi_it - lo, 1e-12);
  std::vector<double> counts[2] = {std::vector<double>(static_cast<std::size_t>(bins)),
                                   std::vector<double>(static_cast<std::size_t>(bins))};
  double totals[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < scores.scores.size(); ++i) {
    const int cls = scores.labels[i] ? 1 : 0;
    const int b = std::min(bins - 1, static_cast<int>((scores.scores[i] - lo) / span * bins));
    counts[cls][static_cast<std::size_t>(b)] += 1.0;
    totals[cls] += 1.0;
  }
  // Each class normalized to its own total so the minority stays visible.
  double peak = 0.0;
  for (int cls = 0; cls < 2; ++cls)
    for (double& v : counts[cls]) {
      if (totals[cls] > 0.0) v /= totals[cls];
      peak = std::max(peak, v);
    }
  peak = std::max(peak, 1e-12);

  std::ostringstream out;
  frame(out, title, "score (fraction of range)", "fraction of class", 1.0, peak);
  const char* colors[2] = {"#1f77b4", "#d62728"};
  const char* names[2] = {"benign", "malicious"};
  const double bar = kPlotW / bins;
  for (int cls = 0; cls < 2; ++cls) {
    for (int b = 0; b < bins; ++b) {
      const double h = counts[cls][static_cast<std::size_t>(b)] / peak * kPlotH;
      if (h <= 0.0) continue;
      out << "<rect x=\"" << kLeft + b * bar << "\" y=\"" << kTop + kPlotH - h << "\" width=\""
          << bar << "\" height=\"" << h << "\" fill=\"" << colors[cls]
          << "\" fill-opacity=\"0.45\"/>\n";
    }
    out << "<text x=\"" << kLeft + kPlotW - 4 << "\" y=\"" << kTop + 16 + 16 * cls
        << "\" text-anchor=\"end\" fill=\"" << colors[cls] << "\">" << names[cls] << "</text>\n";
  }
  out << "</svg>\n";
  save(path, out.str());
}

}  // namespace edgesem
