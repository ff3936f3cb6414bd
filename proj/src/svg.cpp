#include "gradflow/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "gradflow/errors.hpp"

namespace gradflow {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 440.0;
constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 150.0;
constexpr double kMarginTop = 40.0;
constexpr double kMarginBottom = 55.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::string format_tick(double v) {
  std::ostringstream os;
  if (v != 0.0 && (std::abs(v) >= 1e4 || std::abs(v) < 1e-3)) {
    os << std::scientific << std::setprecision(1) << v;
  } else {
    os << std::setprecision(4) << v;
  }
  return os.str();
}

}  // namespace

SvgPlot::SvgPlot(std::string title, std::string x_label, std::string y_label)
    : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

void SvgPlot::add_series(std::string name, std::vector<double> x, std::vector<double> y) {
  if (x.size() != y.size()) throw ConfigError("svg series: x/y length mismatch");
  series_.push_back({std::move(name), std::move(x), std::move(y)});
}

void SvgPlot::write(const std::string& path) const {
  double x_min = std::numeric_limits<double>::infinity();
  double x_max = -x_min;
  double y_min = x_min;
  double y_max = -x_min;
  for (const Series& s : series_) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      double yv = s.y[i];
      if (log_y_) {
        if (!(yv > 0.0)) continue;
        yv = std::log10(yv);
      }
      if (!std::isfinite(s.x[i]) || !std::isfinite(yv)) continue;
      x_min = std::min(x_min, s.x[i]);
      x_max = std::max(x_max, s.x[i]);
      y_min = std::min(y_min, yv);
      y_max = std::max(y_max, yv);
    }
  }
  if (!std::isfinite(x_min) || !std::isfinite(y_min)) {
    x_min = 0.0;
    x_max = 1.0;
    y_min = 0.0;
    y_max = 1.0;
  }
  if (x_max == x_min) x_max = x_min + 1.0;
  if (y_max == y_min) y_max = y_min + 1.0;

  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kHeight - kMarginTop - kMarginBottom;
  const auto to_px = [&](double x, double y) {
    if (log_y_) y = std::log10(std::max(y, 1e-300));
    const double px = kMarginLeft + (x - x_min) / (x_max - x_min) * plot_w;
    const double py = kMarginTop + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h;
    return std::make_pair(px, py);
  };

  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open SVG file for writing: " + path);
  if (!comment_.empty()) out << "<!-- " << comment_ << " -->\n";
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kWidth << "' height='"
      << kHeight << "' viewBox='0 0 " << kWidth << " " << kHeight << "'>\n"
      << "<rect width='100%' height='100%' fill='white'/>\n"
      << "<text x='" << kWidth / 2 << "' y='22' text-anchor='middle' font-size='15' "
         "font-family='sans-serif'>" << title_ << "</text>\n";

  // frame + ticks
  out << "<rect x='" << kMarginLeft << "' y='" << kMarginTop << "' width='" << plot_w
      << "' height='" << plot_h << "' fill='none' stroke='#333'/>\n";
  constexpr int kTicks = 5;
  for (int i = 0; i <= kTicks; ++i) {
    const double fx = x_min + (x_max - x_min) * i / kTicks;
    const double fy = y_min + (y_max - y_min) * i / kTicks;
    const double px = kMarginLeft + plot_w * i / kTicks;
    const double py = kMarginTop + plot_h * (1.0 - static_cast<double>(i) / kTicks);
    out << "<line x1='" << px << "' y1='" << kMarginTop + plot_h << "' x2='" << px
        << "' y2='" << kMarginTop + plot_h + 5 << "' stroke='#333'/>\n"
        << "<text x='" << px << "' y='" << kMarginTop + plot_h + 18
        << "' text-anchor='middle' font-size='11' font-family='sans-serif'>"
        << format_tick(fx) << "</text>\n";
    const std::string ylab = log_y_ ? ("1e" + format_tick(fy)) : format_tick(fy);
    out << "<line x1='" << kMarginLeft - 5 << "' y1='" << py << "' x2='" << kMarginLeft
        << "' y2='" << py << "' stroke='#333'/>\n"
        << "<text x='" << kMarginLeft - 8 << "' y='" << py + 4
        << "' text-anchor='end' font-size='11' font-family='sans-serif'>" << ylab
        << "</text>\n";
  }
  out << "<text x='" << kMarginLeft + plot_w / 2 << "' y='" << kHeight - 12
      << "' text-anchor='middle' font-size='13' font-family='sans-serif'>" << x_label_
      << "</text>\n"
      << "<text x='18' y='" << kMarginTop + plot_h / 2
      << "' text-anchor='middle' font-size='13' font-family='sans-serif' transform='rotate(-90 18 "
      << kMarginTop + plot_h / 2 << ")'>" << y_label_ << "</text>\n";

  for (std::size_t s = 0; s < series_.size(); ++s) {
    const char* color = kPalette[s % (sizeof(kPalette) / sizeof(kPalette[0]))];
    out << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
    for (std::size_t i = 0; i < series_[s].x.size(); ++i) {
      if (log_y_ && !(series_[s].y[i] > 0.0)) continue;
      const auto [px, py] = to_px(series_[s].x[i], series_[s].y[i]);
      if (!std::isfinite(px) || !std::isfinite(py)) continue;
      out << px << "," << py << " ";
    }
    out << "'/>\n";
    const double ly = kMarginTop + 14.0 + 18.0 * static_cast<double>(s);
    out << "<line x1='" << kWidth - kMarginRight + 10 << "' y1='" << ly << "' x2='"
        << kWidth - kMarginRight + 34 << "' y2='" << ly << "' stroke='" << color
        << "' stroke-width='2'/>\n"
        << "<text x='" << kWidth - kMarginRight + 40 << "' y='" << ly + 4
        << "' font-size='11' font-family='sans-serif'>" << series_[s].name << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace gradflow
