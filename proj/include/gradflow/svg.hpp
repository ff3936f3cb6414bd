#pragma once

#include <string>
#include <vector>

namespace gradflow {

// Minimal polyline plotter writing standalone SVG files: axes, tick labels,
// a legend, optional log10 y scale. No external plotting dependency.
class SvgPlot {
 public:
  SvgPlot(std::string title, std::string x_label, std::string y_label);

  void add_series(std::string name, std::vector<double> x, std::vector<double> y);
  void set_log_y(bool log_y) { log_y_ = log_y; }
  // Provenance line (config hash, seed) embedded as an XML comment.
  void set_comment(std::string comment) { comment_ = std::move(comment); }

  void write(const std::string& path) const;

 private:
  struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
  };

  std::string title_;
  std::string x_label_;
  std::string y_label_;
  std::string comment_;
  bool log_y_ = false;
  std::vector<Series> series_;
};

}  // namespace gradflow
