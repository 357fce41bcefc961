#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace bpre {

// Deterministic CSV assembly: doubles are printed with %.17g so reruns of the
// same binary produce byte-identical files.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> columns);
  void add_row(std::span<const double> values);
  void add_row_mixed(std::span<const std::string> values);
  const std::string& text() const { return text_; }
  static std::string format_double(double v);

 private:
  std::size_t columns_;
  std::string text_;
};

std::string sha256_hex(std::string_view data);

void write_file(const std::filesystem::path& path, std::string_view data);
std::string read_file(const std::filesystem::path& path);

// Minimal standalone SVG line plot; one polyline per series.
struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};
std::string svg_line_plot(const std::string& title,
                          const std::vector<SvgSeries>& series, bool log_x,
                          bool log_y);

}  // namespace bpre
