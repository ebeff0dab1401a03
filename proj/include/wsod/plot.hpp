#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace wsod::plot {

// Minimal raster canvas with a PNG writer; enough for the bench line plot
// and the sensitivity heatmap.
class Canvas {
 public:
  Canvas(std::size_t w, std::size_t h);

  void fill(std::uint8_t r, std::uint8_t g, std::uint8_t b);
  void pixel(std::ptrdiff_t x, std::ptrdiff_t y, std::uint8_t r, std::uint8_t g, std::uint8_t b);
  void line(double x0, double y0, double x1, double y1, std::uint8_t r, std::uint8_t g,
            std::uint8_t b);
  void rect(std::ptrdiff_t x, std::ptrdiff_t y, std::ptrdiff_t w, std::ptrdiff_t h,
            std::uint8_t r, std::uint8_t g, std::uint8_t b);
  // 5x7 bitmap font (digits, letters, a few symbols), scaled by `scale`
  void text(std::ptrdiff_t x, std::ptrdiff_t y, const std::string& s, std::uint8_t r,
            std::uint8_t g, std::uint8_t b, int scale = 1);

  void save_png(const std::string& path) const;

  std::size_t width() const { return w_; }
  std::size_t height() const { return h_; }

 private:
  std::size_t w_, h_;
  std::vector<std::uint8_t> rgb_;
};

struct Series {
  std::string label;
  std::vector<double> x, y;
  std::uint8_t r = 0, g = 0, b = 0;
};

void line_plot(const std::string& path, const std::string& title,
               const std::vector<Series>& series, const std::string& xlabel,
               const std::string& ylabel);

// values indexed [row][col]; row/col labels drawn along the axes
void heatmap(const std::string& path, const std::string& title,
             const std::vector<std::vector<double>>& values,
             const std::vector<std::string>& row_labels,
             const std::vector<std::string>& col_labels);

}  // namespace wsod::plot
