#include "wsod/plot.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace wsod::plot {

namespace {

// 5x7 glyphs for the characters the plots need; column-major bit rows
struct Glyph {
  char c;
  std::uint8_t rows[7];
};

const Glyph kFont[] = {
    {'0', {0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e}},
    {'1', {0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e}},
    {'2', {0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f}},
    {'3', {0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e}},
    {'4', {0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02}},
    {'5', {0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e}},
    {'6', {0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e}},
    {'7', {0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e}},
    {'9', {0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0c, 0x0c}},
    {'-', {0x00, 0x00, 0x00, 0x1f, 0x00, 0x00, 0x00}},
    {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1f}},
    {'/', {0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10}},
    {'+', {0x00, 0x04, 0x04, 0x1f, 0x04, 0x04, 0x00}},
    {'=', {0x00, 0x00, 0x1f, 0x00, 0x1f, 0x00, 0x00}},
    {':', {0x00, 0x0c, 0x0c, 0x00, 0x0c, 0x0c, 0x00}},
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
    {'a', {0x00, 0x00, 0x0e, 0x01, 0x0f, 0x11, 0x0f}},
    {'b', {0x10, 0x10, 0x1e, 0x11, 0x11, 0x11, 0x1e}},
    {'c', {0x00, 0x00, 0x0e, 0x11, 0x10, 0x11, 0x0e}},
    {'d', {0x01, 0x01, 0x0f, 0x11, 0x11, 0x11, 0x0f}},
    {'e', {0x00, 0x00, 0x0e, 0x11, 0x1f, 0x10, 0x0e}},
    {'f', {0x06, 0x08, 0x1e, 0x08, 0x08, 0x08, 0x08}},
    {'g', {0x00, 0x0f, 0x11, 0x0f, 0x01, 0x11, 0x0e}},
    {'h', {0x10, 0x10, 0x1e, 0x11, 0x11, 0x11, 0x11}},
    {'i', {0x04, 0x00, 0x0c, 0x04, 0x04, 0x04, 0x0e}},
    {'k', {0x10, 0x10, 0x12, 0x14, 0x18, 0x14, 0x12}},
    {'l', {0x0c, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0e}},
    {'m', {0x00, 0x00, 0x1a, 0x15, 0x15, 0x15, 0x15}},
    {'n', {0x00, 0x00, 0x1e, 0x11, 0x11, 0x11, 0x11}},
    {'o', {0x00, 0x00, 0x0e, 0x11, 0x11, 0x11, 0x0e}},
    {'p', {0x00, 0x1e, 0x11, 0x1e, 0x10, 0x10, 0x10}},
    {'q', {0x00, 0x0f, 0x11, 0x0f, 0x01, 0x01, 0x01}},
    {'r', {0x00, 0x00, 0x16, 0x18, 0x10, 0x10, 0x10}},
    {'s', {0x00, 0x00, 0x0f, 0x10, 0x0e, 0x01, 0x1e}},
    {'t', {0x08, 0x08, 0x1e, 0x08, 0x08, 0x08, 0x06}},
    {'u', {0x00, 0x00, 0x11, 0x11, 0x11, 0x11, 0x0f}},
    {'v', {0x00, 0x00, 0x11, 0x11, 0x11, 0x0a, 0x04}},
    {'w', {0x00, 0x00, 0x15, 0x15, 0x15, 0x15, 0x0a}},
    {'x', {0x00, 0x00, 0x11, 0x0a, 0x04, 0x0a, 0x11}},
    {'y', {0x00, 0x11, 0x11, 0x0f, 0x01, 0x11, 0x0e}},
    {'z', {0x00, 0x00, 0x1f, 0x02, 0x04, 0x08, 0x1f}},
    {'A', {0x0e, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11}},
    {'I', {0x0e, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0e}},
    {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
    {'P', {0x1e, 0x11, 0x11, 0x1e, 0x10, 0x10, 0x10}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e}},
};

const Glyph* find_glyph(char c) {
  for (const Glyph& g : kFont)
    if (g.c == c) return &g;
  return nullptr;
}

void write_be32(std::ofstream& f, std::uint32_t v) {
  std::uint8_t b[4] = {static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16),
                       static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)};
  f.write(reinterpret_cast<char*>(b), 4);
}

void write_chunk(std::ofstream& f, const char* type, const std::vector<std::uint8_t>& payload) {
  write_be32(f, static_cast<std::uint32_t>(payload.size()));
  f.write(type, 4);
  if (!payload.empty())
    f.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
  if (!payload.empty()) crc = crc32(crc, payload.data(), static_cast<uInt>(payload.size()));
  write_be32(f, static_cast<std::uint32_t>(crc));
}

}  // namespace

Canvas::Canvas(std::size_t w, std::size_t h) : w_(w), h_(h), rgb_(w * h * 3, 255) {}

void Canvas::fill(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  for (std::size_t i = 0; i < w_ * h_; ++i) {
    rgb_[i * 3] = r;
    rgb_[i * 3 + 1] = g;
    rgb_[i * 3 + 2] = b;
  }
}

void Canvas::pixel(std::ptrdiff_t x, std::ptrdiff_t y, std::uint8_t r, std::uint8_t g,
                   std::uint8_t b) {
  if (x < 0 || y < 0 || x >= static_cast<std::ptrdiff_t>(w_) ||
      y >= static_cast<std::ptrdiff_t>(h_))
    return;
  std::size_t i = (static_cast<std::size_t>(y) * w_ + static_cast<std::size_t>(x)) * 3;
  rgb_[i] = r;
  rgb_[i + 1] = g;
  rgb_[i + 2] = b;
}

void Canvas::line(double x0, double y0, double x1, double y1, std::uint8_t r, std::uint8_t g,
                  std::uint8_t b) {
  double dx = x1 - x0, dy = y1 - y0;
  int steps = static_cast<int>(std::max(std::abs(dx), std::abs(dy))) + 1;
  for (int i = 0; i <= steps; ++i) {
    double t = static_cast<double>(i) / steps;
    pixel(static_cast<std::ptrdiff_t>(std::lround(x0 + t * dx)),
          static_cast<std::ptrdiff_t>(std::lround(y0 + t * dy)), r, g, b);
  }
}

void Canvas::rect(std::ptrdiff_t x, std::ptrdiff_t y, std::ptrdiff_t w, std::ptrdiff_t h,
                  std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  for (std::ptrdiff_t yy = y; yy < y + h; ++yy)
    for (std::ptrdiff_t xx = x; xx < x + w; ++xx) pixel(xx, yy, r, g, b);
}

void Canvas::text(std::ptrdiff_t x, std::ptrdiff_t y, const std::string& s, std::uint8_t r,
                  std::uint8_t g, std::uint8_t b, int scale) {
  std::ptrdiff_t cx = x;
  for (char c : s) {
    const Glyph* gl = find_glyph(c);
    if (gl) {
      for (int row = 0; row < 7; ++row)
        for (int col = 0; col < 5; ++col)
          if (gl->rows[row] & (1 << (4 - col)))
            for (int sy = 0; sy < scale; ++sy)
              for (int sx = 0; sx < scale; ++sx)
                pixel(cx + col * scale + sx, y + row * scale + sy, r, g, b);
    }
    cx += 6 * scale;
  }
}

void Canvas::save_png(const std::string& path) const {
  // filter byte 0 per scanline, then one zlib stream
  std::vector<std::uint8_t> raw((w_ * 3 + 1) * h_);
  for (std::size_t y = 0; y < h_; ++y) {
    raw[y * (w_ * 3 + 1)] = 0;
    std::memcpy(&raw[y * (w_ * 3 + 1) + 1], &rgb_[y * w_ * 3], w_ * 3);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw std::runtime_error("png deflate failed");
  compressed.resize(bound);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  f.write(reinterpret_cast<const char*>(sig), 8);

  std::vector<std::uint8_t> ihdr(13);
  auto put32 = [](std::vector<std::uint8_t>& v, std::size_t off, std::uint32_t x) {
    v[off] = static_cast<std::uint8_t>(x >> 24);
    v[off + 1] = static_cast<std::uint8_t>(x >> 16);
    v[off + 2] = static_cast<std::uint8_t>(x >> 8);
    v[off + 3] = static_cast<std::uint8_t>(x);
  };
  put32(ihdr, 0, static_cast<std::uint32_t>(w_));
  put32(ihdr, 4, static_cast<std::uint32_t>(h_));
  ihdr[8] = 8;   // bit depth
  ihdr[9] = 2;   // truecolor
  ihdr[10] = ihdr[11] = ihdr[12] = 0;
  write_chunk(f, "IHDR", ihdr);
  write_chunk(f, "IDAT", compressed);
  write_chunk(f, "IEND", {});
}

void line_plot(const std::string& path, const std::string& title,
               const std::vector<Series>& series, const std::string& xlabel,
               const std::string& ylabel) {
  const std::size_t w = 640, h = 420;
  const double ml = 70, mr = 20, mt = 40, mb = 50;
  Canvas c(w, h);
  c.fill(255, 255, 255);

  double xmin = 1e300, xmax = -1e300, ymin = 0.0, ymax = -1e300;
  for (const Series& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;
  ymax *= 1.08;

  auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr); };
  auto sy = [&](double y) { return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb); };

  c.line(ml, h - mb, w - mr, h - mb, 0, 0, 0);
  c.line(ml, h - mb, ml, mt, 0, 0, 0);
  c.text(10, 8, title, 0, 0, 0);
  c.text(static_cast<std::ptrdiff_t>(w / 2 - 3 * xlabel.size()),
         static_cast<std::ptrdiff_t>(h - 18), xlabel, 0, 0, 0);
  c.text(4, static_cast<std::ptrdiff_t>(mt - 16), ylabel, 0, 0, 0);

  for (int t = 0; t <= 4; ++t) {
    double xv = xmin + (xmax - xmin) * t / 4.0;
    double yv = ymin + (ymax - ymin) * t / 4.0;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", xv);
    c.text(static_cast<std::ptrdiff_t>(sx(xv)) - 10, static_cast<std::ptrdiff_t>(h - mb) + 6, buf,
           60, 60, 60);
    std::snprintf(buf, sizeof(buf), "%g", yv);
    c.text(6, static_cast<std::ptrdiff_t>(sy(yv)) - 3, buf, 60, 60, 60);
    c.line(sx(xv), h - mb, sx(xv), h - mb + 3, 0, 0, 0);
  }

  std::ptrdiff_t legend_y = static_cast<std::ptrdiff_t>(mt);
  for (const Series& s : series) {
    for (std::size_t i = 1; i < s.x.size(); ++i)
      c.line(sx(s.x[i - 1]), sy(s.y[i - 1]), sx(s.x[i]), sy(s.y[i]), s.r, s.g, s.b);
    for (std::size_t i = 0; i < s.x.size(); ++i)
      c.rect(static_cast<std::ptrdiff_t>(sx(s.x[i])) - 2,
             static_cast<std::ptrdiff_t>(sy(s.y[i])) - 2, 4, 4, s.r, s.g, s.b);
    c.rect(static_cast<std::ptrdiff_t>(w) - 150, legend_y, 10, 10, s.r, s.g, s.b);
    c.text(static_cast<std::ptrdiff_t>(w) - 135, legend_y + 1, s.label, 0, 0, 0);
    legend_y += 16;
  }
  c.save_png(path);
}

void heatmap(const std::string& path, const std::string& title,
             const std::vector<std::vector<double>>& values,
             const std::vector<std::string>& row_labels,
             const std::vector<std::string>& col_labels) {
  const std::size_t rows = values.size(), cols = values.empty() ? 0 : values[0].size();
  const std::size_t cell = 64;
  const std::size_t ml = 70, mt = 40, mb = 20, mr = 20;
  Canvas c(ml + cols * cell + mr, mt + rows * cell + mb);
  c.fill(255, 255, 255);
  c.text(10, 8, title, 0, 0, 0);

  double vmin = 1e300, vmax = -1e300;
  for (const auto& r : values)
    for (double v : r) {
      vmin = std::min(vmin, v);
      vmax = std::max(vmax, v);
    }
  if (vmax <= vmin) vmax = vmin + 1e-12;

  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      double t = (values[i][j] - vmin) / (vmax - vmin);
      // blue -> yellow
      auto r8 = static_cast<std::uint8_t>(40 + 215 * t);
      auto g8 = static_cast<std::uint8_t>(60 + 180 * t);
      auto b8 = static_cast<std::uint8_t>(200 - 160 * t);
      c.rect(static_cast<std::ptrdiff_t>(ml + j * cell), static_cast<std::ptrdiff_t>(mt + i * cell),
             static_cast<std::ptrdiff_t>(cell) - 2, static_cast<std::ptrdiff_t>(cell) - 2, r8, g8,
             b8);
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%.3f", values[i][j]);
      c.text(static_cast<std::ptrdiff_t>(ml + j * cell) + 6,
             static_cast<std::ptrdiff_t>(mt + i * cell + cell / 2) - 4, buf, 0, 0, 0);
    }
    if (i < row_labels.size())
      c.text(6, static_cast<std::ptrdiff_t>(mt + i * cell + cell / 2) - 4, row_labels[i], 0, 0, 0);
  }
  for (std::size_t j = 0; j < cols && j < col_labels.size(); ++j)
    c.text(static_cast<std::ptrdiff_t>(ml + j * cell) + 6, static_cast<std::ptrdiff_t>(mt) - 14,
           col_labels[j], 0, 0, 0);
  c.save_png(path);
}

}  // namespace wsod::plot
