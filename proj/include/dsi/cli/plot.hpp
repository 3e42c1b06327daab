#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace dsi::cli {

// Tiny RGB raster canvas with a PNG writer (stored-deflate zlib stream, no
// external dependency). Good enough for line plots.
class Canvas {
 public:
  Canvas(int w, int h);

  int width() const { return w_; }
  int height() const { return h_; }

  void fill(uint8_t r, uint8_t g, uint8_t b);
  void set(int x, int y, uint8_t r, uint8_t g, uint8_t b);
  void line(int x0, int y0, int x1, int y1, uint8_t r, uint8_t g, uint8_t b);
  void rect(int x0, int y0, int x1, int y1, uint8_t r, uint8_t g, uint8_t b);

  void save_png(const std::string& path) const;

 private:
  int w_, h_;
  std::vector<uint8_t> px_;  // RGB rows
};

struct Series {
  std::vector<double> x, y;
  uint8_t r = 30, g = 60, b = 180;
};

struct Band {  // shaded x-interval (e.g. ground-truth critical windows)
  double x0 = 0, x1 = 0;
};

// Line plot with optional shaded bands; axes auto-scaled to the data with a
// y range that always includes [y_min_floor, y_max_floor] when finite.
void plot_lines(const std::string& path, const std::vector<Series>& series,
                const std::vector<Band>& bands = {},
                double y_min_floor = std::numeric_limits<double>::quiet_NaN(),
                double y_max_floor = std::numeric_limits<double>::quiet_NaN());

}  // namespace dsi::cli
