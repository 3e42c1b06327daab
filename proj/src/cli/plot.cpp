#include "dsi/cli/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "dsi/common.hpp"

namespace dsi::cli {

Canvas::Canvas(int w, int h) : w_(w), h_(h), px_(static_cast<size_t>(w) * h * 3, 255) {}

void Canvas::fill(uint8_t r, uint8_t g, uint8_t b) {
  for (size_t i = 0; i < px_.size(); i += 3) {
    px_[i] = r;
    px_[i + 1] = g;
    px_[i + 2] = b;
  }
}

void Canvas::set(int x, int y, uint8_t r, uint8_t g, uint8_t b) {
  if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
  const size_t i = (static_cast<size_t>(y) * w_ + x) * 3;
  px_[i] = r;
  px_[i + 1] = g;
  px_[i + 2] = b;
}

void Canvas::line(int x0, int y0, int x1, int y1, uint8_t r, uint8_t g,
                  uint8_t b) {
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    set(x0, y0, r, g, b);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void Canvas::rect(int x0, int y0, int x1, int y1, uint8_t r, uint8_t g,
                  uint8_t b) {
  for (int y = std::max(0, y0); y <= std::min(h_ - 1, y1); ++y)
    for (int x = std::max(0, x0); x <= std::min(w_ - 1, x1); ++x)
      set(x, y, r, g, b);
}

namespace {

uint32_t crc32_of(const uint8_t* data, size_t n, uint32_t crc = 0xffffffffu) {
  static uint32_t table[256];
  static bool have_table = false;
  if (!have_table) {
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      table[i] = c;
    }
    have_table = true;
  }
  for (size_t i = 0; i < n; ++i) crc = table[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
  return crc;
}

void put_u32_be(std::vector<uint8_t>& v, uint32_t x) {
  v.push_back(x >> 24);
  v.push_back((x >> 16) & 0xff);
  v.push_back((x >> 8) & 0xff);
  v.push_back(x & 0xff);
}

void write_chunk(std::ostream& os, const char type[4],
                 const std::vector<uint8_t>& data) {
  std::vector<uint8_t> hdr;
  put_u32_be(hdr, static_cast<uint32_t>(data.size()));
  os.write(reinterpret_cast<const char*>(hdr.data()), 4);
  std::vector<uint8_t> body(type, type + 4);
  body.insert(body.end(), data.begin(), data.end());
  os.write(reinterpret_cast<const char*>(body.data()),
           static_cast<std::streamsize>(body.size()));
  std::vector<uint8_t> crc;
  put_u32_be(crc, crc32_of(body.data(), body.size()) ^ 0xffffffffu);
  os.write(reinterpret_cast<const char*>(crc.data()), 4);
}

// zlib stream with stored (uncompressed) deflate blocks.
std::vector<uint8_t> zlib_store(const std::vector<uint8_t>& raw) {
  std::vector<uint8_t> out;
  out.push_back(0x78);
  out.push_back(0x01);
  size_t pos = 0;
  while (pos < raw.size()) {
    const size_t n = std::min<size_t>(65535, raw.size() - pos);
    const bool last = pos + n == raw.size();
    out.push_back(last ? 1 : 0);
    out.push_back(n & 0xff);
    out.push_back((n >> 8) & 0xff);
    out.push_back(~n & 0xff);
    out.push_back((~n >> 8) & 0xff);
    out.insert(out.end(), raw.begin() + pos, raw.begin() + pos + n);
    pos += n;
  }
  uint32_t a = 1, b = 0;
  for (uint8_t byte : raw) {
    a = (a + byte) % 65521;
    b = (b + a) % 65521;
  }
  put_u32_be(out, (b << 16) | a);
  return out;
}

}  // namespace

void Canvas::save_png(const std::string& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open for writing: " + path);
  static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  os.write(reinterpret_cast<const char*>(sig), 8);

  std::vector<uint8_t> ihdr;
  put_u32_be(ihdr, w_);
  put_u32_be(ihdr, h_);
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // RGB
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  write_chunk(os, "IHDR", ihdr);

  std::vector<uint8_t> raw;
  raw.reserve((static_cast<size_t>(w_) * 3 + 1) * h_);
  for (int y = 0; y < h_; ++y) {
    raw.push_back(0);  // filter: none
    raw.insert(raw.end(), px_.begin() + static_cast<size_t>(y) * w_ * 3,
               px_.begin() + static_cast<size_t>(y + 1) * w_ * 3);
  }
  write_chunk(os, "IDAT", zlib_store(raw));
  write_chunk(os, "IEND", {});
  if (!os) throw FormatError("write failed: " + path);
}

void plot_lines(const std::string& path, const std::vector<Series>& series,
                const std::vector<Band>& bands, double y_min_floor,
                double y_max_floor) {
  const int w = 640, h = 360, ml = 50, mr = 15, mt = 15, mb = 35;
  Canvas c(w, h);

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series)
    for (size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (!std::isfinite(xmin)) {
    xmin = 0;
    xmax = 1;
    ymin = 0;
    ymax = 1;
  }
  if (std::isfinite(y_min_floor)) ymin = std::min(ymin, y_min_floor);
  if (std::isfinite(y_max_floor)) ymax = std::max(ymax, y_max_floor);
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;

  auto px = [&](double x) {
    return ml + static_cast<int>((x - xmin) / (xmax - xmin) * (w - ml - mr));
  };
  auto py = [&](double y) {
    return h - mb -
           static_cast<int>((y - ymin) / (ymax - ymin) * (h - mt - mb));
  };

  for (const auto& b : bands)
    c.rect(px(b.x0), mt, px(b.x1), h - mb, 225, 235, 225);

  // Axes.
  c.line(ml, mt, ml, h - mb, 0, 0, 0);
  c.line(ml, h - mb, w - mr, h - mb, 0, 0, 0);

  for (const auto& s : series)
    for (size_t i = 1; i < s.x.size(); ++i)
      c.line(px(s.x[i - 1]), py(s.y[i - 1]), px(s.x[i]), py(s.y[i]), s.r, s.g,
             s.b);
  c.save_png(path);
}

}  // namespace dsi::cli
