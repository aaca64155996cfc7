#pragma once

// Small zero-dependency figure toolkit: RGB canvases, a PNG writer that
// emits stored (uncompressed) deflate blocks, a PGM fallback, the tissue
// palette and scatter/panel helpers for the pipeline's figures.

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "onh/image.hpp"

namespace onh::fig {

struct Rgb {
  uint8_t r = 0, g = 0, b = 0;
};

/// Tissue colors: vitreous black, RNFL+prelamina red, GCL+IPL green, ORL
/// blue, RPE yellow, choroid pink, sclera cyan, LC orange, noise white.
inline const std::array<Rgb, kNumClasses>& class_palette() {
  static const std::array<Rgb, kNumClasses> p = {{{0, 0, 0},
                                                  {220, 40, 40},
                                                  {40, 180, 60},
                                                  {50, 80, 230},
                                                  {235, 220, 50},
                                                  {240, 130, 180},
                                                  {60, 210, 220},
                                                  {245, 150, 40},
                                                  {255, 255, 255}}};
  return p;
}

struct Canvas {
  int width = 0, height = 0;
  std::vector<Rgb> px;

  Canvas() = default;
  Canvas(int w, int h, Rgb fill = {255, 255, 255}) : width(w), height(h), px(size_t(w) * h, fill) {}

  Rgb& at(int y, int x) { return px[size_t(y) * width + x]; }
  const Rgb& at(int y, int x) const { return px[size_t(y) * width + x]; }

  void blit(const Canvas& src, int y0, int x0) {
    for (int y = 0; y < src.height; ++y)
      for (int x = 0; x < src.width; ++x) {
        const int yy = y0 + y, xx = x0 + x;
        if (yy >= 0 && yy < height && xx >= 0 && xx < width) at(yy, xx) = src.at(y, x);
      }
  }

  void fill_rect(int y0, int x0, int h, int w, Rgb c) {
    for (int y = y0; y < y0 + h; ++y)
      for (int x = x0; x < x0 + w; ++x)
        if (y >= 0 && y < height && x >= 0 && x < width) at(y, x) = c;
  }
};

inline Canvas label_map_canvas(const LabelMap& m) {
  Canvas c(m.width, m.height);
  const auto& pal = class_palette();
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) c.at(y, x) = pal[m.at(y, x) % kNumClasses];
  return c;
}

inline Canvas intensity_canvas(const IntensityImage& img) {
  Canvas c(img.width, img.height);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const uint8_t v = uint8_t(std::min(255.0f, std::max(0.0f, img.at(y, x) * 255.0f)));
      c.at(y, x) = {v, v, v};
    }
  return c;
}

/// Side-by-side composition with a small gap.
inline Canvas hstack(const std::vector<Canvas>& panels, int gap = 4) {
  int w = 0, h = 0;
  for (const auto& p : panels) {
    w += p.width;
    h = std::max(h, p.height);
  }
  w += gap * int(panels.size() - 1);
  Canvas out(w, h, {230, 230, 230});
  int x = 0;
  for (const auto& p : panels) {
    out.blit(p, 0, x);
    x += p.width + gap;
  }
  return out;
}

// ---------------------------------------------------------------------------
// PNG output (stored deflate blocks, so no compression library is needed)
// and PGM fallback.
// ---------------------------------------------------------------------------

namespace detail {

inline uint32_t crc32(const uint8_t* data, size_t n, uint32_t crc = 0) {
  static uint32_t table[256];
  static bool init = false;
  if (!init) {
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      table[i] = c;
    }
    init = true;
  }
  crc ^= 0xffffffffu;
  for (size_t i = 0; i < n; ++i) crc = table[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
  return crc ^ 0xffffffffu;
}

inline void put_be32(std::string& s, uint32_t v) {
  for (int i = 3; i >= 0; --i) s.push_back(char((v >> (8 * i)) & 0xff));
}

inline void chunk(std::string& out, const char type[4], const std::string& payload) {
  put_be32(out, uint32_t(payload.size()));
  std::string body(type, 4);
  body += payload;
  out += body;
  put_be32(out, crc32(reinterpret_cast<const uint8_t*>(body.data()), body.size()));
}

}  // namespace detail

inline std::string encode_png(const Canvas& c) {
  std::string raw;  // filter byte 0 + RGB rows
  raw.reserve(size_t(c.height) * (1 + size_t(c.width) * 3));
  for (int y = 0; y < c.height; ++y) {
    raw.push_back(0);
    for (int x = 0; x < c.width; ++x) {
      const Rgb& p = c.at(y, x);
      raw.push_back(char(p.r));
      raw.push_back(char(p.g));
      raw.push_back(char(p.b));
    }
  }
  // zlib stream with stored blocks
  std::string z;
  z.push_back(0x78);
  z.push_back(0x01);
  size_t pos = 0;
  while (pos < raw.size() || raw.empty()) {
    const size_t n = std::min<size_t>(65535, raw.size() - pos);
    const bool final = pos + n == raw.size();
    z.push_back(final ? 1 : 0);
    z.push_back(char(n & 0xff));
    z.push_back(char(n >> 8));
    z.push_back(char(~n & 0xff));
    z.push_back(char((~n >> 8) & 0xff));
    z.append(raw, pos, n);
    pos += n;
    if (final) break;
  }
  uint32_t a = 1, b = 0;
  for (unsigned char ch : raw) {
    a = (a + ch) % 65521;
    b = (b + a) % 65521;
  }
  detail::put_be32(z, (b << 16) | a);

  std::string png("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  detail::put_be32(ihdr, uint32_t(c.width));
  detail::put_be32(ihdr, uint32_t(c.height));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // truecolor
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  detail::chunk(png, "IHDR", ihdr);
  detail::chunk(png, "IDAT", z);
  detail::chunk(png, "IEND", "");
  return png;
}

inline void write_png(const Canvas& c, const std::string& path) {
  write_file(path, encode_png(c));
}

inline void write_pgm(const IntensityImage& img, const std::string& path) {
  std::string s = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  for (float v : img.data) s.push_back(char(uint8_t(std::min(255.f, std::max(0.f, v * 255.f)))));
  write_file(path, s);
}

// ---------------------------------------------------------------------------
// Scatter plots.
// ---------------------------------------------------------------------------

struct ScatterPoint {
  double x = 0, y = 0;
  Rgb color{0, 0, 0};
  int size = 2;      // half-width of the dot
  bool star = false;  // draw as a 9x9 cross marker
};

/// Fixed-size scatter with auto-scaled axes and a thin frame.
inline Canvas scatter(const std::vector<ScatterPoint>& pts, int width = 500, int height = 400) {
  Canvas c(width, height);
  c.fill_rect(0, 0, 1, width, {0, 0, 0});
  c.fill_rect(height - 1, 0, 1, width, {0, 0, 0});
  for (int y = 0; y < height; ++y) {
    c.at(y, 0) = {0, 0, 0};
    c.at(y, width - 1) = {0, 0, 0};
  }
  if (pts.empty()) return c;
  double x0 = pts[0].x, x1 = pts[0].x, y0 = pts[0].y, y1 = pts[0].y;
  for (const auto& p : pts) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  const double xr = (x1 - x0) > 0 ? (x1 - x0) : 1.0, yr = (y1 - y0) > 0 ? (y1 - y0) : 1.0;
  const int margin = 14;
  for (const auto& p : pts) {
    const int px = margin + int((p.x - x0) / xr * (width - 2 * margin));
    const int py = height - margin - int((p.y - y0) / yr * (height - 2 * margin));
    if (p.star) {
      for (int d = -4; d <= 4; ++d) {
        if (px + d >= 0 && px + d < width && py >= 0 && py < height) c.at(py, px + d) = p.color;
        if (px >= 0 && px < width && py + d >= 0 && py + d < height) c.at(py + d, px) = p.color;
      }
    } else {
      c.fill_rect(py - p.size, px - p.size, 2 * p.size + 1, 2 * p.size + 1, p.color);
    }
  }
  return c;
}

}  // namespace onh::fig
