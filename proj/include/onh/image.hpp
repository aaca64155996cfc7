#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "onh/tensor.hpp"

namespace onh {

constexpr int kNumClasses = 9;

// Tissue class ids, in the fixed raster order used everywhere:
// 0 vitreous, 1 RNFL+prelamina, 2 GCL+IPL, 3 ORL, 4 RPE,
// 5 choroid, 6 sclera, 7 lamina cribrosa, 8 noise.
enum TissueClass : uint8_t {
  kVitreous = 0,
  kRnflPrelamina = 1,
  kGclIpl = 2,
  kOrl = 3,
  kRpe = 4,
  kChoroid = 5,
  kSclera = 6,
  kLamina = 7,
  kNoise = 8,
};

/// H x W raster of tissue-class ids in [0, classes).
struct LabelMap {
  int height = 0;
  int width = 0;
  int classes = kNumClasses;
  std::vector<uint8_t> data;  // row-major

  LabelMap() = default;
  LabelMap(int h, int w, int c = kNumClasses)
      : height(h), width(w), classes(c), data(size_t(h) * w, 0) {}

  uint8_t& at(int y, int x) { return data[size_t(y) * width + x]; }
  uint8_t at(int y, int x) const { return data[size_t(y) * width + x]; }
};

/// H x W reflectance raster with values in [0,1].
struct IntensityImage {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  IntensityImage() = default;
  IntensityImage(int h, int w) : height(h), width(w), data(size_t(h) * w, 0.f) {}

  float& at(int y, int x) { return data[size_t(y) * width + x]; }
  float at(int y, int x) const { return data[size_t(y) * width + x]; }
};

/// Checks every LabelMap invariant: ids in range, vitreous across the top
/// row, noise across the bottom row.
inline bool label_map_valid(const LabelMap& m, std::string* why = nullptr) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  if (m.height <= 0 || m.width <= 0) return fail("empty map");
  if (int(m.data.size()) != m.height * m.width) return fail("data size mismatch");
  for (uint8_t v : m.data)
    if (v >= m.classes) return fail("class id out of range");
  for (int x = 0; x < m.width; ++x) {
    if (m.at(0, x) != kVitreous) return fail("top row not vitreous");
    if (m.at(m.height - 1, x) != kNoise) return fail("bottom row not noise");
  }
  return true;
}

// ---------------------------------------------------------------------------
// File formats. Label maps: magic "ONHL", u16 LE height, u16 LE width,
// u8 classes, then height*width class-id bytes row-major. Intensity images:
// magic "ONHI", u16 LE height, u16 LE width, then height*width f32 LE.
// ---------------------------------------------------------------------------

namespace detail {
inline void put_u16(std::string& s, uint16_t v) {
  s.push_back(char(v & 0xff));
  s.push_back(char(v >> 8));
}
inline uint16_t get_u16(const uint8_t* p) { return uint16_t(p[0] | (p[1] << 8)); }
}  // namespace detail

inline std::string encode_label_map(const LabelMap& m) {
  std::string s = "ONHL";
  detail::put_u16(s, uint16_t(m.height));
  detail::put_u16(s, uint16_t(m.width));
  s.push_back(char(m.classes));
  s.append(reinterpret_cast<const char*>(m.data.data()), m.data.size());
  return s;
}

inline LabelMap decode_label_map(const std::string& s) {
  if (s.size() < 9 || s.compare(0, 4, "ONHL") != 0)
    throw std::runtime_error("not a label-map file");
  const uint8_t* p = reinterpret_cast<const uint8_t*>(s.data());
  LabelMap m(detail::get_u16(p + 4), detail::get_u16(p + 6), p[8]);
  if (s.size() != 9 + m.data.size()) throw std::runtime_error("truncated label-map file");
  std::memcpy(m.data.data(), p + 9, m.data.size());
  return m;
}

inline std::string encode_intensity(const IntensityImage& img) {
  std::string s = "ONHI";
  detail::put_u16(s, uint16_t(img.height));
  detail::put_u16(s, uint16_t(img.width));
  s.append(reinterpret_cast<const char*>(img.data.data()), img.data.size() * 4);
  return s;
}

inline IntensityImage decode_intensity(const std::string& s) {
  if (s.size() < 8 || s.compare(0, 4, "ONHI") != 0)
    throw std::runtime_error("not an intensity file");
  const uint8_t* p = reinterpret_cast<const uint8_t*>(s.data());
  IntensityImage img(detail::get_u16(p + 4), detail::get_u16(p + 6));
  if (s.size() != 8 + img.data.size() * 4) throw std::runtime_error("truncated intensity file");
  std::memcpy(img.data.data(), p + 8, img.data.size() * 4);
  return img;
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(bytes.data(), std::streamsize(bytes.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string s((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return s;
}

inline void save_label_map(const LabelMap& m, const std::string& path) {
  write_file(path, encode_label_map(m));
}
inline LabelMap load_label_map(const std::string& path) {
  return decode_label_map(read_file(path));
}
inline void save_intensity(const IntensityImage& img, const std::string& path) {
  write_file(path, encode_intensity(img));
}
inline IntensityImage load_intensity(const std::string& path) {
  return decode_intensity(read_file(path));
}

// ---------------------------------------------------------------------------
// Conversions to/from network tensors (NHWC).
// ---------------------------------------------------------------------------

/// One-hot encode a label map into channel c of sample n of a NHWC tensor.
inline void one_hot_into(const LabelMap& m, Tensor& t, int n) {
  const int H = m.height, W = m.width, C = m.classes;
  float* base = t.ptr() + size_t(n) * H * W * C;
  std::memset(base, 0, size_t(H) * W * C * sizeof(float));
  for (size_t i = 0; i < m.data.size(); ++i) base[i * C + m.data[i]] = 1.f;
}

inline Tensor one_hot(const LabelMap& m) {
  Tensor t({1, m.height, m.width, m.classes});
  one_hot_into(m, t, 0);
  return t;
}

/// Per-pixel argmax over the channel axis of sample n.
inline LabelMap argmax_map(const Tensor& t, int n = 0) {
  const int H = t.dim(1), W = t.dim(2), C = t.dim(3);
  LabelMap m(H, W, C);
  const float* base = t.ptr() + size_t(n) * H * W * C;
  for (size_t i = 0; i < size_t(H) * W; ++i) {
    const float* p = base + i * C;
    int best = 0;
    for (int c = 1; c < C; ++c)
      if (p[c] > p[best]) best = c;
    m.data[i] = uint8_t(best);
  }
  return m;
}

inline Tensor intensity_tensor(const IntensityImage& img) {
  Tensor t({1, img.height, img.width, 1});
  std::memcpy(t.ptr(), img.data.data(), img.data.size() * sizeof(float));
  return t;
}

}  // namespace onh
