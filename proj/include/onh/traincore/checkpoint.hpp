#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "onh/image.hpp"
#include "onh/traincore/network.hpp"

namespace onh::traincore {

/// Snapshot of a network's named parameter tensors plus the epoch it was
/// taken at and the validation loss that selected it. Reloading restores
/// bit-identical forward outputs.
struct Checkpoint {
  uint64_t topo_hash = 0;
  std::vector<std::pair<std::string, Tensor>> tensors;
  int epoch = 0;
  float val_loss = 0.f;

  static Checkpoint capture(Network& net, int epoch, float val_loss) {
    Checkpoint ck;
    ck.topo_hash = net.topology_hash();
    ck.epoch = epoch;
    ck.val_loss = val_loss;
    for (auto& p : net.params()) ck.tensors.emplace_back(p.name, p.param->value);
    return ck;
  }

  void apply_to(Network& net) const {
    if (net.topology_hash() != topo_hash)
      throw std::runtime_error("checkpoint topology hash does not match network");
    std::map<std::string, const Tensor*> by_name;
    for (auto& [name, t] : tensors) by_name[name] = &t;
    for (auto& p : net.params()) {
      auto it = by_name.find(p.name);
      if (it == by_name.end()) throw std::runtime_error("checkpoint missing tensor " + p.name);
      if (it->second->shape != p.param->value.shape)
        throw std::runtime_error("checkpoint tensor shape mismatch for " + p.name);
      p.param->value = *it->second;
    }
  }
};

// File format: magic "ONHW", topology hash (u64 LE), tensor count (u32 LE),
// then per tensor: name length (u16 LE) + UTF-8 name, rank (u8), dims
// (u32 LE each), raw f32 LE data. The epoch index and validation loss ride
// along as two extra named meta tensors.

namespace detail {
inline void put_u32(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(char((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& s, uint64_t v) {
  for (int i = 0; i < 8; ++i) s.push_back(char((v >> (8 * i)) & 0xff));
}
inline uint32_t get_u32(const uint8_t* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}
inline uint64_t get_u64(const uint8_t* p) {
  return uint64_t(get_u32(p)) | (uint64_t(get_u32(p + 4)) << 32);
}
}  // namespace detail

inline std::string encode_checkpoint(const Checkpoint& ck) {
  std::vector<std::pair<std::string, Tensor>> all = ck.tensors;
  {
    Tensor epoch({1});
    epoch.data[0] = float(ck.epoch);
    Tensor vloss({1});
    vloss.data[0] = ck.val_loss;
    all.emplace_back("meta.epoch", epoch);
    all.emplace_back("meta.val_loss", vloss);
  }
  std::string s = "ONHW";
  detail::put_u64(s, ck.topo_hash);
  detail::put_u32(s, uint32_t(all.size()));
  for (auto& [name, t] : all) {
    onh::detail::put_u16(s, uint16_t(name.size()));
    s += name;
    s.push_back(char(t.rank()));
    for (int d : t.shape) detail::put_u32(s, uint32_t(d));
    s.append(reinterpret_cast<const char*>(t.data.data()), t.numel() * 4);
  }
  return s;
}

inline Checkpoint decode_checkpoint(const std::string& s) {
  if (s.size() < 16 || s.compare(0, 4, "ONHW") != 0)
    throw std::runtime_error("not a checkpoint file");
  const uint8_t* p = reinterpret_cast<const uint8_t*>(s.data());
  const uint8_t* end = p + s.size();
  Checkpoint ck;
  ck.topo_hash = detail::get_u64(p + 4);
  uint32_t count = detail::get_u32(p + 12);
  p += 16;
  for (uint32_t i = 0; i < count; ++i) {
    if (p + 2 > end) throw std::runtime_error("truncated checkpoint");
    uint16_t nlen = onh::detail::get_u16(p);
    p += 2;
    if (p + nlen + 1 > end) throw std::runtime_error("truncated checkpoint");
    std::string name(reinterpret_cast<const char*>(p), nlen);
    p += nlen;
    int rank = *p++;
    Shape shape;
    shape.resize(size_t(rank));
    if (p + 4 * rank > end) throw std::runtime_error("truncated checkpoint");
    for (int d = 0; d < rank; ++d) {
      shape[size_t(d)] = int(detail::get_u32(p));
      p += 4;
    }
    Tensor t(shape);
    if (p + t.numel() * 4 > end) throw std::runtime_error("truncated checkpoint");
    std::memcpy(t.data.data(), p, t.numel() * 4);
    p += t.numel() * 4;
    if (name == "meta.epoch")
      ck.epoch = int(t.data[0]);
    else if (name == "meta.val_loss")
      ck.val_loss = t.data[0];
    else
      ck.tensors.emplace_back(name, std::move(t));
  }
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  write_file(path, encode_checkpoint(ck));
}
inline Checkpoint load_checkpoint(const std::string& path) {
  return decode_checkpoint(read_file(path));
}

}  // namespace onh::traincore
