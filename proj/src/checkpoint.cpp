#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "sdwan/nn.hpp"

// Checkpoint file layout (little-endian):
//   8 bytes  magic "SDWANCP1"
//   u32      schema version (1)
//   u32      entry count
//   entries: u16 name length, name bytes, u8 kind (0 = f64, 1 = i64),
//            u64 element count, raw 8-byte elements
// Raw doubles round-trip bit-exactly; no text formatting is involved.

namespace sdwan {

namespace {

constexpr char kMagic[8] = {'S', 'D', 'W', 'A', 'N', 'C', 'P', '1'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

void put_name(std::ofstream& os, const std::string& name) {
  if (name.size() > 0xffff)
    throw std::invalid_argument("checkpoint: entry name too long");
  put<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
}

std::string get_name(std::ifstream& is) {
  const std::uint16_t len = get<std::uint16_t>(is);
  std::string name(len, '\0');
  is.read(name.data(), len);
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return name;
}

}  // namespace

void Checkpoint::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path);
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, kVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(f64.size() + i64.size()));
  for (const auto& [name, data] : f64) {
    put_name(os, name);
    put<std::uint8_t>(os, 0);
    put<std::uint64_t>(os, data.size());
    os.write(reinterpret_cast<const char*>(data.data()),
             static_cast<std::streamsize>(data.size() * sizeof(double)));
  }
  for (const auto& [name, data] : i64) {
    put_name(os, name);
    put<std::uint8_t>(os, 1);
    put<std::uint64_t>(os, data.size());
    os.write(reinterpret_cast<const char*>(data.data()),
             static_cast<std::streamsize>(data.size() * sizeof(std::int64_t)));
  }
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  if (get<std::uint32_t>(is) != kVersion)
    throw std::runtime_error("checkpoint: unsupported version in " + path);

  Checkpoint ck;
  const std::uint32_t entries = get<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < entries; ++i) {
    const std::string name = get_name(is);
    const std::uint8_t kind = get<std::uint8_t>(is);
    const std::uint64_t count = get<std::uint64_t>(is);
    if (kind == 0) {
      std::vector<double> data(count);
      is.read(reinterpret_cast<char*>(data.data()),
              static_cast<std::streamsize>(count * sizeof(double)));
      if (!is) throw std::runtime_error("checkpoint: truncated file");
      ck.f64.emplace(name, std::move(data));
    } else if (kind == 1) {
      std::vector<std::int64_t> data(count);
      is.read(reinterpret_cast<char*>(data.data()),
              static_cast<std::streamsize>(count * sizeof(std::int64_t)));
      if (!is) throw std::runtime_error("checkpoint: truncated file");
      ck.i64.emplace(name, std::move(data));
    } else {
      throw std::runtime_error("checkpoint: unknown entry kind in " + path);
    }
  }
  return ck;
}

}  // namespace sdwan
