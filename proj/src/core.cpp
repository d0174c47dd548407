#include "lanegraph/core.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace lanegraph {

namespace {

void put_u32_le(std::string& out, std::uint32_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char((v >> 8) & 0xff));
  out.push_back(char((v >> 16) & 0xff));
  out.push_back(char((v >> 24) & 0xff));
}

void put_f32_le(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32_le(out, bits);
}

std::uint32_t get_u32_le(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
         (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

}  // namespace

void write_tensor(const GridMap& map, const std::string& path) {
  std::string buf;
  buf.reserve(16 + map.data.size() * 4);
  buf.append("LGT1");
  put_u32_le(buf, std::uint32_t(map.channels));
  put_u32_le(buf, std::uint32_t(map.height));
  put_u32_le(buf, std::uint32_t(map.width));
  for (double v : map.data) {
    if (!std::isfinite(v)) {
      throw std::runtime_error("non-finite tensor element");
    }
    put_f32_le(buf, float(v));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(buf.data(), std::streamsize(buf.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

GridMap read_tensor(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());
  if (buf.size() < 16 || buf.compare(0, 4, "LGT1") != 0) {
    throw std::runtime_error("unrecognized format: " + path);
  }
  const unsigned char* p = reinterpret_cast<const unsigned char*>(buf.data());
  std::uint32_t channels = get_u32_le(p + 4);
  std::uint32_t height = get_u32_le(p + 8);
  std::uint32_t width = get_u32_le(p + 12);
  std::size_t count = std::size_t(channels) * height * width;
  if (buf.size() != 16 + count * 4) {
    throw std::runtime_error("truncated tensor: " + path);
  }
  GridMap m;
  m.channels = int(channels);
  m.height = int(height);
  m.width = int(width);
  m.data.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::uint32_t bits = get_u32_le(p + 16 + k * 4);
    float v;
    std::memcpy(&v, &bits, 4);
    m.data[k] = double(v);
  }
  return m;
}

void write_ppm(const GridMap& map, int channel, const std::string& path) {
  if (channel < 0 || channel >= map.channels) {
    throw std::invalid_argument("channel out of range");
  }
  std::string buf;
  char header[64];
  std::snprintf(header, sizeof(header), "P6\n%d %d\n255\n", map.width,
                map.height);
  buf.append(header);
  for (int i = 0; i < map.height; ++i) {
    for (int j = 0; j < map.width; ++j) {
      double v = std::clamp(map.at(channel, i, j), 0.0, 1.0);
      char g = char(int(v * 255.0 + 0.5));
      buf.push_back(g);
      buf.push_back(g);
      buf.push_back(g);
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.write(buf.data(), std::streamsize(buf.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace lanegraph
