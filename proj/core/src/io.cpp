// SPDX-License-Identifier: Apache-2.0
#include "nwi/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace nwi {

namespace {

constexpr char kMagic[8] = {'N', 'W', 'I', 'M', 'A', 'P', '0', '1'};

void put_u32_le(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32_le(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64_le(std::ostream& os, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64_le(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_nwimap(const std::string& path, const Field& map, MapKind kind) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os.write(kMagic, 8);
  put_u32_le(os, static_cast<std::uint32_t>(map.nx()));
  put_u32_le(os, static_cast<std::uint32_t>(map.nz()));
  put_u32_le(os, static_cast<std::uint32_t>(kind));
  const char pad[12] = {};
  os.write(pad, 12);
  for (size_t k = 0; k < map.size(); ++k) put_f64_le(os, map[k]);
  if (!os) throw IoError("write failed: " + path);
}

Field read_nwimap(const std::string& path, MapKind* kind_out) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw IoError("bad NWIMAP01 magic in " + path);
  const std::uint32_t nx = get_u32_le(is);
  const std::uint32_t nz = get_u32_le(is);
  const std::uint32_t kind = get_u32_le(is);
  char pad[12];
  is.read(pad, 12);
  if (!is || nx == 0 || nz == 0) throw IoError("bad NWIMAP01 header in " + path);
  Field map(static_cast<int>(nx), static_cast<int>(nz));
  for (size_t k = 0; k < map.size(); ++k) map[k] = get_f64_le(is);
  if (!is) throw IoError("truncated NWIMAP01 payload in " + path);
  if (kind_out) *kind_out = static_cast<MapKind>(kind);
  return map;
}

void write_csv_map(const std::string& path, const Field& map) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  for (int i = 0; i < map.nx(); ++i) {
    for (int j = 0; j < map.nz(); ++j) {
      if (j) os << ',';
      os << fmt_double(map(i, j));
    }
    os << '\n';
  }
  if (!os) throw IoError("write failed: " + path);
}

Field read_csv_map(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open for reading: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) row.push_back(std::stod(tok));
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError("ragged CSV rows in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("empty CSV map in " + path);
  Field map(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
  for (int i = 0; i < map.nx(); ++i)
    for (int j = 0; j < map.nz(); ++j) map(i, j) = rows[i][j];
  return map;
}

void write_csv_channels(const std::string& path, const ChannelData& ch) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  for (int c = 0; c < ch.nc; ++c) {
    for (int n = 0; n < ch.nt; ++n) {
      if (n) os << ',';
      os << fmt_double(ch.at(c, n));
    }
    os << '\n';
  }
  if (!os) throw IoError("write failed: " + path);
}

ChannelData read_csv_channels(const std::string& path, double dt) {
  const Field f = read_csv_map(path);
  ChannelData ch(f.nx(), f.nz(), dt);
  for (int c = 0; c < ch.nc; ++c)
    for (int n = 0; n < ch.nt; ++n) ch.at(c, n) = f(c, n);
  return ch;
}

void write_pgm16(const std::string& path, const Field& map, const PropertyBounds& bounds) {
  if (!(bounds.max > bounds.min)) throw DegenerateBounds("pgm: bounds.max must exceed bounds.min");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "P5\n" << map.nz() << " " << map.nx() << "\n65535\n";
  const double scale = 65535.0 / (bounds.max - bounds.min);
  for (int i = 0; i < map.nx(); ++i) {
    for (int j = 0; j < map.nz(); ++j) {
      double v = (map(i, j) - bounds.min) * scale;
      if (v < 0.0) v = 0.0;
      if (v > 65535.0) v = 65535.0;
      const auto p = static_cast<std::uint16_t>(v + 0.5);
      const unsigned char b[2] = {static_cast<unsigned char>(p >> 8),
                                  static_cast<unsigned char>(p & 0xff)};
      os.write(reinterpret_cast<const char*>(b), 2);
    }
  }
  if (!os) throw IoError("write failed: " + path);
}

}  // namespace nwi
