// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "nwi/grid.hpp"
#include "nwi/phantom.hpp"

namespace nwi {

/// Map-kind tag of the NWIMAP01 binary header.
enum class MapKind : std::uint32_t {
  generic = 0,
  sos = 1,
  density = 2,
  attenuation = 3,
  nonlinearity = 4,
};

/// Flat little-endian float64 binary with a 32-byte header:
/// magic "NWIMAP01", nx u32, nz u32, kind u32, zero padding.
void write_nwimap(const std::string& path, const Field& map, MapKind kind);
Field read_nwimap(const std::string& path, MapKind* kind_out = nullptr);

/// Row-major CSV, one grid row per line, round-trip exact.
void write_csv_map(const std::string& path, const Field& map);
Field read_csv_map(const std::string& path);

/// Channel data as CSV, one row per element.
void write_csv_channels(const std::string& path, const ChannelData& ch);
ChannelData read_csv_channels(const std::string& path, double dt);

/// 16-bit binary PGM (P5, maxval 65535), linearly scaled by bounds.
void write_pgm16(const std::string& path, const Field& map, const PropertyBounds& bounds);

}  // namespace nwi
