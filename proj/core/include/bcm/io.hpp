#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "bcm/grid.hpp"

namespace bcm {

/// FNV-1a 64-bit over a byte range.
std::uint64_t fnv1a64(const void* data, std::size_t len,
                      std::uint64_t seed = 0xcbf29ce484222325ull);

/// FNV-1a over the raw little-endian bytes of a double vector.
std::uint64_t fnv1a64(const std::vector<double>& v);

/// Writes a Field2 as CSV: one comment header line carrying the grid layout,
/// then one line per j-row, values printed with max_digits10 so a reload is
/// bit-exact.  NaN cells are written as "nan".
void save_field_csv(const Field2& f, const std::string& path);
Field2 load_field_csv(const std::string& path);

/// 8-bit binary PGM (P5).  Values are affinely mapped from [lo, hi] to
/// [0, 255]; pass lo >= hi to use the field's own finite min/max.  NaN maps
/// to 0.  The image is written top row first (j = ny-1 down to 0) so the
/// boundary line lands at the top of the picture.
void save_field_pgm(const Field2& f, const std::string& path,
                    double lo = 0.0, double hi = -1.0);

/// Little-endian f64 block I/O used by the dataset container:
///   u64 payload length in bytes | payload | u64 FNV-1a of payload.
void write_block(std::ostream& os, const std::vector<double>& v);
std::vector<double> read_block(std::istream& is, const std::string& what);

/// Whole-file text helpers.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace bcm
