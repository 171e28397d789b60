#include "bcm/io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace bcm {

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace {

// Doubles are serialized as little-endian IEEE-754 bit patterns.
void le_bytes(const std::vector<double>& v, std::vector<unsigned char>& out) {
  out.resize(v.size() * 8);
  for (std::size_t k = 0; k < v.size(); ++k) {
    std::uint64_t bits;
    std::memcpy(&bits, &v[k], 8);
    for (int b = 0; b < 8; ++b)
      out[k * 8 + b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xff);
  }
}

void from_le_bytes(const std::vector<unsigned char>& in, std::vector<double>& v) {
  v.resize(in.size() / 8);
  for (std::size_t k = 0; k < v.size(); ++k) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
      bits |= static_cast<std::uint64_t>(in[k * 8 + b]) << (8 * b);
    std::memcpy(&v[k], &bits, 8);
  }
}

}  // namespace

std::uint64_t fnv1a64(const std::vector<double>& v) {
  std::vector<unsigned char> bytes;
  le_bytes(v, bytes);
  return fnv1a64(bytes.data(), bytes.size());
}

void save_field_csv(const Field2& f, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  const Grid2& g = f.grid;
  os.precision(std::numeric_limits<double>::max_digits10);
  os << "# grid nx=" << g.nx << " ny=" << g.ny << " x0=" << g.x0
     << " y0=" << g.y0 << " dx=" << g.dx << " dy=" << g.dy << "\n";
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      if (i) os << ',';
      double val = f.at(i, j);
      if (std::isnan(val))
        os << "nan";
      else
        os << val;
    }
    os << "\n";
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

Field2 load_field_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  std::string header;
  std::getline(is, header);
  Grid2 g;
  if (std::sscanf(header.c_str(), "# grid nx=%d ny=%d x0=%lf y0=%lf dx=%lf dy=%lf",
                  &g.nx, &g.ny, &g.x0, &g.y0, &g.dx, &g.dy) != 6)
    throw std::runtime_error("bad grid CSV header in " + path);
  if (g.nx <= 0 || g.ny <= 0)
    throw std::runtime_error("bad grid dimensions in " + path);
  Field2 f(g);
  std::string line;
  std::string tok;
  for (int j = 0; j < g.ny; ++j) {
    if (!std::getline(is, line))
      throw std::runtime_error("truncated grid CSV: " + path);
    std::istringstream ls(line);
    for (int i = 0; i < g.nx; ++i) {
      if (!std::getline(ls, tok, ','))
        throw std::runtime_error("short row in grid CSV: " + path);
      f.at(i, j) = std::strtod(tok.c_str(), nullptr);
    }
  }
  return f;
}

void save_field_pgm(const Field2& f, const std::string& path, double lo, double hi) {
  if (lo >= hi) {
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    for (double v : f.v)
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    if (!(lo < hi)) {  // constant or all-NaN field
      lo = 0.0;
      hi = 1.0;
    }
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  const Grid2& g = f.grid;
  os << "P5\n" << g.nx << " " << g.ny << "\n255\n";
  std::vector<unsigned char> row(g.nx);
  for (int j = g.ny - 1; j >= 0; --j) {
    for (int i = 0; i < g.nx; ++i) {
      double v = f.at(i, j);
      double t = std::isnan(v) ? 0.0 : (v - lo) / (hi - lo);
      if (t < 0) t = 0;
      if (t > 1) t = 1;
      row[i] = static_cast<unsigned char>(std::lround(t * 255.0));
    }
    os.write(reinterpret_cast<const char*>(row.data()), g.nx);
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

void write_block(std::ostream& os, const std::vector<double>& v) {
  std::vector<unsigned char> bytes;
  le_bytes(v, bytes);
  std::uint64_t len = bytes.size();
  std::uint64_t sum = fnv1a64(bytes.data(), bytes.size());
  unsigned char hdr[8], tail[8];
  for (int b = 0; b < 8; ++b) {
    hdr[b] = static_cast<unsigned char>((len >> (8 * b)) & 0xff);
    tail[b] = static_cast<unsigned char>((sum >> (8 * b)) & 0xff);
  }
  os.write(reinterpret_cast<const char*>(hdr), 8);
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  os.write(reinterpret_cast<const char*>(tail), 8);
  if (!os) throw std::runtime_error("block write failed");
}

std::vector<double> read_block(std::istream& is, const std::string& what) {
  unsigned char hdr[8], tail[8];
  if (!is.read(reinterpret_cast<char*>(hdr), 8))
    throw std::runtime_error("truncated block (" + what + ")");
  std::uint64_t len = 0;
  for (int b = 0; b < 8; ++b) len |= static_cast<std::uint64_t>(hdr[b]) << (8 * b);
  if (len % 8 != 0 || len > (1ull << 33))
    throw std::runtime_error("implausible block length (" + what + ")");
  std::vector<unsigned char> bytes(len);
  if (len && !is.read(reinterpret_cast<char*>(bytes.data()),
                      static_cast<std::streamsize>(len)))
    throw std::runtime_error("truncated block payload (" + what + ")");
  if (!is.read(reinterpret_cast<char*>(tail), 8))
    throw std::runtime_error("truncated block checksum (" + what + ")");
  std::uint64_t sum = 0;
  for (int b = 0; b < 8; ++b) sum |= static_cast<std::uint64_t>(tail[b]) << (8 * b);
  if (sum != fnv1a64(bytes.data(), bytes.size()))
    throw std::runtime_error("checksum mismatch (" + what + ")");
  std::vector<double> v;
  from_le_bytes(bytes, v);
  return v;
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << content;
  if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace bcm
