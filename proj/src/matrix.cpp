#include "dspgemm/matrix.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "dspgemm/error.hpp"

namespace dspgemm {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Matrix m(rows, cols);
  std::mt19937_64 gen(seed);
  float* p = m.data();
  for (std::size_t i = 0; i < rows * cols; ++i) p[i] = float(std::ldexp(double(gen() >> 40), -23) - 1.0);
  return m;
}

void naive_gemm(ConstMatView a, ConstMatView b, MatView c) {
  if (a.rows != c.rows || a.cols != b.rows || b.cols != c.cols) throw Error("naive_gemm: shape mismatch");
  for (std::size_t i = 0; i < c.rows; ++i)
    for (std::size_t j = 0; j < c.cols; ++j) {
      float acc = c(i, j);
      for (std::size_t k = 0; k < a.cols; ++k) acc = acc + a(i, k) * b(k, j);
      c(i, j) = acc;
    }
}

double checksum(ConstMatView m) {
  double s = 0;
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) s += m(i, j);
  return s;
}

double max_relative_error(ConstMatView got, ConstMatView ref) {
  if (got.rows != ref.rows || got.cols != ref.cols) throw Error("max_relative_error: shape mismatch");
  double worst = 0;
  for (std::size_t i = 0; i < ref.rows; ++i)
    for (std::size_t j = 0; j < ref.cols; ++j) {
      const double r = ref(i, j);
      const double e = std::abs(double(got(i, j)) - r) / (1.0 + std::abs(r));
      if (!(e <= worst)) worst = e;  // also propagates NaN
    }
  return worst;
}

namespace {

template <class T>
void put_le(std::ostream& out, T v) {
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((std::uint64_t(v) >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) throw Error("FTMM: truncated header");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= std::uint64_t(buf[i]) << (8 * i);
  return static_cast<T>(v);
}

}  // namespace

void write_ftmm(std::ostream& out, ConstMatView m) {
  out.write("FTMM", 4);
  put_le<std::uint16_t>(out, kFtmmVersion);
  put_le<std::uint16_t>(out, 0);
  put_le<std::uint64_t>(out, m.rows);
  put_le<std::uint64_t>(out, m.cols);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(m(i, j)));
  if (!out) throw Error("FTMM: write failed");
}

Matrix read_ftmm(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "FTMM", 4) != 0) throw Error("FTMM: bad magic");
  const auto version = get_le<std::uint16_t>(in);
  if (version != kFtmmVersion) throw Error("FTMM: unsupported version " + std::to_string(version));
  const auto dtype = get_le<std::uint16_t>(in);
  if (dtype != 0) throw Error("FTMM: unsupported dtype " + std::to_string(dtype));
  const auto rows = get_le<std::uint64_t>(in);
  const auto cols = get_le<std::uint64_t>(in);
  if (cols != 0 && rows > (std::uint64_t(1) << 40) / cols) throw Error("FTMM: matrix too large");
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows * cols; ++i) m.data()[i] = std::bit_cast<float>(get_le<std::uint32_t>(in));
  return m;
}

void save_ftmm(const std::filesystem::path& path, ConstMatView m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_ftmm(out, m);
}

Matrix load_ftmm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_ftmm(in);
}

}  // namespace dspgemm
