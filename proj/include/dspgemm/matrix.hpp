#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace dspgemm {

// Row-major strided view. ld is the distance between row starts.
template <class T>
struct BasicView {
  T* data = nullptr;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t ld = 0;

  T& operator()(std::size_t r, std::size_t c) const { return data[r * ld + c]; }
  T* row(std::size_t r) const { return data + r * ld; }
  BasicView block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
    return {data + r0 * ld + c0, nr, nc, ld};
  }
  operator BasicView<const T>() const { return {data, rows, cols, ld}; }
};

using MatView = BasicView<float>;
using ConstMatView = BasicView<const float>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, float fill = 0.0f) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  float& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  float operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  MatView view() { return {data_.data(), rows_, cols_, cols_}; }
  ConstMatView view() const { return {data_.data(), rows_, cols_, cols_}; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

// mt19937_64 stream; each draw x maps to (x >> 40) * 2^-23 - 1, i.e. a
// multiple of 2^-23 in [-1, 1).
Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed);

// C += A * B, one running FP32 sum per element, k innermost.
void naive_gemm(ConstMatView a, ConstMatView b, MatView c);

double checksum(ConstMatView m);

// max over elements of |got - ref| / (1 + |ref|)
double max_relative_error(ConstMatView got, ConstMatView ref);

// Binary format: "FTMM", u16 version, u16 dtype (0 = FP32), u64 rows,
// u64 cols, little-endian row-major payload.
inline constexpr std::uint16_t kFtmmVersion = 1;
void write_ftmm(std::ostream& out, ConstMatView m);
Matrix read_ftmm(std::istream& in);
void save_ftmm(const std::filesystem::path& path, ConstMatView m);
Matrix load_ftmm(const std::filesystem::path& path);

}  // namespace dspgemm
