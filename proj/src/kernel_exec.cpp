#include "dspgemm/kernel_exec.hpp"

#include <algorithm>
#include <vector>

#include "dspgemm/error.hpp"

namespace dspgemm {

namespace {

void check_shapes(const char* who, ConstMatView a, ConstMatView b, MatView c) {
  if (a.rows != c.rows || a.cols != b.rows || b.cols != c.cols)
    throw Error(std::string(who) + ": shape mismatch (" + std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                " * " + std::to_string(b.rows) + "x" + std::to_string(b.cols) + " into " + std::to_string(c.rows) +
                "x" + std::to_string(c.cols) + ")");
}

}  // namespace

void exec_tgemm_kernel(ConstMatView a_s, ConstMatView b_a, MatView c_a) {
  check_shapes("exec_tgemm_kernel", a_s, b_a, c_a);
  const std::size_t n = c_a.cols;
  for (std::size_t m = 0; m < c_a.rows; ++m) {
    float* c = c_a.row(m);
    for (std::size_t k = 0; k < a_s.cols; ++k) {
      const float a = a_s(m, k);
      const float* b = b_a.row(k);
      for (std::size_t j = 0; j < n; ++j) c[j] = c[j] + a * b[j];
    }
  }
}

void exec_ftimm_kernel(ConstMatView a_s, ConstMatView b_a, MatView c_a, const MicroKernelSpec& spec) {
  check_shapes("exec_ftimm_kernel", a_s, b_a, c_a);
  if (spec.m_u < 1 || spec.k_u < 1) throw Error("exec_ftimm_kernel: m_u and k_u must be positive");
  if (spec.n_a > 0 && c_a.cols > std::size_t(spec.n_a))
    throw Error("exec_ftimm_kernel: tile is wider than the kernel's n_a");

  const std::size_t n = c_a.cols;
  const std::size_t ku_count = std::size_t(spec.k_u);
  std::vector<float> partial(ku_count * n);
  // Row groups of m_u share B loads on the machine; per-row order of
  // operations is the same either way.
  for (std::size_t m = 0; m < c_a.rows; ++m) {
    std::fill(partial.begin(), partial.end(), 0.0f);
    for (std::size_t k = 0; k < a_s.cols; ++k) {
      const float a = a_s(m, k);
      const float* b = b_a.row(k);
      float* p = partial.data() + (k % ku_count) * n;
      for (std::size_t j = 0; j < n; ++j) p[j] = p[j] + a * b[j];
    }
    float* c = c_a.row(m);
    for (std::size_t j = 0; j < n; ++j) {
      float s = partial[j];
      for (std::size_t ku = 1; ku < ku_count; ++ku) s = s + partial[ku * n + j];
      c[j] = c[j] + s;
    }
  }
}

}  // namespace dspgemm
