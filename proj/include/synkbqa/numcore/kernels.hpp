#pragma once

// Dense double-precision inner loops used by the tape. Each entry point has a
// scalar reference implementation; SIMD variants (AVX2+FMA on x86-64, NEON on
// aarch64) are picked once at startup when the CPU supports them.
//
// SYNKBQA_SIMD=scalar|avx2|neon forces a variant (unknown or unsupported
// values fall back to scalar).

#include <cstddef>
#include <span>
#include <string_view>

namespace synkbqa::num::kernels {

struct Table {
  std::string_view name;
  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y = A x, A row-major rows x cols
  void (*gemv)(const double* a, std::size_t rows, std::size_t cols,
               const double* x, double* y);
  // y += A^T x
  void (*gemv_t_acc)(const double* a, std::size_t rows, std::size_t cols,
                     const double* x, double* y);
  // A += u v^T
  void (*ger_acc)(double* a, std::size_t rows, std::size_t cols,
                  const double* u, const double* v);
};

const Table& scalar();
/// nullptr unless compiled in and supported by the running CPU.
const Table* avx2();
const Table* neon();
/// The variant used by the wrappers below.
const Table& active();

double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void gemv(std::span<const double> a, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y);
void gemv_t_acc(std::span<const double> a, std::size_t rows, std::size_t cols,
                std::span<const double> x, std::span<double> y);
void ger_acc(std::span<double> a, std::size_t rows, std::size_t cols,
             std::span<const double> u, std::span<const double> v);

}  // namespace synkbqa::num::kernels
