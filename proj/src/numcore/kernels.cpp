#include <cassert>
#include <cstdlib>
#include <string_view>

#include "numcore/kernels_impl.hpp"

namespace synkbqa::num::kernels {
namespace {

const Table& select() {
  const char* env = std::getenv("SYNKBQA_SIMD");
  const std::string_view wanted = env ? env : "auto";
  if (wanted == "scalar") return scalar();
  if (wanted == "auto" || wanted == "avx2") {
    if (const Table* t = avx2()) return *t;
  }
  if (wanted == "auto" || wanted == "neon") {
    if (const Table* t = neon()) return *t;
  }
  return scalar();
}

}  // namespace

const Table& scalar() { return kScalarTable; }

const Table* avx2() {
#if defined(SYNKBQA_HAVE_AVX2)
  static const bool supported =
      __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &kAvx2Table : nullptr;
#else
  return nullptr;
#endif
}

const Table* neon() {
#if defined(SYNKBQA_HAVE_NEON)
  // Advanced SIMD is mandatory on aarch64.
  return &kNeonTable;
#else
  return nullptr;
#endif
}

const Table& active() {
  static const Table& table = select();
  return table;
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  return active().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  active().axpy(alpha, x.data(), y.data(), x.size());
}

void gemv(std::span<const double> a, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y) {
  assert(a.size() == rows * cols && x.size() == cols && y.size() == rows);
  active().gemv(a.data(), rows, cols, x.data(), y.data());
}

void gemv_t_acc(std::span<const double> a, std::size_t rows, std::size_t cols,
                std::span<const double> x, std::span<double> y) {
  assert(a.size() == rows * cols && x.size() == rows && y.size() == cols);
  active().gemv_t_acc(a.data(), rows, cols, x.data(), y.data());
}

void ger_acc(std::span<double> a, std::size_t rows, std::size_t cols,
             std::span<const double> u, std::span<const double> v) {
  assert(a.size() == rows * cols && u.size() == rows && v.size() == cols);
  active().ger_acc(a.data(), rows, cols, u.data(), v.data());
}

}  // namespace synkbqa::num::kernels
