#include "diversify/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace diversify::kernels {

namespace {

uint64_t pair_count_sum_scalar(const uint32_t* b, size_t n) {
  uint64_t acc = 0;
  for (size_t i = 0; i < n; ++i) {
    const uint64_t v = b[i];
    acc += v * (v - 1) / 2;
  }
  return acc;
}

uint64_t count_at_least_scalar(const uint32_t* b, size_t n, uint32_t threshold) {
  uint64_t acc = 0;
  for (size_t i = 0; i < n; ++i) acc += b[i] >= threshold ? 1 : 0;
  return acc;
}

double indexed_table_sum_scalar(const uint32_t* b, size_t n, const double* table,
                                size_t table_len) {
  (void)table_len;
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += table[b[i]];
  return acc;
}

const Kernels kScalar = {"scalar", pair_count_sum_scalar, count_at_least_scalar,
                         indexed_table_sum_scalar};

}  // namespace

const Kernels& scalar() { return kScalar; }

#if DIVERSIFY_HAVE_AVX2_TU

bool avx2_supported() { return __builtin_cpu_supports("avx2") != 0; }

#else

bool avx2_supported() { return false; }
const Kernels& avx2() { return kScalar; }

#endif

const Kernels& active() {
  static const Kernels* chosen = [] {
    const char* env = std::getenv("DIVERSIFY_KERNELS");
    if (env && std::strcmp(env, "scalar") == 0) return &kScalar;
    return avx2_supported() ? &avx2() : &kScalar;
  }();
  return *chosen;
}

}  // namespace diversify::kernels
