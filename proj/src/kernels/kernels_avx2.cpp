// AVX2 kernel variants. This translation unit is the only one built with
// -mavx2; nothing here runs unless __builtin_cpu_supports("avx2") said yes.

#include <immintrin.h>

#include "diversify/kernels.hpp"

namespace diversify::kernels {

namespace {

// Values are < 2^31, so v and v-1 both fit the low 32 bits of a 64-bit lane
// and _mm256_mul_epu32 computes the full product.
uint64_t pair_count_sum_avx2(const uint32_t* b, size_t n) {
  __m256i acc = _mm256_setzero_si256();
  size_t i = 0;
  const __m256i one = _mm256_set1_epi64x(1);
  for (; i + 4 <= n; i += 4) {
    const __m128i raw = _mm_loadu_si128(reinterpret_cast<const __m128i*>(b + i));
    const __m256i v = _mm256_cvtepu32_epi64(raw);
    const __m256i vm1 = _mm256_sub_epi64(v, one);
    const __m256i prod = _mm256_mul_epu32(v, vm1);  // v=0 wraps but 0*x=0
    acc = _mm256_add_epi64(acc, _mm256_srli_epi64(prod, 1));
  }
  alignas(32) uint64_t lanes[4];
  _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), acc);
  uint64_t total = lanes[0] + lanes[1] + lanes[2] + lanes[3];
  for (; i < n; ++i) {
    const uint64_t v = b[i];
    total += v * (v - 1) / 2;
  }
  return total;
}

uint64_t count_at_least_avx2(const uint32_t* b, size_t n, uint32_t threshold) {
  if (threshold == 0) return n;
  // b[i] and threshold are < 2^31, so the signed compare is exact.
  const __m256i lim = _mm256_set1_epi32(static_cast<int32_t>(threshold - 1));
  uint64_t total = 0;
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256i v = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i));
    const __m256i gt = _mm256_cmpgt_epi32(v, lim);
    total += static_cast<unsigned>(__builtin_popcount(
        static_cast<unsigned>(_mm256_movemask_ps(_mm256_castsi256_ps(gt)))));
  }
  for (; i < n; ++i) total += b[i] >= threshold ? 1 : 0;
  return total;
}

double indexed_table_sum_avx2(const uint32_t* b, size_t n, const double* table,
                              size_t table_len) {
  (void)table_len;
  __m256d acc = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m128i idx = _mm_loadu_si128(reinterpret_cast<const __m128i*>(b + i));
    acc = _mm256_add_pd(acc, _mm256_i32gather_pd(table, idx, 8));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double total = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) total += table[b[i]];
  return total;
}

const Kernels kAvx2 = {"avx2", pair_count_sum_avx2, count_at_least_avx2,
                       indexed_table_sum_avx2};

}  // namespace

const Kernels& avx2() { return kAvx2; }

}  // namespace diversify::kernels
