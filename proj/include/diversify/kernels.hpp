#pragma once

// Array reduction kernels used by the community analyzer. Each has a scalar
// reference implementation and an AVX2 variant; the active set is chosen once
// at runtime. Contracts:
//
//   pair_count_sum     sum over i of b[i]*(b[i]-1)/2
//   count_at_least     number of i with b[i] >= threshold
//   indexed_table_sum  sum over i of table[b[i]]   (b[i] < table_len)
//
// Inputs are per-state build counts, so values are small (<= community size),
// but the contracts hold for any uint32 inputs below 2^31.

#include <cstddef>
#include <cstdint>

namespace diversify::kernels {

struct Kernels {
  const char* name;
  uint64_t (*pair_count_sum)(const uint32_t* b, size_t n);
  uint64_t (*count_at_least)(const uint32_t* b, size_t n, uint32_t threshold);
  double (*indexed_table_sum)(const uint32_t* b, size_t n, const double* table,
                              size_t table_len);
};

const Kernels& scalar();
bool avx2_supported();
const Kernels& avx2();  // call only if avx2_supported()

// avx2() when supported, scalar() otherwise. DIVERSIFY_KERNELS=scalar in the
// environment forces the reference path.
const Kernels& active();

}  // namespace diversify::kernels
