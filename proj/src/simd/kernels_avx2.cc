// Copyright 2026 The HUSE Toolkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Compiled with -mavx2 only. Dispatch guarantees the CPU supports AVX2 before
// any of these functions run.

#include <immintrin.h>

#include <bit>

#include "huse/simd/kernels.h"

namespace huse::simd::detail {
namespace {

void SquaredDistances(const double* columns, std::size_t rows,
                      std::size_t dims, const double* query, double* out) {
  const std::size_t vec_end = rows - rows % 4;
  for (std::size_t j = 0; j < vec_end; j += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t d = 0; d < dims; ++d) {
      const __m256d x = _mm256_loadu_pd(columns + d * rows + j);
      const __m256d diff = _mm256_sub_pd(x, _mm256_set1_pd(query[d]));
      acc = _mm256_add_pd(acc, _mm256_mul_pd(diff, diff));
    }
    _mm256_storeu_pd(out + j, acc);
  }
  for (std::size_t j = vec_end; j < rows; ++j) {
    double acc = 0.0;
    for (std::size_t d = 0; d < dims; ++d) {
      const double diff = columns[d * rows + j] - query[d];
      acc = acc + diff * diff;
    }
    out[j] = acc;
  }
}

RadiusCount CountWithin(const double* dist, const double* labels,
                        std::size_t n, double radius, bool strict) {
  const std::size_t vec_end = n - n % 4;
  const __m256d r = _mm256_set1_pd(radius);
  __m256d ones = _mm256_setzero_pd();
  std::size_t count = 0;
  for (std::size_t j = 0; j < vec_end; j += 4) {
    const __m256d d = _mm256_loadu_pd(dist + j);
    const __m256d mask = strict ? _mm256_cmp_pd(d, r, _CMP_LT_OQ)
                                : _mm256_cmp_pd(d, r, _CMP_LE_OQ);
    count += static_cast<std::size_t>(
        std::popcount(static_cast<unsigned>(_mm256_movemask_pd(mask))));
    ones = _mm256_add_pd(ones,
                         _mm256_and_pd(mask, _mm256_loadu_pd(labels + j)));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, ones);
  // Lane sums are small non-negative integers, so this is exact.
  double ones_total = lanes[0] + lanes[1] + lanes[2] + lanes[3];
  RadiusCount rc{count, static_cast<std::size_t>(ones_total)};
  for (std::size_t j = vec_end; j < n; ++j) {
    const bool in = strict ? dist[j] < radius : dist[j] <= radius;
    if (in) {
      ++rc.count;
      if (labels[j] != 0.0) ++rc.ones;
    }
  }
  return rc;
}

}  // namespace

const Kernels& Avx2Kernels() {
  static const Kernels k{&SquaredDistances, &CountWithin};
  return k;
}

}  // namespace huse::simd::detail
