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

#include <arm_neon.h>

#include "huse/simd/kernels.h"

namespace huse::simd::detail {
namespace {

void SquaredDistances(const double* columns, std::size_t rows,
                      std::size_t dims, const double* query, double* out) {
  const std::size_t vec_end = rows - rows % 2;
  for (std::size_t j = 0; j < vec_end; j += 2) {
    float64x2_t acc = vdupq_n_f64(0.0);
    for (std::size_t d = 0; d < dims; ++d) {
      const float64x2_t diff =
          vsubq_f64(vld1q_f64(columns + d * rows + j), vdupq_n_f64(query[d]));
      // Separate multiply and add; vfmaq would round differently from scalar.
      acc = vaddq_f64(acc, vmulq_f64(diff, diff));
    }
    vst1q_f64(out + j, acc);
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
  const std::size_t vec_end = n - n % 2;
  const float64x2_t r = vdupq_n_f64(radius);
  uint64x2_t count = vdupq_n_u64(0);
  float64x2_t ones = vdupq_n_f64(0.0);
  for (std::size_t j = 0; j < vec_end; j += 2) {
    const float64x2_t d = vld1q_f64(dist + j);
    const uint64x2_t mask = strict ? vcltq_f64(d, r) : vcleq_f64(d, r);
    count = vsubq_u64(count, mask);  // all-ones lanes are -1
    ones = vaddq_f64(
        ones, vreinterpretq_f64_u64(vandq_u64(
                  mask, vreinterpretq_u64_f64(vld1q_f64(labels + j)))));
  }
  RadiusCount rc{
      static_cast<std::size_t>(vgetq_lane_u64(count, 0) +
                               vgetq_lane_u64(count, 1)),
      static_cast<std::size_t>(vgetq_lane_f64(ones, 0) +
                               vgetq_lane_f64(ones, 1))};
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

const Kernels& NeonKernels() {
  static const Kernels k{&SquaredDistances, &CountWithin};
  return k;
}

}  // namespace huse::simd::detail
