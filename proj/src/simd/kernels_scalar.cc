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

#include "huse/simd/kernels.h"

namespace huse::simd::detail {
namespace {

void SquaredDistances(const double* columns, std::size_t rows,
                      std::size_t dims, const double* query, double* out) {
  for (std::size_t j = 0; j < rows; ++j) out[j] = 0.0;
  for (std::size_t d = 0; d < dims; ++d) {
    const double* col = columns + d * rows;
    const double q = query[d];
    for (std::size_t j = 0; j < rows; ++j) {
      const double diff = col[j] - q;
      out[j] = out[j] + diff * diff;
    }
  }
}

RadiusCount CountWithin(const double* dist, const double* labels,
                        std::size_t n, double radius, bool strict) {
  RadiusCount rc;
  for (std::size_t j = 0; j < n; ++j) {
    const bool in = strict ? dist[j] < radius : dist[j] <= radius;
    if (in) {
      ++rc.count;
      if (labels[j] != 0.0) ++rc.ones;
    }
  }
  return rc;
}

}  // namespace

const Kernels& ScalarKernels() {
  static const Kernels k{&SquaredDistances, &CountWithin};
  return k;
}

}  // namespace huse::simd::detail
