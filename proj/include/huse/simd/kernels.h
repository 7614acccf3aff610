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

#ifndef HUSE_SIMD_KERNELS_H_
#define HUSE_SIMD_KERNELS_H_

// Inner loops of the nearest-neighbour search. Each kernel has a scalar
// reference version and vector versions; the vector versions perform the same
// per-element arithmetic in the same order, so all levels agree bit for bit.

#include <cstddef>
#include <string_view>
#include <vector>

namespace huse::simd {

enum class Level { kScalar, kAvx2, kNeon };

std::string_view LevelName(Level level);

struct RadiusCount {
  std::size_t count = 0;  // elements within the radius
  std::size_t ones = 0;   // of those, elements whose label is 1
};

struct Kernels {
  // out[j] = sum over d of (columns[d * rows + j] - query[d])^2, summed in
  // increasing d. `columns` is column-major.
  void (*squared_distances)(const double* columns, std::size_t rows,
                            std::size_t dims, const double* query,
                            double* out);
  // Counts j with dist[j] <= radius (dist[j] < radius when `strict`) and the
  // sum of labels[j] over those j. Labels are 0.0 or 1.0.
  RadiusCount (*count_within)(const double* dist, const double* labels,
                              std::size_t n, double radius, bool strict);
};

// Levels compiled into this binary and supported by the running CPU.
// Always starts with kScalar.
std::vector<Level> AvailableLevels();

// Kernel table for a level. Throws std::invalid_argument if the level is not
// available.
const Kernels& KernelsFor(Level level);

// The level used by the classifier: the widest available one, unless the
// HUSE_SIMD environment variable names another ("scalar", "avx2", "neon").
Level ActiveLevel();
const Kernels& ActiveKernels();

namespace detail {
const Kernels& ScalarKernels();
#if defined(HUSE_HAVE_AVX2)
const Kernels& Avx2Kernels();
#endif
#if defined(HUSE_HAVE_NEON)
const Kernels& NeonKernels();
#endif
}  // namespace detail

}  // namespace huse::simd

#endif  // HUSE_SIMD_KERNELS_H_
