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

#include <cstdlib>
#include <stdexcept>
#include <string>

#include "huse/simd/kernels.h"

namespace huse::simd {
namespace {

bool CpuSupports(Level level) {
  switch (level) {
    case Level::kScalar:
      return true;
    case Level::kAvx2:
#if defined(HUSE_HAVE_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Level::kNeon:
#if defined(HUSE_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Level SelectLevel() {
  const std::vector<Level> levels = AvailableLevels();
  if (const char* env = std::getenv("HUSE_SIMD")) {
    const std::string wanted(env);
    for (Level level : levels) {
      if (LevelName(level) == wanted) return level;
    }
  }
  return levels.back();
}

}  // namespace

std::string_view LevelName(Level level) {
  switch (level) {
    case Level::kScalar:
      return "scalar";
    case Level::kAvx2:
      return "avx2";
    case Level::kNeon:
      return "neon";
  }
  return "unknown";
}

std::vector<Level> AvailableLevels() {
  std::vector<Level> levels{Level::kScalar};
  for (Level level : {Level::kAvx2, Level::kNeon}) {
    if (CpuSupports(level)) levels.push_back(level);
  }
  return levels;
}

const Kernels& KernelsFor(Level level) {
  if (!CpuSupports(level)) {
    throw std::invalid_argument("SIMD level not available: " +
                                std::string(LevelName(level)));
  }
  switch (level) {
#if defined(HUSE_HAVE_AVX2)
    case Level::kAvx2:
      return detail::Avx2Kernels();
#endif
#if defined(HUSE_HAVE_NEON)
    case Level::kNeon:
      return detail::NeonKernels();
#endif
    default:
      return detail::ScalarKernels();
  }
}

Level ActiveLevel() {
  static const Level level = SelectLevel();
  return level;
}

const Kernels& ActiveKernels() {
  static const Kernels& k = KernelsFor(ActiveLevel());
  return k;
}

}  // namespace huse::simd
