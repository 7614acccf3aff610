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

#ifndef HUSE_ERROR_H_
#define HUSE_ERROR_H_

#include <stdexcept>
#include <string>

namespace huse {

// Malformed or invalid input data (bad JSONL line, unpaired context, rating
// outside [0, 5], unparsable pair specification). The CLI maps this to exit 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Well-formed input that cannot satisfy an operation's precondition, e.g.
// k >= number of points or a subsample larger than the data. CLI exit 3.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace huse

#endif  // HUSE_ERROR_H_
