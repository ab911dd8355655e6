// Copyright 2026 The uwssl Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace uwssl {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition violated by a caller-supplied value.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// File could not be read, written or decoded.
class IoError : public Error {
 public:
  using Error::Error;
};

// Tensor shapes are incompatible for the requested operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A value or gradient became NaN or infinite.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

namespace detail {

template <typename... Args>
std::string concat(Args&&... args) {
  std::ostringstream oss;
  (oss << ... << std::forward<Args>(args));
  return oss.str();
}

}  // namespace detail

template <typename E = InvalidArgument, typename... Args>
inline void require(bool condition, Args&&... message) {
  if (!condition) {
    throw E(detail::concat(std::forward<Args>(message)...));
  }
}

}  // namespace uwssl
