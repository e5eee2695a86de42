// Copyright (c) 2026 the dsa authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace dsa {

// Malformed or out-of-contract input: bad trace files, off-grid configs,
// non-finite values. The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what_arg)
      : std::runtime_error(what_arg) {}
};

// A requested metric has no defined value, e.g. a zero or undefined baseline
// mAP. The CLI maps this to exit code 3.
class DegenerateError : public std::runtime_error {
 public:
  explicit DegenerateError(const std::string& what_arg)
      : std::runtime_error(what_arg) {}
};

}  // namespace dsa
