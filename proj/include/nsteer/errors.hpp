// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The nsteer Authors

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace nsteer {

/// Malformed or incompatible file. `offset` is the byte position where
/// reading failed, when known.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what), offset_(0) {}
  FormatError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

/// File could not be opened, written or renamed.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent or missing measurement data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nsteer
