// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The nsteer Authors

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nsteer/errors.hpp"

namespace nsteer {

/// Binary container shared by datasets and checkpoints:
///   magic line | compact JSON header terminated by '\n' | little-endian payload.
/// The header's "arrays" entry lists {name, dtype ("f32"|"f64"), count} in payload order.
struct ArrayBlock {
  std::string name;
  std::string dtype = "f64";  // f32 blocks are narrowed on write
  std::vector<double> values;
};

struct Container {
  nlohmann::json header;
  std::vector<ArrayBlock> arrays;

  /// Throws FormatError when absent.
  const std::vector<double>& array(const std::string& name) const;
};

void write_container(const std::string& path, const std::string& magic, nlohmann::json header,
                     const std::vector<ArrayBlock>& arrays);

/// Reads a container, converting every array to double. f32 arrays round-trip exactly.
Container read_container(const std::string& path, const std::string& magic);

/// Writes bytes and renames into place so a crash never leaves a half-written file.
void write_file_atomic(const std::string& path, const std::string& bytes);

}  // namespace nsteer
