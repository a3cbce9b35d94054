// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The nsteer Authors

#include "nsteer/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

namespace nsteer {

namespace {

template <typename Word>
Word to_little_endian(Word w) {
  if constexpr (std::endian::native == std::endian::big) {
    Word out = 0;
    for (std::size_t i = 0; i < sizeof(Word); ++i) {
      out = static_cast<Word>((out << 8) | ((w >> (8 * i)) & 0xff));
    }
    return out;
  }
  return w;
}

template <typename Float, typename Word>
void append_le(std::string& out, Float value) {
  const Word w = to_little_endian(std::bit_cast<Word>(value));
  char bytes[sizeof(Word)];
  std::memcpy(bytes, &w, sizeof(Word));
  out.append(bytes, sizeof(Word));
}

template <typename Float, typename Word>
Float read_le(const char* p) {
  Word w;
  std::memcpy(&w, p, sizeof(Word));
  return std::bit_cast<Float>(to_little_endian(w));
}

std::size_t dtype_size(const std::string& dtype, std::uint64_t offset) {
  if (dtype == "f64") return 8;
  if (dtype == "f32") return 4;
  throw FormatError("unknown array dtype '" + dtype + "'", offset);
}

}  // namespace

const std::vector<double>& Container::array(const std::string& name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return a.values;
  }
  throw FormatError("missing array '" + name + "'", 0);
}

void write_file_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
}

void write_container(const std::string& path, const std::string& magic, nlohmann::json header,
                     const std::vector<ArrayBlock>& arrays) {
  nlohmann::json listing = nlohmann::json::array();
  std::size_t payload = 0;
  for (const auto& a : arrays) {
    listing.push_back({{"name", a.name}, {"dtype", a.dtype}, {"count", a.values.size()}});
    payload += a.values.size() * dtype_size(a.dtype, 0);
  }
  header["arrays"] = std::move(listing);

  std::string bytes = magic;
  bytes += header.dump();
  bytes += '\n';
  bytes.reserve(bytes.size() + payload);
  for (const auto& a : arrays) {
    if (a.dtype == "f64") {
      for (double v : a.values) append_le<double, std::uint64_t>(bytes, v);
    } else {
      for (double v : a.values) append_le<float, std::uint32_t>(bytes, static_cast<float>(v));
    }
  }
  write_file_atomic(path, bytes);
}

Container read_container(const std::string& path, const std::string& magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < magic.size() || bytes.compare(0, magic.size(), magic) != 0) {
    throw FormatError("bad magic in '" + path + "', expected " + magic.substr(0, magic.size() - 1), 0);
  }
  const std::size_t header_end = bytes.find('\n', magic.size());
  if (header_end == std::string::npos) throw FormatError("unterminated header", bytes.size());

  Container c;
  try {
    c.header = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(magic.size()),
                                     bytes.begin() + static_cast<std::ptrdiff_t>(header_end));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("malformed header: ") + e.what(), magic.size() + e.byte);
  }
  if (!c.header.is_object() || !c.header.contains("arrays") || !c.header["arrays"].is_array()) {
    throw FormatError("header has no array listing", magic.size());
  }

  std::uint64_t offset = header_end + 1;
  for (const auto& entry : c.header["arrays"]) {
    ArrayBlock block;
    std::uint64_t count = 0;
    try {
      block.name = entry.at("name").get<std::string>();
      block.dtype = entry.at("dtype").get<std::string>();
      count = entry.at("count").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("bad array entry: ") + e.what(), magic.size());
    }
    const std::size_t width = dtype_size(block.dtype, offset);
    if (count > (bytes.size() - offset) / width) {
      throw FormatError("truncated payload: array '" + block.name + "' needs " + std::to_string(count * width) +
                            " bytes, " + std::to_string(bytes.size() - offset) + " remain",
                        offset);
    }
    block.values.resize(count);
    const char* p = bytes.data() + offset;
    for (std::uint64_t i = 0; i < count; ++i, p += width) {
      block.values[i] = width == 8 ? read_le<double, std::uint64_t>(p)
                                   : static_cast<double>(read_le<float, std::uint32_t>(p));
    }
    offset += count * width;
    c.arrays.push_back(std::move(block));
  }
  if (offset != bytes.size()) {
    throw FormatError(std::to_string(bytes.size() - offset) + " unexpected trailing bytes", offset);
  }
  return c;
}

}  // namespace nsteer
