/**
 * Copyright 2026 The xmc Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xmc/datagen.hpp"

namespace xmc {

/// Little-endian byte sink.
class ByteWriter {
 public:
  void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void f64s(std::span<const double> v);
  const std::vector<char>& buffer() const { return buf_; }

 private:
  std::vector<char> buf_;
};

/// Little-endian byte source over an in-memory buffer; throws FormatError on underrun.
class ByteReader {
 public:
  explicit ByteReader(std::span<const char> data) : data_(data) {}
  std::string bytes(std::size_t n);
  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  void f64s(std::span<double> out);
  bool at_end() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const;
  std::span<const char> data_;
  std::size_t pos_ = 0;
};

std::vector<char> read_file(const std::filesystem::path& p);
/// Writes to a sibling temporary and renames it into place.
void write_file_atomic(const std::filesystem::path& p, std::span<const char> data);
void write_text_atomic(const std::filesystem::path& p, std::string_view text);

std::string sha256_hex(std::span<const char> data);
std::string sha256_file(const std::filesystem::path& p);

// Dataset container: "XMCD", u16 version, u32 R, A, H, W, n, then per sample
// u8 class_id, R*A f64 heatmap, H*W f64 image. All little-endian.
constexpr std::uint16_t kDatasetVersion = 1;

std::vector<char> encode_dataset(const Dataset& d);
/// Samples only; split lists are left empty.
Dataset decode_dataset(std::span<const char> bytes);

/// Split sidecar as JSON text: {"train": [...], "test": [...], "vision": [...]}.
std::string encode_splits(const Dataset& d);
void decode_splits(std::string_view text, Dataset& d);

void save_dataset(const Dataset& d, const std::filesystem::path& data_path,
                  const std::filesystem::path& split_path);
Dataset load_dataset(const std::filesystem::path& data_path, const std::filesystem::path& split_path);

}  // namespace xmc
