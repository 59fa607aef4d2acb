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

#include "xmc/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include "json.hpp"

#include "xmc/error.hpp"

namespace xmc {

namespace {

template <typename T>
void put_le(std::vector<char>& buf, T v) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
}

}  // namespace

void ByteWriter::u16(std::uint16_t v) { put_le(buf_, v); }
void ByteWriter::u32(std::uint32_t v) { put_le(buf_, v); }
void ByteWriter::u64(std::uint64_t v) { put_le(buf_, v); }
void ByteWriter::f64(double v) { put_le(buf_, std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::f64s(std::span<const double> v) {
  buf_.reserve(buf_.size() + 8 * v.size());
  for (double x : v) {
    f64(x);
  }
}

void ByteReader::need(std::size_t n) const {
  if (data_.size() - pos_ < n) {
    throw FormatError("unexpected end of data at byte " + std::to_string(pos_));
  }
}

std::string ByteReader::bytes(std::size_t n) {
  need(n);
  std::string s(data_.data() + pos_, n);
  pos_ += n;
  return s;
}

namespace {
template <typename T>
T get_le(std::span<const char> data, std::size_t pos) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<T>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
  }
  return v;
}
}  // namespace

std::uint8_t ByteReader::u8() {
  need(1);
  return static_cast<std::uint8_t>(data_[pos_++]);
}

std::uint16_t ByteReader::u16() {
  need(2);
  auto v = get_le<std::uint16_t>(data_, pos_);
  pos_ += 2;
  return v;
}

std::uint32_t ByteReader::u32() {
  need(4);
  auto v = get_le<std::uint32_t>(data_, pos_);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  auto v = get_le<std::uint64_t>(data_, pos_);
  pos_ += 8;
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

void ByteReader::f64s(std::span<double> out) {
  need(8 * out.size());
  for (double& x : out) {
    x = f64();
  }
}

std::vector<char> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) {
    throw MissingFileError("cannot open " + p.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& p, std::span<const char> data) {
  if (p.has_parent_path()) {
    std::filesystem::create_directories(p.parent_path());
  }
  std::filesystem::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw MissingFileError("cannot write " + tmp.string());
    }
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) {
      throw MissingFileError("write failed for " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, p);
}

void write_text_atomic(const std::filesystem::path& p, std::string_view text) {
  write_file_atomic(p, std::span<const char>(text.data(), text.size()));
}

std::string sha256_hex(std::span<const char> data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1) {
    throw Error("sha256: digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xf]);
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& p) {
  const auto bytes = read_file(p);
  return sha256_hex(bytes);
}

std::vector<char> encode_dataset(const Dataset& d) {
  ByteWriter w;
  w.bytes("XMCD");
  w.u16(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(d.range_bins));
  w.u32(static_cast<std::uint32_t>(d.azimuth_bins));
  w.u32(static_cast<std::uint32_t>(d.image_height));
  w.u32(static_cast<std::uint32_t>(d.image_width));
  w.u32(static_cast<std::uint32_t>(d.samples.size()));
  for (const auto& s : d.samples) {
    w.u8(s.class_id);
    w.f64s(std::span<const double>(s.heatmap.data(), static_cast<std::size_t>(s.heatmap.size())));
    w.f64s(std::span<const double>(s.image.data(), static_cast<std::size_t>(s.image.size())));
  }
  return w.buffer();
}

Dataset decode_dataset(std::span<const char> bytes) {
  ByteReader r(bytes);
  if (r.bytes(4) != "XMCD") {
    throw FormatError("dataset: bad magic");
  }
  const auto version = r.u16();
  if (version != kDatasetVersion) {
    throw FormatError("dataset: unsupported version " + std::to_string(version));
  }
  Dataset d;
  d.range_bins = static_cast<int>(r.u32());
  d.azimuth_bins = static_cast<int>(r.u32());
  d.image_height = static_cast<int>(r.u32());
  d.image_width = static_cast<int>(r.u32());
  const auto n = r.u32();
  d.samples.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    auto& s = d.samples[i];
    s.class_id = r.u8();
    if (s.class_id >= kNumClasses) {
      throw FormatError("dataset: class id out of range in record " + std::to_string(i));
    }
    s.t = i;
    s.heatmap.resize(d.range_bins, d.azimuth_bins);
    s.image.resize(d.image_height, d.image_width);
    r.f64s(std::span<double>(s.heatmap.data(), static_cast<std::size_t>(s.heatmap.size())));
    r.f64s(std::span<double>(s.image.data(), static_cast<std::size_t>(s.image.size())));
  }
  if (!r.at_end()) {
    throw FormatError("dataset: trailing bytes after last record");
  }
  return d;
}

std::string encode_splits(const Dataset& d) {
  nlohmann::json j;
  j["train"] = d.train;
  j["test"] = d.test;
  j["vision"] = d.vision;
  return j.dump() + "\n";
}

void decode_splits(std::string_view text, Dataset& d) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    d.train = j.at("train").get<std::vector<std::uint32_t>>();
    d.test = j.at("test").get<std::vector<std::uint32_t>>();
    d.vision = j.value("vision", std::vector<std::uint32_t>{});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("splits: ") + e.what());
  }
  d.validate_splits();
}

void save_dataset(const Dataset& d, const std::filesystem::path& data_path,
                  const std::filesystem::path& split_path) {
  write_file_atomic(data_path, encode_dataset(d));
  write_text_atomic(split_path, encode_splits(d));
}

Dataset load_dataset(const std::filesystem::path& data_path, const std::filesystem::path& split_path) {
  Dataset d = decode_dataset(read_file(data_path));
  const auto text = read_file(split_path);
  decode_splits(std::string_view(text.data(), text.size()), d);
  return d;
}

}  // namespace xmc
