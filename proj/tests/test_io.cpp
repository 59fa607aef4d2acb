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

#include <filesystem>

#include "doctest.h"
#include "xmc/error.hpp"
#include "xmc/io.hpp"

using namespace xmc;
namespace fs = std::filesystem;

namespace {
fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("xmc_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}
}  // namespace

TEST_CASE("byte streams are little-endian") {
  ByteWriter w;
  w.u16(0x0102);
  w.u32(0x03040506);
  w.f64(1.5);
  const auto& b = w.buffer();
  CHECK(b[0] == 0x02);
  CHECK(b[1] == 0x01);
  CHECK(b[2] == 0x06);
  ByteReader r(b);
  CHECK(r.u16() == 0x0102);
  CHECK(r.u32() == 0x03040506u);
  CHECK(r.f64() == 1.5);
  CHECK(r.at_end());
  CHECK_THROWS_AS(r.u8(), FormatError);
}

TEST_CASE("dataset container round trip") {
  const Dataset d = make_dataset(SimConfig{}, 24, 5);
  const auto bytes = encode_dataset(d);
  CHECK(std::string(bytes.data(), 4) == "XMCD");
  ByteReader header(bytes);
  header.bytes(4);
  CHECK(header.u16() == kDatasetVersion);
  CHECK(header.u32() == 32u);
  CHECK(header.u32() == 32u);
  CHECK(header.u32() == 32u);
  CHECK(header.u32() == 32u);
  CHECK(header.u32() == 24u);

  Dataset back = decode_dataset(bytes);
  decode_splits(encode_splits(d), back);
  CHECK(back.size() == d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(back.samples[i].heatmap == d.samples[i].heatmap);
    CHECK(back.samples[i].image == d.samples[i].image);
    CHECK(back.samples[i].class_id == d.samples[i].class_id);
  }
  CHECK(back.train == d.train);
  CHECK(back.test == d.test);
  CHECK(back.vision == d.vision);
  CHECK(encode_dataset(back) == bytes);

  auto truncated = bytes;
  truncated.resize(truncated.size() - 3);
  CHECK_THROWS_AS(decode_dataset(truncated), FormatError);
  auto bad_magic = bytes;
  bad_magic[0] = 'Y';
  CHECK_THROWS_AS(decode_dataset(bad_magic), FormatError);
  CHECK_THROWS_AS(decode_splits("{\"train\": [0]}", back), FormatError);
}

TEST_CASE("files") {
  const fs::path dir = temp_dir("io");
  const Dataset d = make_dataset(SimConfig{}, 16, 6);
  save_dataset(d, dir / "d.bin", dir / "s.json");
  const Dataset back = load_dataset(dir / "d.bin", dir / "s.json");
  CHECK(encode_dataset(back) == encode_dataset(d));
  CHECK(sha256_file(dir / "d.bin") == sha256_hex(encode_dataset(d)));
  CHECK_THROWS_AS(read_file(dir / "missing"), MissingFileError);

  write_text_atomic(dir / "t.txt", "abc");
  const auto t = read_file(dir / "t.txt");
  CHECK(std::string(t.begin(), t.end()) == "abc");
  for (const auto& e : fs::directory_iterator(dir)) {
    CHECK(e.path().filename().string().find(".tmp") == std::string::npos);
  }
  // Known SHA-256 of "abc".
  CHECK(sha256_hex(std::string_view("abc")) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
