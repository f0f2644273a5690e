// Copyright 2026 The fssti Authors. All Rights Reserved.
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

#include "fssti/core/io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace fssti {

const char* to_string(FormatErrorKind kind) {
  switch (kind) {
    case FormatErrorKind::kBadMagic: return "bad magic";
    case FormatErrorKind::kBadVersion: return "unsupported version";
    case FormatErrorKind::kTruncated: return "truncated payload";
    case FormatErrorKind::kInvalidMask: return "invalid mask entry";
    case FormatErrorKind::kNonFinite: return "non-finite value";
    case FormatErrorKind::kBadShape: return "bad shape";
  }
  return "format error";
}

void write_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> bytes = {
      static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
      static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  out.write(bytes.data(), 4);
}

bool try_read_u32(std::istream& in, std::uint32_t& v, const std::string& context) {
  std::array<unsigned char, 4> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), 4);
  if (in.gcount() == 0) return false;
  if (in.gcount() != 4) throw FormatError(FormatErrorKind::kTruncated, context);
  v = static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
      (static_cast<std::uint32_t>(bytes[2]) << 16) |
      (static_cast<std::uint32_t>(bytes[3]) << 24);
  return true;
}

std::uint32_t read_u32(std::istream& in, const std::string& context) {
  std::uint32_t v = 0;
  if (!try_read_u32(in, v, context))
    throw FormatError(FormatErrorKind::kTruncated, context);
  return v;
}

namespace {

void expect_magic(std::istream& in, const char (&magic)[4], const std::string& context) {
  char got[4] = {};
  in.read(got, 4);
  if (in.gcount() != 4) throw FormatError(FormatErrorKind::kTruncated, context);
  if (std::memcmp(got, magic, 4) != 0)
    throw FormatError(FormatErrorKind::kBadMagic, context);
}

std::uint32_t read_dim(std::istream& in, const std::string& context) {
  const std::uint32_t d = read_u32(in, context);
  if (d == 0 || d > (1u << 20)) throw FormatError(FormatErrorKind::kBadShape, context);
  return d;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing", path);
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading", path);
  return in;
}

}  // namespace

void encode_feature(std::ostream& out, const FeatureMap& f, const std::string& context) {
  if (!f.all_finite()) throw FormatError(FormatErrorKind::kNonFinite, context);
  out.write(kFeatureMagic, 4);
  write_u32(out, kFormatVersion);
  write_u32(out, static_cast<std::uint32_t>(f.channels()));
  write_u32(out, static_cast<std::uint32_t>(f.height()));
  write_u32(out, static_cast<std::uint32_t>(f.width()));
  const auto& p = f.planes();
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const auto v = static_cast<float>(p.data()[i]);
    if (!std::isfinite(v)) throw FormatError(FormatErrorKind::kNonFinite, context);
    write_u32(out, std::bit_cast<std::uint32_t>(v));
  }
}

FeatureMap decode_feature(std::istream& in, const std::string& context) {
  expect_magic(in, kFeatureMagic, context);
  if (read_u32(in, context) != kFormatVersion)
    throw FormatError(FormatErrorKind::kBadVersion, context);
  const auto c = read_dim(in, context);
  const auto h = read_dim(in, context);
  const auto w = read_dim(in, context);
  const std::uint64_t n = std::uint64_t{c} * h * w;
  if (n > (std::uint64_t{1} << 31)) throw FormatError(FormatErrorKind::kBadShape, context);

  std::vector<unsigned char> raw(static_cast<std::size_t>(n) * 4);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size())
    throw FormatError(FormatErrorKind::kTruncated, context);

  FeatureMap f(static_cast<int>(c), static_cast<int>(h), static_cast<int>(w));
  auto* dst = f.planes().data();
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* b = raw.data() + 4 * i;
    const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) |
                               (static_cast<std::uint32_t>(b[1]) << 8) |
                               (static_cast<std::uint32_t>(b[2]) << 16) |
                               (static_cast<std::uint32_t>(b[3]) << 24);
    const float v = std::bit_cast<float>(bits);
    if (!std::isfinite(v)) throw FormatError(FormatErrorKind::kNonFinite, context);
    dst[i] = v;
  }
  return f;
}

void write_feature_file(const FeatureMap& f, const std::filesystem::path& path) {
  // Validate before touching the file so a refused write leaves nothing behind.
  if (!f.all_finite()) throw FormatError(FormatErrorKind::kNonFinite, path.string());
  auto out = open_out(path);
  encode_feature(out, f, path.string());
  if (!out) throw IoError("write failed", path);
}

FeatureMap read_feature_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  return decode_feature(in, path.string());
}

void write_mask_file(const BinaryMask& m, const std::filesystem::path& path) {
  auto out = open_out(path);
  out.write(kMaskMagic, 4);
  write_u32(out, kFormatVersion);
  write_u32(out, static_cast<std::uint32_t>(m.height()));
  write_u32(out, static_cast<std::uint32_t>(m.width()));
  out.write(reinterpret_cast<const char*>(m.values().data()),
            static_cast<std::streamsize>(m.values().size()));
  if (!out) throw IoError("write failed", path);
}

BinaryMask read_mask_file(const std::filesystem::path& path) {
  auto in = open_in(path);
  const std::string context = path.string();
  expect_magic(in, kMaskMagic, context);
  if (read_u32(in, context) != kFormatVersion)
    throw FormatError(FormatErrorKind::kBadVersion, context);
  const auto h = read_dim(in, context);
  const auto w = read_dim(in, context);
  std::vector<std::uint8_t> values(std::size_t{h} * w);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size()));
  if (static_cast<std::size_t>(in.gcount()) != values.size())
    throw FormatError(FormatErrorKind::kTruncated, context);
  for (auto v : values)
    if (v > 1) throw FormatError(FormatErrorKind::kInvalidMask, context);
  return BinaryMask(static_cast<int>(h), static_cast<int>(w), std::move(values));
}

}  // namespace fssti
