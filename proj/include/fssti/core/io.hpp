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

#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "fssti/core/tensor.hpp"

namespace fssti {

/// Failure to open, read or write a file.
class IoError : public std::runtime_error {
 public:
  IoError(const std::string& what, std::filesystem::path path)
      : std::runtime_error(what + ": " + path.string()), path_(std::move(path)) {}
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

enum class FormatErrorKind {
  kBadMagic,
  kBadVersion,
  kTruncated,
  kInvalidMask,
  kNonFinite,
  kBadShape,
};

const char* to_string(FormatErrorKind kind);

/// Malformed FTNS / FMSK / checkpoint payload.
class FormatError : public std::runtime_error {
 public:
  FormatError(FormatErrorKind kind, const std::string& context)
      : std::runtime_error(std::string(to_string(kind)) + " (" + context + ")"),
        kind_(kind) {}
  FormatErrorKind kind() const { return kind_; }

 private:
  FormatErrorKind kind_;
};

inline constexpr char kFeatureMagic[4] = {'F', 'T', 'N', 'S'};
inline constexpr char kMaskMagic[4] = {'F', 'M', 'S', 'K'};
inline constexpr std::uint32_t kFormatVersion = 1;

// FTNS: "FTNS", u32 version, u32 C, u32 H, u32 W, C*H*W f32; little-endian.
void write_feature_file(const FeatureMap& f, const std::filesystem::path& path);
FeatureMap read_feature_file(const std::filesystem::path& path);

// FMSK: "FMSK", u32 version, u32 H, u32 W, H*W u8 in {0, 1}.
void write_mask_file(const BinaryMask& m, const std::filesystem::path& path);
BinaryMask read_mask_file(const std::filesystem::path& path);

// Stream-level codecs, shared with the checkpoint format.
void encode_feature(std::ostream& out, const FeatureMap& f, const std::string& context);
FeatureMap decode_feature(std::istream& in, const std::string& context);

void write_u32(std::ostream& out, std::uint32_t v);
/// Returns false on clean EOF before the first byte; throws on a partial read.
bool try_read_u32(std::istream& in, std::uint32_t& v, const std::string& context);
std::uint32_t read_u32(std::istream& in, const std::string& context);

}  // namespace fssti
