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
#include <map>
#include <string>
#include <vector>

#include "fssti/core/tensor.hpp"

namespace fssti::backbone {

/// One manifest row: {"id", "feature_path", "mask_path"}. Paths are stored as
/// written; relative paths resolve against the manifest's directory.
struct ManifestEntry {
  std::string id;
  std::string feature_path;
  std::string mask_path;
};

inline constexpr const char* kManifestName = "manifest.json";

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path);

/// Precomputed features and masks keyed by id, all sharing one C x H x W shape.
class FeatureProvider {
 public:
  const FeatureMap& features(const std::string& id) const;
  const BinaryMask& mask(const std::string& id) const;
  const std::vector<std::string>& ids() const { return ids_; }
  int channels() const;

  void add(std::string id, FeatureMap features, BinaryMask mask);

 private:
  struct Item {
    FeatureMap features;
    BinaryMask mask;
  };
  std::vector<std::string> ids_;
  std::map<std::string, Item> items_;
};

/// Loads `dir/manifest.json` and every file it names. Throws naming the id on
/// a missing file or a shape that disagrees with the first entry.
FeatureProvider load_external_features(const std::filesystem::path& dir);

}  // namespace fssti::backbone
