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

#include "fssti/backbone/external.hpp"

#include <fstream>

#include <json.hpp>

#include "fssti/core/io.hpp"

namespace fssti::backbone {

using nlohmann::json;

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest", path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("manifest " + path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw std::runtime_error("manifest " + path.string() + " is not an array");
  std::vector<ManifestEntry> entries;
  for (const auto& row : doc) {
    entries.push_back({row.at("id").get<std::string>(), row.at("feature_path").get<std::string>(),
                       row.at("mask_path").get<std::string>()});
  }
  return entries;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path) {
  json doc = json::array();
  for (const auto& e : entries)
    doc.push_back({{"id", e.id}, {"feature_path", e.feature_path}, {"mask_path", e.mask_path}});
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest", path);
  out << doc.dump(2) << '\n';
}

const FeatureMap& FeatureProvider::features(const std::string& id) const {
  auto it = items_.find(id);
  if (it == items_.end()) throw std::out_of_range("no external features for id '" + id + "'");
  return it->second.features;
}

const BinaryMask& FeatureProvider::mask(const std::string& id) const {
  auto it = items_.find(id);
  if (it == items_.end()) throw std::out_of_range("no external mask for id '" + id + "'");
  return it->second.mask;
}

int FeatureProvider::channels() const {
  return items_.empty() ? 0 : items_.begin()->second.features.channels();
}

void FeatureProvider::add(std::string id, FeatureMap features, BinaryMask mask) {
  if (!items_.empty()) {
    const auto& ref = items_.begin()->second.features;
    if (!ref.same_shape(features))
      throw ShapeError("external features for id '" + id + "' have shape " +
                       std::to_string(features.channels()) + "x" +
                       std::to_string(features.height()) + "x" + std::to_string(features.width()) +
                       ", expected " + std::to_string(ref.channels()) + "x" +
                       std::to_string(ref.height()) + "x" + std::to_string(ref.width()));
  }
  if (mask.height() != features.height() || mask.width() != features.width())
    throw ShapeError("mask for id '" + id + "' does not match its feature resolution");
  if (items_.count(id)) throw std::invalid_argument("duplicate id '" + id + "' in manifest");
  ids_.push_back(id);
  items_.emplace(std::move(id), Item{std::move(features), std::move(mask)});
}

FeatureProvider load_external_features(const std::filesystem::path& dir) {
  const auto entries = read_manifest(dir / kManifestName);
  FeatureProvider provider;
  for (const auto& e : entries) {
    const auto resolve = [&](const std::string& p) {
      std::filesystem::path path(p);
      return path.is_absolute() ? path : dir / path;
    };
    const auto fpath = resolve(e.feature_path);
    const auto mpath = resolve(e.mask_path);
    if (!std::filesystem::exists(fpath))
      throw IoError("missing feature file for id '" + e.id + "'", fpath);
    if (!std::filesystem::exists(mpath))
      throw IoError("missing mask file for id '" + e.id + "'", mpath);
    provider.add(e.id, read_feature_file(fpath), read_mask_file(mpath));
  }
  return provider;
}

}  // namespace fssti::backbone
