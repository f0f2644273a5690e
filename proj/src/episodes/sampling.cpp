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

#include "fssti/episodes/sampling.hpp"

#include <stdexcept>

namespace fssti::episodes {

namespace {

// First `count` entries of a partial Fisher-Yates shuffle.
std::vector<std::size_t> draw_without_replacement(std::vector<std::size_t> items,
                                                  std::size_t count, Rng& rng) {
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_index(items.size() - i));
    std::swap(items[i], items[j]);
  }
  items.resize(count);
  return items;
}

}  // namespace

Episode sample_episode(const Dataset& dataset, int category, int k, Rng& rng) {
  if (k < 1) throw std::invalid_argument("K must be at least 1");
  const auto pool = dataset.category_indices(category);
  if (pool.size() < static_cast<std::size_t>(k) + 1)
    throw std::invalid_argument("category " + std::to_string(category) + " has " +
                                std::to_string(pool.size()) + " images, need " +
                                std::to_string(k + 1));
  const auto picked = draw_without_replacement(pool, static_cast<std::size_t>(k) + 1, rng);
  Episode e;
  e.category = category;
  e.query = &dataset.samples()[picked[0]];
  e.domain = e.query->domain;
  for (std::size_t i = 1; i < picked.size(); ++i) e.supports.push_back(&dataset.samples()[picked[i]]);
  return e;
}

void AccessAudit::record(AccessPhase phase, const std::string& id) {
  std::lock_guard lock(mu_);
  log_[phase].insert(id);
}

std::set<std::string> AccessAudit::ids(AccessPhase phase) const {
  std::lock_guard lock(mu_);
  auto it = log_.find(phase);
  if (it == log_.end()) return {};
  return {it->second.begin(), it->second.end()};
}

std::size_t AccessAudit::reads(AccessPhase phase) const {
  std::lock_guard lock(mu_);
  auto it = log_.find(phase);
  return it == log_.end() ? 0 : it->second.size();
}

void AccessAudit::clear() {
  std::lock_guard lock(mu_);
  log_.clear();
}

FinetunePool::FinetunePool(int k, std::map<int, std::vector<const Sample*>> supports)
    : k_(k), supports_(std::move(supports)) {
  if (k_ < 1) throw std::invalid_argument("K must be at least 1");
  if (supports_.empty()) throw std::invalid_argument("fine-tune pool has no categories");
  for (const auto& [cat, shots] : supports_) {
    if (shots.size() != static_cast<std::size_t>(k_))
      throw std::invalid_argument("pool category " + std::to_string(cat) + " holds " +
                                  std::to_string(shots.size()) + " supports, expected " +
                                  std::to_string(k_));
    for (const auto* s : shots) {
      if (s->category != cat) throw std::invalid_argument("pool sample '" + s->id + "' is miscategorized");
      if (!ids_.insert(s->id).second) throw std::invalid_argument("duplicate pool id '" + s->id + "'");
    }
  }
}

std::vector<int> FinetunePool::categories() const {
  std::vector<int> out;
  for (const auto& [cat, shots] : supports_) out.push_back(cat);
  return out;
}

const Sample& FinetunePool::support(int category, int index, AccessPhase phase,
                                    AccessAudit* audit) const {
  const auto& shots = supports_.at(category);
  const Sample& s = *shots.at(static_cast<std::size_t>(index));
  if (audit) audit->record(phase, s.id);
  return s;
}

TestSet::TestSet(std::map<int, std::vector<const Sample*>> queries) : queries_(std::move(queries)) {}

std::vector<int> TestSet::categories() const {
  std::vector<int> out;
  for (const auto& [cat, qs] : queries_) out.push_back(cat);
  return out;
}

std::size_t TestSet::size(int category) const {
  auto it = queries_.find(category);
  return it == queries_.end() ? 0 : it->second.size();
}

std::size_t TestSet::total() const {
  std::size_t n = 0;
  for (const auto& [cat, qs] : queries_) n += qs.size();
  return n;
}

const Sample& TestSet::query(int category, std::size_t index, AccessAudit* audit) const {
  const Sample& s = *queries_.at(category).at(index);
  if (audit) audit->record(AccessPhase::kEvalQuery, s.id);
  return s;
}

std::set<std::string> TestSet::ids() const {
  std::set<std::string> out;
  for (const auto& [cat, qs] : queries_)
    for (const auto* s : qs) out.insert(s->id);
  return out;
}

StrictSplit make_strict_split(const Dataset& dataset, int k, Rng& rng) {
  if (k < 1) throw std::invalid_argument("K must be at least 1");
  const auto cats = dataset.categories(Domain::kTarget);
  if (cats.empty()) throw std::invalid_argument("dataset has no target categories");
  std::map<int, std::vector<const Sample*>> pool, test;
  for (int cat : cats) {
    const auto idx = dataset.category_indices(cat);
    if (idx.size() <= static_cast<std::size_t>(k))
      throw std::invalid_argument("target category " + std::to_string(cat) + " has " +
                                  std::to_string(idx.size()) + " images, need more than K = " +
                                  std::to_string(k));
    const auto order = draw_without_replacement(idx, idx.size(), rng);
    for (std::size_t i = 0; i < order.size(); ++i) {
      const Sample* s = &dataset.samples()[order[i]];
      (i < static_cast<std::size_t>(k) ? pool[cat] : test[cat]).push_back(s);
    }
  }
  return {FinetunePool(k, std::move(pool)), TestSet(std::move(test))};
}

}  // namespace fssti::episodes
