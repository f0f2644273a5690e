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

#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "fssti/core/rng.hpp"
#include "fssti/episodes/synth.hpp"

namespace fssti::episodes {

/// K supports and one query of a single category.
struct Episode {
  std::vector<const Sample*> supports;
  const Sample* query = nullptr;
  int category = 0;
  Domain domain = Domain::kSource;
};

/// Draws K + 1 distinct images of `category` uniformly without replacement;
/// the first draw is the query.
Episode sample_episode(const Dataset& dataset, int category, int k, Rng& rng);

enum class AccessPhase { kFinetune, kEvalSupport, kEvalQuery };

/// Thread-safe log of every sample read through a pool or test-set accessor.
class AccessAudit {
 public:
  void record(AccessPhase phase, const std::string& id);
  std::set<std::string> ids(AccessPhase phase) const;
  std::size_t reads(AccessPhase phase) const;
  void clear();

 private:
  mutable std::mutex mu_;
  std::map<AccessPhase, std::multiset<std::string>> log_;
};

/// Exactly K designated supports per novel category; immutable once built.
class FinetunePool {
 public:
  FinetunePool(int k, std::map<int, std::vector<const Sample*>> supports);

  int k() const { return k_; }
  std::vector<int> categories() const;
  /// Logs the read under `phase` when an audit is attached.
  const Sample& support(int category, int index, AccessPhase phase, AccessAudit* audit) const;
  const std::set<std::string>& ids() const { return ids_; }

 private:
  int k_;
  std::map<int, std::vector<const Sample*>> supports_;
  std::set<std::string> ids_;
};

/// Every target image not in the pool, grouped by category.
class TestSet {
 public:
  explicit TestSet(std::map<int, std::vector<const Sample*>> queries);

  std::vector<int> categories() const;
  std::size_t size(int category) const;
  std::size_t total() const;
  const Sample& query(int category, std::size_t index, AccessAudit* audit) const;
  std::set<std::string> ids() const;

 private:
  std::map<int, std::vector<const Sample*>> queries_;
};

struct StrictSplit {
  FinetunePool pool;
  TestSet test;
};

/// Per target category, K uniformly drawn supports go to the pool and the
/// remaining images to the test set.
StrictSplit make_strict_split(const Dataset& dataset, int k, Rng& rng);

}  // namespace fssti::episodes
