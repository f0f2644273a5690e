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

#include <functional>
#include <initializer_list>
#include <vector>

#include "fssti/core/tensor.hpp"

namespace fssti::ad {

/// Handle to a tape node.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

class Tape;

/// Receives the gradient of the node's output and accumulates into parents.
using Backward = std::function<void(Tape&, const Mat& grad_out)>;

/// Minimal reverse-mode tape over dense matrices. Nodes are appended in
/// topological order; backward() walks them in reverse.
class Tape {
 public:
  Var leaf(Mat value, bool requires_grad = true);
  Var constant(Mat value) { return leaf(std::move(value), false); }

  /// Records an op. The node requires a gradient iff some parent does; the
  /// backward function is dropped otherwise.
  Var record(Mat value, std::initializer_list<Var> parents, Backward backward);

  const Mat& value(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).value; }
  bool requires_grad(Var v) const {
    return nodes_.at(static_cast<std::size_t>(v.id)).requires_grad;
  }

  /// Gradient of the last backward() target w.r.t. v (zeros if untouched).
  Mat grad(Var v) const;

  void accumulate(Var v, const Mat& g);

  /// Seeds d(out)/d(out) = 1 for a 1 x 1 output and propagates.
  void backward(Var scalar_output);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

// Generic ops used to compose losses.
Var add(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double s);
Var sum(Tape& t, std::initializer_list<Var> terms);

}  // namespace fssti::ad
