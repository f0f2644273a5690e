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

#include "fssti/autodiff/tape.hpp"

#include <stdexcept>

namespace fssti::ad {

Var Tape::leaf(Mat value, bool requires_grad) {
  nodes_.push_back({std::move(value), Mat(), requires_grad, nullptr});
  return {static_cast<int>(nodes_.size()) - 1};
}

Var Tape::record(Mat value, std::initializer_list<Var> parents, Backward backward) {
  bool needs = false;
  for (const auto& p : parents) needs = needs || requires_grad(p);
  nodes_.push_back({std::move(value), Mat(), needs, needs ? std::move(backward) : nullptr});
  return {static_cast<int>(nodes_.size()) - 1};
}

Mat Tape::grad(Var v) const {
  const auto& n = nodes_.at(static_cast<std::size_t>(v.id));
  if (n.grad.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(Var v, const Mat& g) {
  auto& n = nodes_.at(static_cast<std::size_t>(v.id));
  if (!n.requires_grad) return;
  if (g.rows() != n.value.rows() || g.cols() != n.value.cols())
    throw ShapeError("gradient shape does not match node value");
  if (n.grad.size() == 0)
    n.grad = g;
  else
    n.grad += g;
}

void Tape::backward(Var scalar_output) {
  auto& out = nodes_.at(static_cast<std::size_t>(scalar_output.id));
  if (out.value.size() != 1) throw ShapeError("backward() needs a scalar output");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  if (!out.requires_grad) return;
  out.grad = Mat::Ones(1, 1);
  for (auto i = static_cast<int>(scalar_output.id); i >= 0; --i) {
    auto& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.backward || n.grad.size() == 0) continue;
    const Mat g = n.grad;  // the callback may append to other nodes' grads
    n.backward(*this, g);
  }
}

Var add(Tape& t, Var a, Var b) {
  return t.record(t.value(a) + t.value(b), {a, b}, [a, b](Tape& tp, const Mat& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var scale(Tape& t, Var a, double s) {
  return t.record(s * t.value(a), {a}, [a, s](Tape& tp, const Mat& g) { tp.accumulate(a, s * g); });
}

Var sum(Tape& t, std::initializer_list<Var> terms) {
  if (terms.size() == 0) throw std::invalid_argument("sum of no terms");
  Var acc = *terms.begin();
  for (auto it = terms.begin() + 1; it != terms.end(); ++it) acc = add(t, acc, *it);
  return acc;
}

}  // namespace fssti::ad
