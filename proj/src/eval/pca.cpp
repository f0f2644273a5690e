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

#include "fssti/eval/pca.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <stdexcept>

namespace fssti::eval {

namespace {

// Dominant unit eigenvector and eigenvalue of a symmetric PSD matrix.
std::pair<Vec, double> power_iteration(const Eigen::MatrixXd& cov) {
  const Eigen::Index d = cov.rows();
  Vec v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = 1.0 + 0.01 * static_cast<double>(i);
  v.normalize();
  for (int it = 0; it < kPowerMaxIterations; ++it) {
    Vec next = cov * v;
    const double norm = next.norm();
    if (norm <= 0.0) return {v, 0.0};
    next /= norm;
    if (next.dot(v) < 0.0) next = -next;
    const double change = (next - v).norm();
    v = std::move(next);
    if (change < kPowerTolerance) break;
  }
  return {v, v.dot(cov * v)};
}

}  // namespace

PcaResult pca_top2(const std::vector<Vec>& points) {
  if (points.size() < 3) throw std::invalid_argument("PCA needs at least 3 points");
  const Eigen::Index d = points.front().size();
  if (d < 2) throw std::invalid_argument("PCA needs at least 2 dimensions");
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (points[static_cast<std::size_t>(i)].size() != d) throw ShapeError("PCA points differ in size");
    x.row(i) = points[static_cast<std::size_t>(i)].transpose();
  }
  PcaResult r;
  r.mean = x.colwise().mean().transpose();
  x.rowwise() -= r.mean.transpose();
  Eigen::MatrixXd cov = x.transpose() * x / static_cast<double>(n);
  if (cov.trace() <= 0.0) throw std::invalid_argument("PCA of rank-0 data");

  for (int k = 0; k < 2; ++k) {
    auto [v, lambda] = power_iteration(cov);
    if (k == 1) {
      // Re-orthogonalize against the first direction; on rank-1 data any unit
      // vector orthogonal to it is a valid second direction.
      v -= r.components[0].dot(v) * r.components[0];
      if (v.norm() < 1e-12) {
        Eigen::Index j = 0;
        r.components[0].cwiseAbs().minCoeff(&j);
        v = Vec::Unit(d, j);
        v -= r.components[0].dot(v) * r.components[0];
      }
      v.normalize();
      lambda = std::max(0.0, v.dot(cov * v));
    }
    r.components.push_back(v);
    r.variances.push_back(lambda);
    cov -= lambda * v * v.transpose();
  }
  r.coordinates.resize(n, 2);
  for (int k = 0; k < 2; ++k) r.coordinates.col(k) = x * r.components[static_cast<std::size_t>(k)];
  return r;
}

PcaResult pca_export(const std::vector<Vec>& points, const std::vector<std::string>& labels,
                     const std::filesystem::path& path) {
  if (labels.size() != points.size()) throw std::invalid_argument("one label per point required");
  auto r = pca_top2(points);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "label,pc1,pc2\n" << std::setprecision(12);
  for (std::size_t i = 0; i < points.size(); ++i)
    out << labels[i] << ',' << r.coordinates(static_cast<Eigen::Index>(i), 0) << ','
        << r.coordinates(static_cast<Eigen::Index>(i), 1) << '\n';
  return r;
}

Vec channel_means(const FeatureMap& f) { return f.planes().rowwise().mean(); }

}  // namespace fssti::eval
