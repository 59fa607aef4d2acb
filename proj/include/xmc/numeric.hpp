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

#pragma once

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Core>

#include "xmc/error.hpp"
#include "xmc/types.hpp"

namespace xmc {

/// Rows with Euclidean norm at or below this value cannot be normalized.
constexpr double kNormEpsilon = 1e-12;

/// Row-wise log(sum(exp(.))) with max-subtraction.
template <typename Derived>
ColVector<typename Derived::Scalar> logsumexp_rows(const Eigen::MatrixBase<Derived>& s) {
  using Scalar = typename Derived::Scalar;
  ColVector<Scalar> out(s.rows());
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const Scalar m = s.row(r).maxCoeff();
    if (!std::isfinite(m)) {
      throw DomainError("logsumexp_rows: non-finite entry in row " + std::to_string(r));
    }
    out(r) = m + std::log((s.row(r).array() - m).exp().sum());
  }
  return out;
}

/// Row-wise softmax; each output row sums to one.
template <typename Derived>
RowMatrix<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& s) {
  using Scalar = typename Derived::Scalar;
  RowMatrix<Scalar> p(s.rows(), s.cols());
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const Scalar m = s.row(r).maxCoeff();
    p.row(r) = (s.row(r).array() - m).exp().matrix();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

/// Scales every row to unit Euclidean norm. Throws DegenerateInputError naming
/// the first row whose norm does not exceed `eps`.
template <typename Derived>
RowMatrix<typename Derived::Scalar> normalize_rows(const Eigen::MatrixBase<Derived>& v,
                                                   double eps = kNormEpsilon) {
  RowMatrix<typename Derived::Scalar> out(v.rows(), v.cols());
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    const auto n = v.row(r).norm();
    if (!(n > eps)) {
      throw DegenerateInputError("l2_normalize: row " + std::to_string(r) + " has norm " +
                                 std::to_string(static_cast<double>(n)));
    }
    out.row(r) = v.row(r) / n;
  }
  return out;
}

/// Largest deviation of a row norm from one.
template <typename Derived>
typename Derived::Scalar max_unit_norm_deviation(const Eigen::MatrixBase<Derived>& v) {
  typename Derived::Scalar worst = 0;
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    worst = std::max(worst, std::abs(v.row(r).norm() - typename Derived::Scalar(1)));
  }
  return worst;
}

/// Index of the largest entry in each row (first one on ties).
template <typename Derived>
Eigen::VectorXi argmax_rows(const Eigen::MatrixBase<Derived>& s) {
  Eigen::VectorXi out(s.rows());
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    Eigen::Index c = 0;
    s.row(r).maxCoeff(&c);
    out(r) = static_cast<int>(c);
  }
  return out;
}

inline bool all_finite(const MatrixXr& m) { return m.allFinite(); }

}  // namespace xmc
