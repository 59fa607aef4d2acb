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

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "xmc/autodiff.hpp"

namespace xmc::test {

// Central-difference check of the gradients already stored on `params`.
// Returns the worst |g_a - g_fd| / max(1, |g_a|, |g_fd|) over all entries.
inline double max_fd_error(const std::vector<ad::Tensor>& params, const std::function<double()>& loss,
                           double h = 1e-5) {
  double worst = 0.0;
  for (ad::Tensor p : params) {
    const MatrixXr analytic = p.grad();
    MatrixXr& v = p.mutable_value();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double keep = v.data()[i];
      v.data()[i] = keep + h;
      const double up = loss();
      v.data()[i] = keep - h;
      const double down = loss();
      v.data()[i] = keep;
      const double fd = (up - down) / (2.0 * h);
      const double a = analytic.data()[i];
      worst = std::max(worst, std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)}));
    }
  }
  return worst;
}

inline MatrixXr random_matrix(Eigen::Index r, Eigen::Index c, unsigned seed) {
  std::srand(seed);
  return MatrixXr::Random(r, c);
}

}  // namespace xmc::test
