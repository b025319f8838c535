// Copyright 2026 The afde authors
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

// Scalar reference kernels. These define the rounding-sequence contract the
// SIMD variants must reproduce bit for bit; keep the expression shapes in
// sync with kernels_avx2.cpp when touching anything here.

#include <cmath>

#include "afde/kernels.hpp"

namespace afde {
namespace kernels {
namespace {

void axpy_scalar(double* y, double a, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_scalar(double* y, double a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] *= a;
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < n4; i += 4) {
    acc0 += x[i] * y[i];
    acc1 += x[i + 1] * y[i + 1];
    acc2 += x[i + 2] * y[i + 2];
    acc3 += x[i + 3] * y[i + 3];
  }
  double s = (acc0 + acc2) + (acc1 + acc3);
  for (std::size_t i = n4; i < n; ++i) s += x[i] * y[i];
  return s;
}

void spmm_rows_scalar(const std::uint64_t* row_ptr, const std::uint32_t* col_idx,
                      const double* values, const double* x, std::size_t d,
                      double* y, std::size_t row_begin, std::size_t row_end) {
  for (std::size_t r = row_begin; r < row_end; ++r) {
    double* out = y + r * d;
    for (std::size_t j = 0; j < d; ++j) out[j] = 0.0;
    for (std::uint64_t e = row_ptr[r]; e < row_ptr[r + 1]; ++e) {
      const double a = values[e];
      const double* src = x + static_cast<std::size_t>(col_idx[e]) * d;
      for (std::size_t j = 0; j < d; ++j) out[j] += a * src[j];
    }
  }
}

void adam_step_scalar(double* w, double* m, double* v, const double* g,
                      std::size_t n, double lr, double beta1, double beta2,
                      double eps, double bc1, double bc2) {
  const double c1 = 1.0 - beta1;
  const double c2 = 1.0 - beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const double gi = g[i];
    const double mi = beta1 * m[i] + c1 * gi;
    const double vi = beta2 * v[i] + c2 * (gi * gi);
    m[i] = mi;
    v[i] = vi;
    const double mh = mi / bc1;
    const double vh = vi / bc2;
    w[i] -= lr * (mh / (std::sqrt(vh) + eps));
  }
}

}  // namespace

const Kernels scalar_kernels = {
    "scalar", axpy_scalar, scale_scalar, dot_scalar, spmm_rows_scalar,
    adam_step_scalar,
};

}  // namespace kernels
}  // namespace afde
