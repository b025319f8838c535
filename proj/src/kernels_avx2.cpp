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

// AVX2 kernel variants. Each loop performs the same rounding sequence per
// output element as the scalar reference (separate mul and add, no FMA), so
// results are bit-identical; the equivalence tests enforce that with memcmp.

#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

#include <cmath>

#include "afde/kernels.hpp"

namespace afde {
namespace kernels {
namespace {

void axpy_avx2(double* y, double a, const double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d vx = _mm256_loadu_pd(x + i);
    const __m256d vy = _mm256_loadu_pd(y + i);
    _mm256_storeu_pd(y + i, _mm256_add_pd(vy, _mm256_mul_pd(va, vx)));
  }
  for (std::size_t i = n4; i < n; ++i) y[i] += a * x[i];
}

void scale_avx2(double* y, double a, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < n4; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(y + i), va));
  }
  for (std::size_t i = n4; i < n; ++i) y[i] *= a;
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d vx = _mm256_loadu_pd(x + i);
    const __m256d vy = _mm256_loadu_pd(y + i);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(vx, vy));
  }
  // (acc0 + acc2) + (acc1 + acc3), matching the scalar reference.
  const __m128d lo = _mm256_castpd256_pd128(acc);
  const __m128d hi = _mm256_extractf128_pd(acc, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  double s = _mm_cvtsd_f64(pair) + _mm_cvtsd_f64(_mm_unpackhi_pd(pair, pair));
  for (std::size_t i = n4; i < n; ++i) s += x[i] * y[i];
  return s;
}

void spmm_rows_avx2(const std::uint64_t* row_ptr, const std::uint32_t* col_idx,
                    const double* values, const double* x, std::size_t d,
                    double* y, std::size_t row_begin, std::size_t row_end) {
  const std::size_t d4 = d - d % 4;
  for (std::size_t r = row_begin; r < row_end; ++r) {
    double* out = y + r * d;
    for (std::size_t j = 0; j < d4; j += 4) _mm256_storeu_pd(out + j, _mm256_setzero_pd());
    for (std::size_t j = d4; j < d; ++j) out[j] = 0.0;
    for (std::uint64_t e = row_ptr[r]; e < row_ptr[r + 1]; ++e) {
      const double a = values[e];
      const __m256d va = _mm256_set1_pd(a);
      const double* src = x + static_cast<std::size_t>(col_idx[e]) * d;
      for (std::size_t j = 0; j < d4; j += 4) {
        const __m256d vs = _mm256_loadu_pd(src + j);
        const __m256d vo = _mm256_loadu_pd(out + j);
        _mm256_storeu_pd(out + j, _mm256_add_pd(vo, _mm256_mul_pd(va, vs)));
      }
      for (std::size_t j = d4; j < d; ++j) out[j] += a * src[j];
    }
  }
}

void adam_step_avx2(double* w, double* m, double* v, const double* g,
                    std::size_t n, double lr, double beta1, double beta2,
                    double eps, double bc1, double bc2) {
  const double c1 = 1.0 - beta1;
  const double c2 = 1.0 - beta2;
  const __m256d vb1 = _mm256_set1_pd(beta1);
  const __m256d vb2 = _mm256_set1_pd(beta2);
  const __m256d vc1 = _mm256_set1_pd(c1);
  const __m256d vc2 = _mm256_set1_pd(c2);
  const __m256d vbc1 = _mm256_set1_pd(bc1);
  const __m256d vbc2 = _mm256_set1_pd(bc2);
  const __m256d veps = _mm256_set1_pd(eps);
  const __m256d vlr = _mm256_set1_pd(lr);
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d gi = _mm256_loadu_pd(g + i);
    const __m256d mi =
        _mm256_add_pd(_mm256_mul_pd(vb1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(vc1, gi));
    const __m256d vi = _mm256_add_pd(_mm256_mul_pd(vb2, _mm256_loadu_pd(v + i)),
                                     _mm256_mul_pd(vc2, _mm256_mul_pd(gi, gi)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d mh = _mm256_div_pd(mi, vbc1);
    const __m256d vh = _mm256_div_pd(vi, vbc2);
    const __m256d den = _mm256_add_pd(_mm256_sqrt_pd(vh), veps);
    const __m256d step = _mm256_mul_pd(vlr, _mm256_div_pd(mh, den));
    _mm256_storeu_pd(w + i, _mm256_sub_pd(_mm256_loadu_pd(w + i), step));
  }
  for (std::size_t i = n4; i < n; ++i) {
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

const Kernels avx2_kernels = {
    "avx2", axpy_avx2, scale_avx2, dot_avx2, spmm_rows_avx2, adam_step_avx2,
};

}  // namespace kernels
}  // namespace afde

#endif  // x86
