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

#pragma once

#include <cstddef>
#include <cstdint>

namespace afde {
namespace kernels {

// Data-parallel inner loops, provided as a scalar reference implementation
// and an AVX2 variant selected at runtime. Both backends implement the exact
// same rounding sequence per output element, so their results are required to
// be bit-identical (the test suite compares them with memcmp):
//
//  - axpy / scale / adam_step are elementwise: one product rounding and one
//    sum rounding per element, no FMA contraction (the translation units are
//    built with -ffp-contract=off).
//  - dot uses four interleaved accumulators, acc[j] summing elements with
//    index == j (mod 4) over the first 4*(n/4) elements, combined as
//    (acc0 + acc2) + (acc1 + acc3), then the remainder added left to right.
//    This matches the AVX2 lane layout and its 128-bit horizontal reduction.
//  - spmm_rows accumulates each output row in CSR storage order:
//    y[r][j] += a_rc * x[c][j] for the row's entries in increasing column
//    order. Row results are independent, so callers may partition rows across
//    threads without changing any bit of the output.
struct Kernels {
  const char* name;

  // y[i] += a * x[i]
  void (*axpy)(double* y, double a, const double* x, std::size_t n);

  // y[i] *= a
  void (*scale)(double* y, double a, std::size_t n);

  // sum_i x[i] * y[i], lane-blocked order as described above
  double (*dot)(const double* x, const double* y, std::size_t n);

  // Y[r] = sum over CSR entries (r, c, a) of a * X[c], rows [row_begin, row_end).
  // Output rows are zeroed first. X has d columns, row-major; Y likewise.
  void (*spmm_rows)(const std::uint64_t* row_ptr, const std::uint32_t* col_idx,
                    const double* values, const double* x, std::size_t d,
                    double* y, std::size_t row_begin, std::size_t row_end);

  // Bias-corrected Adam step on a flat parameter block.
  //   m = beta1*m + (1-beta1)*g
  //   v = beta2*v + (1-beta2)*g*g
  //   w -= lr * (m/bc1) / (sqrt(v/bc2) + eps)
  // bc1/bc2 are the bias corrections 1 - beta^t for the current step t.
  void (*adam_step)(double* w, double* m, double* v, const double* g,
                    std::size_t n, double lr, double beta1, double beta2,
                    double eps, double bc1, double bc2);
};

enum class Backend { scalar, avx2 };

extern const Kernels scalar_kernels;
#if defined(__x86_64__) || defined(__i386__)
extern const Kernels avx2_kernels;
#endif

bool cpu_has_avx2();

// Active backend: picked once from the CPU and the AFDE_KERNELS environment
// variable (scalar | avx2 | auto). set_backend exists for the equivalence
// tests; it returns false if the requested backend is unavailable.
const Kernels& active();
bool set_backend(Backend b);
const char* backend_name();

}  // namespace kernels
}  // namespace afde
