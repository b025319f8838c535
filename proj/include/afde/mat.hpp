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

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <vector>

namespace afde {

// Dense row-major matrix of doubles. Kept deliberately small; all heavy
// arithmetic runs through the kernel layer so the backend stays swappable.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), a_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return a_.size(); }
  bool empty() const { return a_.empty(); }

  double* row(std::size_t r) {
    assert(r < rows_);
    return a_.data() + r * cols_;
  }
  const double* row(std::size_t r) const {
    assert(r < rows_);
    return a_.data() + r * cols_;
  }

  double& at(std::size_t r, std::size_t c) {
    assert(r < rows_ && c < cols_);
    return a_[r * cols_ + c];
  }
  double at(std::size_t r, std::size_t c) const {
    assert(r < rows_ && c < cols_);
    return a_[r * cols_ + c];
  }

  double* data() { return a_.data(); }
  const double* data() const { return a_.data(); }

  void zero() { std::fill(a_.begin(), a_.end(), 0.0); }

  void resize(std::size_t rows, std::size_t cols) {
    rows_ = rows;
    cols_ = cols;
    a_.assign(rows * cols, 0.0);
  }

  bool same_shape(const Matrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> a_;
};

}  // namespace afde
