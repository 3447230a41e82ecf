// Copyright 2026 The partape Authors. All Rights Reserved.
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
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "partape/errors.hpp"
#include "partape/parallel/team.hpp"

namespace partape::linsolve {

// Square CSR matrix of doubles. Column indices are sorted within each row.
// Matrices built through the factory functions have a structurally symmetric
// pattern (explicit zeros where needed), which transpose_in_place relies on.
class SparseMatrix {
 public:
  SparseMatrix() = default;

  // Pattern holding the diagonal plus (i, j) and (j, i) for every pair.
  static SparseMatrix from_pattern(std::size_t n,
                                   const std::vector<std::pair<std::int32_t, std::int32_t>>& pairs) {
    std::vector<std::vector<std::int32_t>> cols(n);
    for (std::size_t i = 0; i < n; ++i) cols[i].push_back(static_cast<std::int32_t>(i));
    for (const auto& [a, b] : pairs) {
      if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= n || static_cast<std::size_t>(b) >= n) {
        throw ContractViolation("matrix pattern index out of range");
      }
      cols[static_cast<std::size_t>(a)].push_back(b);
      cols[static_cast<std::size_t>(b)].push_back(a);
    }
    SparseMatrix m;
    m.n_ = n;
    m.row_ptr_.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& c = cols[i];
      std::sort(c.begin(), c.end());
      c.erase(std::unique(c.begin(), c.end()), c.end());
      m.row_ptr_[i + 1] = m.row_ptr_[i] + c.size();
      m.col_.insert(m.col_.end(), c.begin(), c.end());
    }
    m.val_.assign(m.col_.size(), 0.0);
    return m;
  }

  // Dense row-major input; nonzeros and their mirror positions are stored.
  static SparseMatrix from_dense(std::size_t n, const std::vector<double>& a) {
    std::vector<std::pair<std::int32_t, std::int32_t>> pairs;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j && a[i * n + j] != 0.0) {
          pairs.emplace_back(static_cast<std::int32_t>(i), static_cast<std::int32_t>(j));
        }
      }
    }
    SparseMatrix m = from_pattern(n, pairs);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (a[i * n + j] != 0.0) m.at(i, j) = a[i * n + j];
      }
    }
    return m;
  }

  // Raw CSR arrays; no symmetry is enforced.
  static SparseMatrix from_csr(std::size_t n, std::vector<std::size_t> row_ptr,
                               std::vector<std::int32_t> col, std::vector<double> val) {
    if (row_ptr.size() != n + 1 || col.size() != val.size() || row_ptr.back() != col.size()) {
      throw ContractViolation("inconsistent CSR arrays");
    }
    SparseMatrix m;
    m.n_ = n;
    m.row_ptr_ = std::move(row_ptr);
    m.col_ = std::move(col);
    m.val_ = std::move(val);
    return m;
  }

  std::size_t size() const { return n_; }
  std::size_t nonzeros() const { return val_.size(); }
  const std::vector<std::size_t>& row_ptr() const { return row_ptr_; }
  const std::vector<std::int32_t>& col() const { return col_; }
  std::vector<double>& values() { return val_; }
  const std::vector<double>& values() const { return val_; }

  // Position of (i, j) in the value array, or npos.
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t find(std::size_t i, std::size_t j) const {
    const auto first = col_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
    const auto last = col_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
    const auto it = std::lower_bound(first, last, static_cast<std::int32_t>(j));
    if (it == last || *it != static_cast<std::int32_t>(j)) return npos;
    return static_cast<std::size_t>(it - col_.begin());
  }

  double& at(std::size_t i, std::size_t j) {
    const std::size_t k = find(i, j);
    if (k == npos) {
      throw ContractViolation("entry (" + std::to_string(i) + ", " + std::to_string(j) +
                              ") is not in the sparsity pattern");
    }
    return val_[k];
  }

  double get(std::size_t i, std::size_t j) const {
    const std::size_t k = find(i, j);
    return k == npos ? 0.0 : val_[k];
  }

  void set_zero() { std::fill(val_.begin(), val_.end(), 0.0); }

  bool structurally_symmetric() const {
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
        if (find(static_cast<std::size_t>(col_[k]), i) == npos) return false;
      }
    }
    return true;
  }

  // Replaces the values by those of the transpose, swapping mirror entries
  // in place.
  void transpose_in_place() {
    if (!structurally_symmetric()) {
      throw ContractViolation("transpose_in_place needs a structurally symmetric pattern");
    }
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
        const auto j = static_cast<std::size_t>(col_[k]);
        if (j > i) std::swap(val_[k], val_[find(j, i)]);
      }
    }
  }

  std::vector<double> diagonal() const {
    std::vector<double> d(n_);
    for (std::size_t i = 0; i < n_; ++i) d[i] = get(i, i);
    return d;
  }

  // y = A x for the rows [begin, end).
  void multiply_rows(std::span<const double> x, std::span<double> y, std::size_t begin,
                     std::size_t end) const {
    for (std::size_t i = begin; i < end; ++i) {
      double s = 0.0;
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
        s += val_[k] * x[static_cast<std::size_t>(col_[k])];
      }
      y[i] = s;
    }
  }

  // Collective product: each member computes its row chunk, then the team
  // synchronizes.
  void multiply(const Team& team, std::span<const double> x, std::span<double> y) const {
    const auto [b, e] = team.chunk(n_);
    multiply_rows(x, y, b, e);
    team.sync();
  }

  std::vector<double> to_dense() const {
    std::vector<double> a(n_ * n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
        a[i * n_ + static_cast<std::size_t>(col_[k])] = val_[k];
      }
    }
    return a;
  }

  friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::int32_t> col_;
  std::vector<double> val_;
};

}  // namespace partape::linsolve
