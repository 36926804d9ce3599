// Copyright 2026 The stfcache Authors.
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
#include <optional>
#include <span>
#include <vector>

namespace stf {

using ContentId = std::uint32_t;
using StateIndex = std::size_t;

/// Dense row-major matrix; only used for small exported objects such as the
/// cache state matrix.
class DenseMatrix {
 public:
  DenseMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

/// Binomial coefficient, saturating at UINT64_MAX instead of overflowing.
std::uint64_t binomial(std::uint64_t n, std::uint64_t k) noexcept;

/// All L-subsets of an N_c content catalog, in lexicographic order of the
/// sorted content sets. A state index is the lexicographic rank of its set.
///
/// Immutable after construction and safe to share between threads.
class StateSpace {
 public:
  static constexpr std::size_t kDefaultStateCap = 1'000'000;

  /// Throws kInvalidDimensions unless 1 <= cache_size < n_contents, and
  /// kTooLarge when binomial(n_contents, cache_size) exceeds `state_cap`.
  StateSpace(std::size_t n_contents, std::size_t cache_size,
             std::size_t state_cap = kDefaultStateCap);

  std::size_t n_contents() const noexcept { return n_contents_; }
  std::size_t cache_size() const noexcept { return cache_size_; }
  std::size_t size() const noexcept { return n_states_; }

  /// Sorted contents of state k.
  std::span<const ContentId> state(StateIndex k) const;

  bool caches(StateIndex k, ContentId l) const;

  /// Rank of a sorted, duplicate-free set of exactly L valid contents.
  std::optional<StateIndex> index_of(std::span<const ContentId> contents) const;

  /// State reached from k by evicting `evicted` and inserting `inserted`.
  /// Preconditions (unchecked): evicted is cached in k, inserted is not.
  StateIndex replace(StateIndex k, ContentId evicted, ContentId inserted) const;

  /// Binary membership vector s_k of length N_c.
  std::vector<int> state_vector(StateIndex k) const;

  /// N_c x N_s matrix whose column k is state_vector(k).
  DenseMatrix state_matrix() const;

  /// States sharing exactly L-1 contents with k, in ascending index order.
  std::vector<StateIndex> neighbors(StateIndex k) const;

  /// States obtained from k by replacing one cached content with l.
  /// Throws kContentAlreadyCached if l is cached in k.
  std::vector<StateIndex> content_neighbors(StateIndex k, ContentId l) const;

  /// The unique content cached in k but not in m. Throws kNotNeighbors.
  ContentId exchanged_content(StateIndex k, StateIndex m) const;

 private:
  void check_state(StateIndex k) const;
  void check_content(ContentId l) const;

  std::size_t n_contents_;
  std::size_t cache_size_;
  std::size_t n_states_;
  std::vector<ContentId> contents_;  // n_states_ rows of cache_size_ entries
  // rank_table_[i * (n_contents_ + 1) + c]: number of states whose i-th
  // content is smaller than c given the same prefix; see index_of().
  std::vector<std::uint64_t> rank_table_;
};

}  // namespace stf
