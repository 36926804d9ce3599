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

#include "stf/state_space.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "stf/error.hpp"

namespace stf {

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) noexcept {
  if (k > n) return 0;
  k = std::min(k, n - k);
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t result = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    // result * (n - k + i) / i is always integral; split to limit overflow.
    const std::uint64_t num = n - k + i;
    const std::uint64_t g = std::gcd(result, i);
    const std::uint64_t r = result / g;
    const std::uint64_t d = i / g;
    const std::uint64_t f = num / d;  // d divides num after removing gcd
    if (r != 0 && f > kMax / r) return kMax;
    result = r * f;
  }
  return result;
}

StateSpace::StateSpace(std::size_t n_contents, std::size_t cache_size,
                       std::size_t state_cap)
    : n_contents_(n_contents), cache_size_(cache_size) {
  if (cache_size < 1 || cache_size >= n_contents) {
    throw Error(Errc::kInvalidDimensions,
                "need 1 <= L < N_c, got N_c=" + std::to_string(n_contents) +
                    " L=" + std::to_string(cache_size));
  }
  const std::uint64_t count = binomial(n_contents, cache_size);
  if (count > state_cap) {
    throw Error(Errc::kTooLarge, "binomial(" + std::to_string(n_contents) + ", " +
                                     std::to_string(cache_size) +
                                     ") exceeds the state cap of " +
                                     std::to_string(state_cap));
  }
  n_states_ = static_cast<std::size_t>(count);

  contents_.reserve(n_states_ * cache_size_);
  std::vector<ContentId> comb(cache_size_);
  std::iota(comb.begin(), comb.end(), ContentId{0});
  for (std::size_t s = 0; s < n_states_; ++s) {
    contents_.insert(contents_.end(), comb.begin(), comb.end());
    // Advance to the next combination in lexicographic order.
    std::size_t i = cache_size_;
    while (i > 0 && comb[i - 1] == n_contents_ - cache_size_ + (i - 1)) --i;
    if (i == 0) break;
    ++comb[i - 1];
    for (std::size_t j = i; j < cache_size_; ++j) comb[j] = comb[j - 1] + 1;
  }

  const std::size_t stride = n_contents_ + 1;
  rank_table_.assign(cache_size_ * stride, 0);
  for (std::size_t i = 0; i < cache_size_; ++i) {
    for (std::size_t c = 0; c < n_contents_; ++c) {
      rank_table_[i * stride + c + 1] =
          rank_table_[i * stride + c] +
          binomial(n_contents_ - 1 - c, cache_size_ - 1 - i);
    }
  }
}

void StateSpace::check_state(StateIndex k) const {
  if (k >= n_states_) {
    throw Error(Errc::kIndexOutOfRange, "state index " + std::to_string(k) +
                                            " >= N_s=" + std::to_string(n_states_));
  }
}

void StateSpace::check_content(ContentId l) const {
  if (l >= n_contents_) {
    throw Error(Errc::kIndexOutOfRange, "content " + std::to_string(l) +
                                            " >= N_c=" + std::to_string(n_contents_));
  }
}

std::span<const ContentId> StateSpace::state(StateIndex k) const {
  check_state(k);
  return {contents_.data() + k * cache_size_, cache_size_};
}

bool StateSpace::caches(StateIndex k, ContentId l) const {
  const auto s = state(k);
  return std::binary_search(s.begin(), s.end(), l);
}

std::optional<StateIndex> StateSpace::index_of(
    std::span<const ContentId> contents) const {
  if (contents.size() != cache_size_) return std::nullopt;
  const std::size_t stride = n_contents_ + 1;
  std::uint64_t rank = 0;
  std::size_t next_allowed = 0;
  for (std::size_t i = 0; i < cache_size_; ++i) {
    const ContentId c = contents[i];
    if (c >= n_contents_ || c < next_allowed) return std::nullopt;
    rank += rank_table_[i * stride + c] - rank_table_[i * stride + next_allowed];
    next_allowed = c + 1;
  }
  return static_cast<StateIndex>(rank);
}

StateIndex StateSpace::replace(StateIndex k, ContentId evicted,
                               ContentId inserted) const {
  const auto s = state(k);
  std::vector<ContentId> next;
  next.reserve(cache_size_);
  for (ContentId c : s) {
    if (c != evicted) next.push_back(c);
  }
  next.insert(std::upper_bound(next.begin(), next.end(), inserted), inserted);
  return *index_of(next);
}

std::vector<int> StateSpace::state_vector(StateIndex k) const {
  std::vector<int> v(n_contents_, 0);
  for (ContentId c : state(k)) v[c] = 1;
  return v;
}

DenseMatrix StateSpace::state_matrix() const {
  DenseMatrix m(n_contents_, n_states_);
  for (StateIndex k = 0; k < n_states_; ++k) {
    for (ContentId c : state(k)) m(c, k) = 1.0;
  }
  return m;
}

std::vector<StateIndex> StateSpace::neighbors(StateIndex k) const {
  const auto s = state(k);
  std::vector<StateIndex> out;
  out.reserve(cache_size_ * (n_contents_ - cache_size_));
  for (ContentId l = 0; l < n_contents_; ++l) {
    if (std::binary_search(s.begin(), s.end(), l)) continue;
    for (ContentId q : s) out.push_back(replace(k, q, l));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<StateIndex> StateSpace::content_neighbors(StateIndex k,
                                                      ContentId l) const {
  check_content(l);
  if (caches(k, l)) {
    throw Error(Errc::kContentAlreadyCached,
                "content " + std::to_string(l) + " is cached in state " +
                    std::to_string(k));
  }
  std::vector<StateIndex> out;
  out.reserve(cache_size_);
  for (ContentId q : state(k)) out.push_back(replace(k, q, l));
  std::sort(out.begin(), out.end());
  return out;
}

ContentId StateSpace::exchanged_content(StateIndex k, StateIndex m) const {
  const auto a = state(k);
  const auto b = state(m);
  std::vector<ContentId> only_in_k;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(),
                      std::back_inserter(only_in_k));
  if (only_in_k.size() != 1) {
    throw Error(Errc::kNotNeighbors, "states " + std::to_string(k) + " and " +
                                         std::to_string(m) + " are not neighbors");
  }
  return only_in_k.front();
}

}  // namespace stf
