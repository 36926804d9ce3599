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

#include <compare>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "stf/popularity.hpp"
#include "stf/state_space.hpp"

namespace stf {

// --- Replacement schemes ------------------------------------------------------

/// RR: on a miss each cached content is replaced with probability phi, so a
/// replacement happens with probability L * phi. Requires 0 < phi <= 1/L.
struct RandomReplacement {
  double phi = 0.1;
};

/// LP: on a miss for l, with probability alpha replace a cached q whose
/// predicted popularity is strictly below l's, chosen with weight
/// proportional to the predicted gap. Requires 0 < alpha <= 1.
struct ReplaceLessPopular {
  double alpha = 0.9;
};

/// TLP: on a miss for l, replace the least predicted-popular cached content
/// q+ if it is strictly less predicted-popular than l. TLP-A always does so,
/// TLP-P with probability equal to the predicted gap.
struct ReplaceLeastPopular {
  enum class Mode { kAlways, kProbabilistic };
  Mode mode = Mode::kAlways;
};

/// LRU: on a miss evict the least-recently-used content. The analytic path
/// needs an LruTable with P(q is LRU | state k).
struct LeastRecentlyUsed {};

/// phi(l, q, k): probability of replacing cached q by requested l in state k.
class PhiTable {
 public:
  struct Key {
    StateIndex state;
    ContentId requested;
    ContentId evicted;
    auto operator<=>(const Key&) const = default;
  };

  PhiTable() = default;
  explicit PhiTable(std::map<Key, double> entries) : entries_(std::move(entries)) {}

  double get(StateIndex k, ContentId l, ContentId q) const;
  const std::map<Key, double>& entries() const noexcept { return entries_; }

 private:
  std::map<Key, double> entries_;
};

struct GeneralReplacement {
  PhiTable table;
};

using SchemeSpec = std::variant<RandomReplacement, ReplaceLessPopular, ReplaceLeastPopular,
                                LeastRecentlyUsed, GeneralReplacement>;

/// Short stable label: rr, lp, tlpa, tlpp, lru or general.
std::string scheme_name(const SchemeSpec& scheme);

bool uses_prediction(const SchemeSpec& scheme) noexcept;

/// Throws kInvalidScheme when parameters violate the scheme's ranges.
void validate_scheme(const SchemeSpec& scheme, std::size_t cache_size);

struct PhiEntry {
  ContentId requested;
  ContentId evicted;
  StateIndex state;
  double probability;
};

/// Builds a General scheme. Throws kInvalidProbability for values outside
/// [0, 1] and kRowSumExceedsOne when some (state, requested) row sums past 1.
SchemeSpec general_phi_table(std::span<const PhiEntry> entries);

// --- LRU recency ----------------------------------------------------------------

/// Popularity at the requests preceding request n, oldest first:
/// entry size()-j holds the popularity at request n-j.
class PopularityHistory {
 public:
  explicit PopularityHistory(std::vector<PopularityVector> entries);
  static PopularityHistory constant(const PopularityVector& popularity, std::size_t length);

  std::size_t size() const noexcept { return entries_.size(); }
  /// Popularity at request n - j, for 1 <= j <= size().
  const PopularityVector& before(std::size_t j) const;

 private:
  std::vector<PopularityVector> entries_;
};

enum class LruSource { kExact, kEstimated, kSupplied };

/// P(q is the LRU content | state k) for every state, aligned with the
/// sorted contents of each state. Rows are normalized on construction.
class LruTable {
 public:
  /// `probs` holds N_s * L entries, row k aligned with space.state(k).
  /// Throws kDimensionMismatch on size errors and kInvalidProbability for
  /// negative entries or an all-zero row.
  LruTable(const StateSpace& space, std::vector<double> probs, LruSource source);

  static LruTable uniform(const StateSpace& space);

  std::span<const double> row(StateIndex k) const;
  /// Probability that q is LRU in state k, 0 when q is not cached there.
  double prob(const StateSpace& space, ContentId q, StateIndex k) const;
  LruSource source() const noexcept { return source_; }
  std::size_t n_states() const noexcept { return n_states_; }

 private:
  std::size_t n_states_;
  std::size_t cache_size_;
  std::vector<double> probs_;
  LruSource source_;
};

struct LruOptions {
  std::size_t w_max = 256;
  double tail_tol = 1e-15;
};

/// Joint probability that the cache is in state k, q_star is its LRU content
/// at request n, and q_star was last requested at request n - w. The sum over
/// ordered surjective allocations of the w-1 in-window requests onto the
/// other cached contents is accumulated by a dynamic program over the set of
/// covered contents. Throws kNotCached, kWindowTooShort (w < L or history
/// shorter than w) or kTooExpensive (more than 20 other cached contents).
double lru_joint_prob(const StateSpace& space, const PopularityHistory& history,
                      ContentId q_star, std::size_t w, StateIndex k);

/// P(q_star is LRU | state k), summing windows w = L .. w_max and stopping
/// once the probability of any longer window is below tail_tol. If state k is
/// unreachable under the history the uniform 1/L is returned.
/// Throws kWindowTooShort unless history.size() >= w_max >= L.
double lru_conditional_prob(const StateSpace& space, const PopularityHistory& history,
                            ContentId q_star, StateIndex k, const LruOptions& options = {});

/// lru_conditional_prob for every (q, k).
LruTable lru_table_exact(const StateSpace& space, const PopularityHistory& history,
                         const LruOptions& options = {});

// --- Transition matrices --------------------------------------------------------

/// Square column-stochastic matrix stored sparsely by column; entry (m, k) is
/// the probability of moving from state k to state m.
class TransitionMatrix {
 public:
  struct Entry {
    StateIndex row;
    double value;
  };

  enum class Source { kAnalytic, kLruExact, kLruEstimated, kLruSupplied };

  class Builder {
   public:
    explicit Builder(std::size_t dim);
    /// Adds to column `col`; columns must be filled in ascending order.
    void add(StateIndex col, StateIndex row, double value);
    TransitionMatrix build(Source source = Source::kAnalytic);

   private:
    void flush_until(StateIndex col);
    std::size_t dim_;
    StateIndex current_ = 0;
    std::vector<Entry> pending_;
    std::vector<std::size_t> col_start_;
    std::vector<Entry> entries_;
  };

  static TransitionMatrix identity(std::size_t dim);

  std::size_t dim() const noexcept { return col_start_.size() - 1; }
  std::size_t nonzeros() const noexcept { return entries_.size(); }
  std::span<const Entry> column(StateIndex k) const;
  double operator()(StateIndex row, StateIndex col) const;
  double column_sum(StateIndex k) const;
  Source source() const noexcept { return source_; }

  /// Theta * x. Throws kDimensionMismatch.
  std::vector<double> apply(std::span<const double> x) const;

 private:
  TransitionMatrix() = default;
  std::vector<std::size_t> col_start_{0};
  std::vector<Entry> entries_;
  Source source_ = Source::kAnalytic;
};

/// Largest |A(m,k) - B(m,k)| over all entries.
double max_abs_difference(const TransitionMatrix& a, const TransitionMatrix& b);

/// Probabilities of evicting each cached content of k when l (not cached)
/// is requested, aligned with space.state(k). Sums to at most 1.
std::vector<double> replacement_probabilities(const SchemeSpec& scheme, const StateSpace& space,
                                              StateIndex k, ContentId l,
                                              const PopularityVector& prediction,
                                              const LruTable* lru = nullptr);

/// Theta_l: transitions given that content l is requested.
/// Throws kMissingLruTable for LRU without a table, kInvalidScheme for bad
/// parameters, and kDimensionMismatch on size errors.
TransitionMatrix conditional_transition(const SchemeSpec& scheme, const StateSpace& space,
                                        ContentId l, const PopularityVector& prediction,
                                        const LruTable* lru = nullptr);

/// Theta = sum_l upsilon_l Theta_l, assembled directly from each scheme's
/// closed-form entries rather than by summing conditional matrices.
TransitionMatrix overall_transition(const SchemeSpec& scheme, const StateSpace& space,
                                    const PopularityVector& upsilon,
                                    const PopularityVector& prediction,
                                    const LruTable* lru = nullptr);

/// Sum of predicted popularity over the contents of state k.
double predicted_state_mass(const StateSpace& space, StateIndex k,
                            const PopularityVector& prediction);

/// Least predicted-popular cached content of k; ties go to the lowest id.
ContentId least_predicted(const StateSpace& space, StateIndex k,
                          const PopularityVector& prediction);

}  // namespace stf
