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
#include <span>
#include <string>
#include <vector>

#include "stf/popularity.hpp"
#include "stf/rng.hpp"
#include "stf/schemes.hpp"
#include "stf/state_space.hpp"

namespace stf {

/// A single cache executing one replacement scheme request by request.
///
/// The cache starts empty and is filled with the first L distinct requested
/// contents; those requests are misses. The general (phi-table) scheme is
/// analytic only and is rejected with kUnsupportedScheme.
class CacheSim {
 public:
  CacheSim(SchemeSpec scheme, std::size_t n_contents, std::size_t cache_size,
           std::uint64_t seed);

  /// Replaces the cache content. `recency` lists the contents most recent
  /// first; it defines the LRU order and must hold L distinct contents.
  void reset(std::span<const ContentId> recency);

  /// True when the next step for `requested` will consult the prediction.
  bool needs_prediction(ContentId requested) const;

  /// Serves one request. `prediction` is the forecast for the next request
  /// and is required only when needs_prediction(requested).
  /// Throws kUnknownContent and kInvalidPopularity (missing prediction).
  bool step(ContentId requested, const PopularityVector* prediction = nullptr);

  bool warm() const noexcept { return slots_.size() == cache_size_; }
  bool cached(ContentId l) const { return slot_of_.at(l) >= 0; }
  /// Cached contents, sorted ascending.
  std::vector<ContentId> contents() const;
  /// Cached contents, most recently used first.
  const std::vector<ContentId>& recency() const noexcept { return recency_; }

 private:
  void insert(ContentId l);
  void evict_and_insert(ContentId victim, ContentId l);
  void touch(ContentId l);
  ContentId choose_lp_victim(ContentId l, const PopularityVector& prediction, double alpha,
                             bool& replace);

  SchemeSpec scheme_;
  std::size_t n_contents_;
  std::size_t cache_size_;
  Rng rng_;
  std::vector<ContentId> slots_;
  std::vector<int> slot_of_;
  std::vector<ContentId> recency_;
};

/// Runs `trace` through a fresh cache and returns one hit flag per request.
/// Prediction for LP/TLP targets the next request's time with lookahead on,
/// and the current request's time otherwise; the last request always uses
/// its own time.
std::vector<bool> run_trace(const SchemeSpec& scheme, std::size_t cache_size,
                            const RequestTrace& trace, const RateModel& model,
                            const Predictor& predictor, std::uint64_t seed,
                            bool lookahead = true);

struct SimConfig {
  SchemeSpec scheme = RandomReplacement{0.01};
  ModelConfig model;
  double horizon = 5000.0;
  std::size_t rounds = 200;
  std::size_t cache_size = 10;
  std::uint64_t master_seed = 1;
  Predictor predictor = OraclePredictor{};
  bool lookahead = true;
};

struct SimResult {
  std::vector<double> per_round;  // hit ratio per round; 0 for an empty trace
  double mean = 0.0;
  double stderr_ = 0.0;           // standard error of the mean across rounds
  std::size_t total_requests = 0;
};

/// Seeds of round r: the model and trace come from round_seed(master, r);
/// the scheme's own randomness from policy_seed(master, r).
std::uint64_t round_seed(std::uint64_t master, std::size_t round);
std::uint64_t policy_seed(std::uint64_t master, std::size_t round);

/// Independent rounds, each with a freshly sampled model and trace.
/// Throws kInvalidRange unless rounds >= 1 and horizon > 0.
SimResult run_monte_carlo(const SimConfig& config);

/// Aggregates per-round ratios into mean and standard error.
SimResult summarize(std::vector<double> per_round, std::size_t total_requests);

struct SweepRow {
  double t0_max;
  std::string scheme;
  SimResult result;
};

/// For every t0 in `t0_values`, runs all `schemes` on the same per-round
/// model and trace (paired comparison). Row order: t0 major, scheme minor.
std::vector<SweepRow> sweep_t0max(const SimConfig& config, std::span<const double> t0_values,
                                  std::span<const SchemeSpec> schemes);

/// Mean and standard error of the per-round difference a - b.
struct PairedDifference {
  double mean;
  double stderr_;
};
PairedDifference paired_difference(const SimResult& a, const SimResult& b);

/// LRU recency order of the contents of `state` drawn from stationary
/// requests under `upsilon`, most recent first.
std::vector<ContentId> sample_recency(std::span<const ContentId> state,
                                      const PopularityVector& upsilon, Rng& rng);

/// State frequencies after running `rounds` independent caches through
/// requests drawn i.i.d. from popularity[t] at step t, starting in
/// `eta0_state`. prediction[t] is used for the decision at step t. LRU
/// starts from a recency order drawn under popularity[0].
std::vector<double> empirical_scp(const SchemeSpec& scheme, const StateSpace& space,
                                  std::span<const PopularityVector> popularity,
                                  std::span<const PopularityVector> prediction,
                                  StateIndex eta0_state, std::size_t rounds, std::uint64_t seed);

/// P(q is LRU | state k) estimated by simulating `requests` i.i.d. requests
/// under a constant popularity. Rows of unvisited states are uniform.
LruTable estimate_lru_table(const StateSpace& space, const PopularityVector& upsilon,
                            std::size_t requests, std::uint64_t seed);

}  // namespace stf
