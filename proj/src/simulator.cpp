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

#include "stf/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "stf/error.hpp"

namespace stf {

namespace {

constexpr std::size_t kMaxRecencyEnumeration = 8;

ContentId sample_content(const PopularityVector& upsilon, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  ContentId last_positive = 0;
  for (ContentId l = 0; l < upsilon.size(); ++l) {
    if (upsilon[l] <= 0.0) continue;
    acc += upsilon[l];
    last_positive = l;
    if (u < acc) return l;
  }
  return last_positive;  // u landed in the rounding gap above acc
}

}  // namespace

// --- CacheSim ----------------------------------------------------------------

CacheSim::CacheSim(SchemeSpec scheme, std::size_t n_contents, std::size_t cache_size,
                   std::uint64_t seed)
    : scheme_(std::move(scheme)),
      n_contents_(n_contents),
      cache_size_(cache_size),
      rng_(seed),
      slot_of_(n_contents, -1) {
  if (cache_size < 1 || cache_size >= n_contents) {
    throw Error(Errc::kInvalidDimensions,
                "need 1 <= L < N_c, got N_c=" + std::to_string(n_contents) +
                    " L=" + std::to_string(cache_size));
  }
  if (std::holds_alternative<GeneralReplacement>(scheme_)) {
    throw Error(Errc::kUnsupportedScheme, "the general scheme has no simulator");
  }
  validate_scheme(scheme_, cache_size_);
  slots_.reserve(cache_size_);
  recency_.reserve(cache_size_);
}

void CacheSim::reset(std::span<const ContentId> recency) {
  if (recency.size() != cache_size_) {
    throw Error(Errc::kDimensionMismatch, "initial cache needs exactly L contents");
  }
  std::fill(slot_of_.begin(), slot_of_.end(), -1);
  slots_.clear();
  recency_.clear();
  for (ContentId l : recency) {
    if (l >= n_contents_) throw Error(Errc::kUnknownContent, "content " + std::to_string(l));
    if (slot_of_[l] >= 0) throw Error(Errc::kInvalidDimensions, "duplicate initial content");
    slot_of_[l] = static_cast<int>(slots_.size());
    slots_.push_back(l);
    recency_.push_back(l);
  }
}

std::vector<ContentId> CacheSim::contents() const {
  std::vector<ContentId> out = slots_;
  std::sort(out.begin(), out.end());
  return out;
}

bool CacheSim::needs_prediction(ContentId requested) const {
  return uses_prediction(scheme_) && warm() && requested < n_contents_ && !cached(requested);
}

void CacheSim::touch(ContentId l) {
  const auto it = std::find(recency_.begin(), recency_.end(), l);
  std::rotate(recency_.begin(), it, it + 1);
}

void CacheSim::insert(ContentId l) {
  slot_of_[l] = static_cast<int>(slots_.size());
  slots_.push_back(l);
  recency_.insert(recency_.begin(), l);
}

void CacheSim::evict_and_insert(ContentId victim, ContentId l) {
  const int slot = slot_of_[victim];
  slot_of_[victim] = -1;
  slots_[static_cast<std::size_t>(slot)] = l;
  slot_of_[l] = slot;
  recency_.erase(std::find(recency_.begin(), recency_.end(), victim));
  recency_.insert(recency_.begin(), l);
}

ContentId CacheSim::choose_lp_victim(ContentId l, const PopularityVector& prediction,
                                     double alpha, bool& replace) {
  // Candidates are the cached contents predicted strictly less popular than l,
  // weighted by the predicted gap; slots are scanned in ascending id order so
  // the draw does not depend on slot layout.
  const auto sorted = contents();
  double total = 0.0;
  for (ContentId q : sorted) total += std::max(prediction[l] - prediction[q], 0.0);
  replace = false;
  if (!(total > 0.0) || !rng_.bernoulli(alpha)) return 0;
  const double target = rng_.uniform() * total;
  double acc = 0.0;
  ContentId pick = 0;
  for (ContentId q : sorted) {
    const double gap = std::max(prediction[l] - prediction[q], 0.0);
    if (gap == 0.0) continue;
    acc += gap;
    pick = q;
    if (target < acc) break;
  }
  replace = true;
  return pick;
}

bool CacheSim::step(ContentId requested, const PopularityVector* prediction) {
  if (requested >= n_contents_) {
    throw Error(Errc::kUnknownContent, "content " + std::to_string(requested) +
                                           " outside catalog of " + std::to_string(n_contents_));
  }
  if (cached(requested)) {
    touch(requested);
    return true;
  }
  if (!warm()) {
    insert(requested);
    return false;
  }
  if (uses_prediction(scheme_) && (prediction == nullptr || prediction->size() != n_contents_)) {
    throw Error(Errc::kInvalidPopularity, "LP and TLP need a prediction for every content");
  }

  if (const auto* rr = std::get_if<RandomReplacement>(&scheme_)) {
    if (rng_.bernoulli(static_cast<double>(cache_size_) * rr->phi)) {
      evict_and_insert(slots_[rng_.below(cache_size_)], requested);
    }
  } else if (const auto* lp = std::get_if<ReplaceLessPopular>(&scheme_)) {
    bool replace = false;
    const ContentId victim = choose_lp_victim(requested, *prediction, lp->alpha, replace);
    if (replace) evict_and_insert(victim, requested);
  } else if (const auto* tlp = std::get_if<ReplaceLeastPopular>(&scheme_)) {
    ContentId victim = slots_.front();
    for (ContentId q : slots_) {
      if ((*prediction)[q] < (*prediction)[victim] ||
          ((*prediction)[q] == (*prediction)[victim] && q < victim)) {
        victim = q;
      }
    }
    const double gap = (*prediction)[requested] - (*prediction)[victim];
    if (gap > 0.0) {
      const bool always = tlp->mode == ReplaceLeastPopular::Mode::kAlways;
      if (always || rng_.bernoulli(gap)) evict_and_insert(victim, requested);
    }
  } else {
    evict_and_insert(recency_.back(), requested);
  }
  return false;
}

// --- Trace runs --------------------------------------------------------------

std::vector<bool> run_trace(const SchemeSpec& scheme, std::size_t cache_size,
                            const RequestTrace& trace, const RateModel& model,
                            const Predictor& predictor, std::uint64_t seed, bool lookahead) {
  CacheSim sim(scheme, model.n_contents(), cache_size, seed);
  std::vector<double> times(trace.size());
  std::transform(trace.begin(), trace.end(), times.begin(), [](const Request& r) { return r.time; });
  std::vector<bool> hits;
  hits.reserve(trace.size());
  for (std::size_t n = 0; n < trace.size(); ++n) {
    const ContentId l = trace[n].content;
    if (sim.needs_prediction(l)) {
      const std::size_t target = lookahead && n + 1 < trace.size() ? n + 1 : n;
      const auto prediction = predict_at(predictor, model, times, target);
      hits.push_back(sim.step(l, &prediction));
    } else {
      hits.push_back(sim.step(l));
    }
  }
  return hits;
}

std::uint64_t round_seed(std::uint64_t master, std::size_t round) {
  return derive_seed(master, Stream::kRound, round);
}

std::uint64_t policy_seed(std::uint64_t master, std::size_t round) {
  return derive_seed(round_seed(master, round), Stream::kPolicy, 0);
}

SimResult summarize(std::vector<double> per_round, std::size_t total_requests) {
  SimResult out;
  out.total_requests = total_requests;
  const double n = static_cast<double>(per_round.size());
  if (!per_round.empty()) {
    out.mean = std::accumulate(per_round.begin(), per_round.end(), 0.0) / n;
  }
  if (per_round.size() > 1) {
    double ss = 0.0;
    for (double x : per_round) ss += (x - out.mean) * (x - out.mean);
    out.stderr_ = std::sqrt(ss / (n - 1.0) / n);
  }
  out.per_round = std::move(per_round);
  return out;
}

namespace {

void check_config(const SimConfig& config) {
  if (config.rounds < 1) throw Error(Errc::kInvalidRange, "need at least one round");
  if (!(config.horizon > 0.0)) throw Error(Errc::kInvalidRange, "horizon must be positive");
}

double hit_ratio(const std::vector<bool>& hits) {
  if (hits.empty()) return 0.0;
  return static_cast<double>(std::count(hits.begin(), hits.end(), true)) /
         static_cast<double>(hits.size());
}

}  // namespace

SimResult run_monte_carlo(const SimConfig& config) {
  check_config(config);
  std::vector<double> ratios(config.rounds);
  std::size_t total = 0;
  for (std::size_t r = 0; r < config.rounds; ++r) {
    const std::uint64_t seed = round_seed(config.master_seed, r);
    const auto model = sample_model(config.model, seed);
    const auto trace = sample_trace(model, config.horizon, seed);
    ratios[r] = hit_ratio(run_trace(config.scheme, config.cache_size, trace, model,
                                    config.predictor, policy_seed(config.master_seed, r),
                                    config.lookahead));
    total += trace.size();
  }
  return summarize(std::move(ratios), total);
}

std::vector<SweepRow> sweep_t0max(const SimConfig& config, std::span<const double> t0_values,
                                  std::span<const SchemeSpec> schemes) {
  check_config(config);
  if (t0_values.empty() || schemes.empty()) {
    throw Error(Errc::kInvalidRange, "sweep needs at least one t0 value and one scheme");
  }
  std::vector<SweepRow> rows;
  for (double t0 : t0_values) {
    SimConfig cfg = config;
    cfg.model.t0_max = t0;
    std::vector<std::vector<double>> ratios(schemes.size(), std::vector<double>(cfg.rounds));
    std::size_t total = 0;
    for (std::size_t r = 0; r < cfg.rounds; ++r) {
      const std::uint64_t seed = round_seed(cfg.master_seed, r);
      const auto model = sample_model(cfg.model, seed);
      const auto trace = sample_trace(model, cfg.horizon, seed);
      total += trace.size();
      for (std::size_t s = 0; s < schemes.size(); ++s) {
        ratios[s][r] = hit_ratio(run_trace(schemes[s], cfg.cache_size, trace, model,
                                           cfg.predictor, policy_seed(cfg.master_seed, r),
                                           cfg.lookahead));
      }
    }
    for (std::size_t s = 0; s < schemes.size(); ++s) {
      rows.push_back({t0, scheme_name(schemes[s]), summarize(std::move(ratios[s]), total)});
    }
  }
  return rows;
}

PairedDifference paired_difference(const SimResult& a, const SimResult& b) {
  if (a.per_round.size() != b.per_round.size()) {
    throw Error(Errc::kLengthMismatch, "paired results need the same number of rounds");
  }
  std::vector<double> diff(a.per_round.size());
  for (std::size_t r = 0; r < diff.size(); ++r) diff[r] = a.per_round[r] - b.per_round[r];
  const auto s = summarize(std::move(diff), 0);
  return {s.mean, s.stderr_};
}

// --- Chain validation ----------------------------------------------------------

std::vector<ContentId> sample_recency(std::span<const ContentId> state,
                                      const PopularityVector& upsilon, Rng& rng) {
  if (state.size() > kMaxRecencyEnumeration) {
    throw Error(Errc::kTooExpensive, "recency sampling enumerates at most " +
                                         std::to_string(kMaxRecencyEnumeration) +
                                         " cached contents");
  }
  // Under i.i.d. requests the most recent distinct contents o_1, o_2, ... are
  // drawn without replacement: P(order) = prod_i v(o_i) / (1 - sum_{j<i} v(o_j)).
  std::vector<ContentId> order(state.begin(), state.end());
  std::sort(order.begin(), order.end());
  std::vector<std::vector<ContentId>> orders;
  std::vector<double> weights;
  do {
    double w = 1.0;
    double used = 0.0;
    for (ContentId q : order) {
      const double rest = 1.0 - used;
      w *= rest > 0.0 ? upsilon[q] / rest : 0.0;
      used += upsilon[q];
    }
    orders.push_back(order);
    weights.push_back(w);
  } while (std::next_permutation(order.begin(), order.end()));
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) return orders[rng.below(orders.size())];
  const double target = rng.uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < orders.size(); ++i) {
    acc += weights[i];
    if (target < acc) return orders[i];
  }
  return orders.back();
}

std::vector<double> empirical_scp(const SchemeSpec& scheme, const StateSpace& space,
                                  std::span<const PopularityVector> popularity,
                                  std::span<const PopularityVector> prediction,
                                  StateIndex eta0_state, std::size_t rounds, std::uint64_t seed) {
  if (uses_prediction(scheme) && prediction.size() != popularity.size()) {
    throw Error(Errc::kDimensionMismatch, "need one prediction per step");
  }
  const auto initial = space.state(eta0_state);
  std::vector<double> counts(space.size(), 0.0);
  for (std::size_t r = 0; r < rounds; ++r) {
    Rng rng(seed, Stream::kChain, r);
    CacheSim sim(scheme, space.n_contents(), space.cache_size(), rng.next_u64());
    if (std::holds_alternative<LeastRecentlyUsed>(scheme) && !popularity.empty()) {
      sim.reset(sample_recency(initial, popularity.front(), rng));
    } else {
      sim.reset(initial);
    }
    for (std::size_t t = 0; t < popularity.size(); ++t) {
      const ContentId l = sample_content(popularity[t], rng);
      sim.step(l, uses_prediction(scheme) ? &prediction[t] : nullptr);
    }
    const auto contents = sim.contents();
    counts[*space.index_of(contents)] += 1.0;
  }
  for (double& c : counts) c /= static_cast<double>(rounds);
  return counts;
}

LruTable estimate_lru_table(const StateSpace& space, const PopularityVector& upsilon,
                            std::size_t requests, std::uint64_t seed) {
  const std::size_t cache = space.cache_size();
  std::vector<double> counts(space.size() * cache, 0.0);
  std::vector<bool> visited(space.size(), false);
  Rng rng(seed, Stream::kChain, 0);
  CacheSim sim(LeastRecentlyUsed{}, space.n_contents(), cache, rng.next_u64());
  for (std::size_t n = 0; n < requests; ++n) {
    if (sim.warm()) {
      const auto contents = sim.contents();
      const StateIndex k = *space.index_of(contents);
      const ContentId lru = sim.recency().back();
      const auto pos = std::lower_bound(contents.begin(), contents.end(), lru) - contents.begin();
      counts[k * cache + static_cast<std::size_t>(pos)] += 1.0;
      visited[k] = true;
    }
    sim.step(sample_content(upsilon, rng));
  }
  for (StateIndex k = 0; k < space.size(); ++k) {
    if (!visited[k]) std::fill_n(counts.begin() + static_cast<std::ptrdiff_t>(k * cache), cache, 1.0);
  }
  return LruTable(space, std::move(counts), LruSource::kEstimated);
}

}  // namespace stf
