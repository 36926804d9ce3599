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

#include "stf/schemes.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stf/error.hpp"

namespace stf {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_popularity(const StateSpace& space, const PopularityVector& v, const char* what) {
  if (v.size() != space.n_contents()) {
    throw Error(Errc::kDimensionMismatch, std::string(what) + " has length " +
                                              std::to_string(v.size()) + ", expected N_c=" +
                                              std::to_string(space.n_contents()));
  }
}

// Predicted-gap weights for LP, aligned with `cached`; all zero when no cached
// content is strictly less predicted-popular than l.
std::vector<double> lp_weights(std::span<const ContentId> cached, ContentId l,
                               const PopularityVector& prediction) {
  std::vector<double> w(cached.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < cached.size(); ++i) {
    const double gap = prediction[l] - prediction[cached[i]];
    if (gap > 0.0) {
      w[i] = gap;
      total += gap;
    }
  }
  if (total > 0.0) {
    for (double& x : w) x /= total;
  }
  return w;
}

// TLP replacement probability of the least predicted-popular content.
double tlp_probability(ReplaceLeastPopular::Mode mode, double gap) {
  if (!(gap > 0.0)) return 0.0;
  return mode == ReplaceLeastPopular::Mode::kAlways ? 1.0 : gap;
}

const LruTable& require_lru(const StateSpace& space, const LruTable* lru) {
  if (lru == nullptr) throw Error(Errc::kMissingLruTable, "LRU needs a recency table");
  if (lru->n_states() != space.size()) {
    throw Error(Errc::kDimensionMismatch, "LRU table does not match the state space");
  }
  return *lru;
}

void check_general(const GeneralReplacement& g, const StateSpace& space) {
  for (const auto& [key, p] : g.table.entries()) {
    if (key.state >= space.size() || key.requested >= space.n_contents() ||
        key.evicted >= space.n_contents() || !space.caches(key.state, key.evicted) ||
        space.caches(key.state, key.requested)) {
      throw Error(Errc::kInvalidScheme,
                  "phi entry (l=" + std::to_string(key.requested) + ", q=" +
                      std::to_string(key.evicted) + ", k=" + std::to_string(key.state) +
                      ") does not describe a replacement");
    }
  }
}

}  // namespace

// --- Scheme helpers -------------------------------------------------------------

double PhiTable::get(StateIndex k, ContentId l, ContentId q) const {
  const auto it = entries_.find(Key{k, l, q});
  return it == entries_.end() ? 0.0 : it->second;
}

std::string scheme_name(const SchemeSpec& scheme) {
  return std::visit(
      Overloaded{[](const RandomReplacement&) { return std::string("rr"); },
                 [](const ReplaceLessPopular&) { return std::string("lp"); },
                 [](const ReplaceLeastPopular& s) {
                   return std::string(s.mode == ReplaceLeastPopular::Mode::kAlways ? "tlpa"
                                                                                    : "tlpp");
                 },
                 [](const LeastRecentlyUsed&) { return std::string("lru"); },
                 [](const GeneralReplacement&) { return std::string("general"); }},
      scheme);
}

bool uses_prediction(const SchemeSpec& scheme) noexcept {
  return std::holds_alternative<ReplaceLessPopular>(scheme) ||
         std::holds_alternative<ReplaceLeastPopular>(scheme);
}

void validate_scheme(const SchemeSpec& scheme, std::size_t cache_size) {
  if (const auto* rr = std::get_if<RandomReplacement>(&scheme)) {
    const double cap = 1.0 / static_cast<double>(cache_size);
    if (!(rr->phi > 0.0) || rr->phi > cap * (1.0 + 1e-12)) {
      throw Error(Errc::kInvalidScheme,
                  "RR needs 0 < phi <= 1/L, got phi=" + std::to_string(rr->phi));
    }
  } else if (const auto* lp = std::get_if<ReplaceLessPopular>(&scheme)) {
    if (!(lp->alpha > 0.0) || lp->alpha > 1.0) {
      throw Error(Errc::kInvalidScheme,
                  "LP needs 0 < alpha <= 1, got alpha=" + std::to_string(lp->alpha));
    }
  }
}

SchemeSpec general_phi_table(std::span<const PhiEntry> entries) {
  std::map<PhiTable::Key, double> table;
  std::map<std::pair<StateIndex, ContentId>, double> row_sums;
  for (const auto& e : entries) {
    if (!std::isfinite(e.probability) || e.probability < 0.0 || e.probability > 1.0) {
      throw Error(Errc::kInvalidProbability,
                  "phi value " + std::to_string(e.probability) + " is not in [0, 1]");
    }
    table[PhiTable::Key{e.state, e.requested, e.evicted}] += e.probability;
    row_sums[{e.state, e.requested}] += e.probability;
  }
  for (const auto& [row, sum] : row_sums) {
    if (sum > 1.0 + 1e-12) {
      throw Error(Errc::kRowSumExceedsOne,
                  "phi row (k=" + std::to_string(row.first) + ", l=" +
                      std::to_string(row.second) + ") sums to " + std::to_string(sum));
    }
  }
  return GeneralReplacement{PhiTable(std::move(table))};
}

double predicted_state_mass(const StateSpace& space, StateIndex k,
                            const PopularityVector& prediction) {
  double sum = 0.0;
  for (ContentId q : space.state(k)) sum += prediction[q];
  return sum;
}

ContentId least_predicted(const StateSpace& space, StateIndex k,
                          const PopularityVector& prediction) {
  const auto s = space.state(k);
  ContentId best = s.front();
  for (ContentId q : s) {
    if (prediction[q] < prediction[best]) best = q;  // strict: lowest id wins ties
  }
  return best;
}

// --- LRU recency ----------------------------------------------------------------

PopularityHistory::PopularityHistory(std::vector<PopularityVector> entries)
    : entries_(std::move(entries)) {
  for (const auto& e : entries_) {
    if (e.size() != entries_.front().size()) {
      throw Error(Errc::kDimensionMismatch, "history entries differ in length");
    }
  }
}

PopularityHistory PopularityHistory::constant(const PopularityVector& popularity,
                                              std::size_t length) {
  return PopularityHistory(std::vector<PopularityVector>(length, popularity));
}

const PopularityVector& PopularityHistory::before(std::size_t j) const {
  if (j == 0 || j > entries_.size()) {
    throw Error(Errc::kWindowTooShort, "history has no entry for request n-" + std::to_string(j));
  }
  return entries_[entries_.size() - j];
}

LruTable::LruTable(const StateSpace& space, std::vector<double> probs, LruSource source)
    : n_states_(space.size()),
      cache_size_(space.cache_size()),
      probs_(std::move(probs)),
      source_(source) {
  if (probs_.size() != n_states_ * cache_size_) {
    throw Error(Errc::kDimensionMismatch, "LRU table needs N_s * L entries");
  }
  for (StateIndex k = 0; k < n_states_; ++k) {
    double sum = 0.0;
    for (std::size_t i = 0; i < cache_size_; ++i) {
      const double p = probs_[k * cache_size_ + i];
      if (!std::isfinite(p) || p < 0.0) {
        throw Error(Errc::kInvalidProbability, "negative LRU probability");
      }
      sum += p;
    }
    if (!(sum > 0.0)) {
      throw Error(Errc::kInvalidProbability, "LRU row " + std::to_string(k) + " is all zero");
    }
    for (std::size_t i = 0; i < cache_size_; ++i) probs_[k * cache_size_ + i] /= sum;
  }
}

LruTable LruTable::uniform(const StateSpace& space) {
  return LruTable(space, std::vector<double>(space.size() * space.cache_size(), 1.0),
                  LruSource::kSupplied);
}

std::span<const double> LruTable::row(StateIndex k) const {
  return {probs_.data() + k * cache_size_, cache_size_};
}

double LruTable::prob(const StateSpace& space, ContentId q, StateIndex k) const {
  const auto s = space.state(k);
  const auto it = std::lower_bound(s.begin(), s.end(), q);
  if (it == s.end() || *it != q) return 0.0;
  return row(k)[static_cast<std::size_t>(it - s.begin())];
}

namespace {

constexpr std::size_t kMaxLruOthers = 20;

// Joint probabilities rho(q*, w, k) for w = L, L+1, ... for every cached q*
// of state k, via a dynamic program over the set of other cached contents
// already covered by the in-window requests (processed newest first).
class RecencyWindows {
 public:
  RecencyWindows(const StateSpace& space, const PopularityHistory& history, StateIndex k)
      : space_(space), history_(history), cached_(space.state(k)) {
    const std::size_t others = cached_.size() - 1;
    if (others > kMaxLruOthers) {
      throw Error(Errc::kTooExpensive, "LRU recency enumeration over " +
                                           std::to_string(others) +
                                           " other cached contents exceeds the cap");
    }
    full_ = (std::size_t{1} << others) - 1;
    dp_.assign(cached_.size(), std::vector<double>(full_ + 1, 0.0));
    for (auto& d : dp_) d[0] = 1.0;
  }

  // Number of in-window requests processed so far (w - 1 for the next window).
  std::size_t processed() const noexcept { return processed_; }

  // rho(cached[i], processed() + 1, k); needs history entry processed() + 1.
  double joint(std::size_t i) const {
    return dp_[i][full_] * history_.before(processed_ + 1)[cached_[i]];
  }

  // Probability that all processed requests were for contents of k other than
  // cached[i]; bounds every longer window for that q*.
  double alive(std::size_t i) const {
    double s = 0.0;
    for (double x : dp_[i]) s += x;
    return s;
  }

  // Absorb request n - processed() - 1 into every window.
  void advance() {
    const auto& upsilon = history_.before(processed_ + 1);
    for (std::size_t i = 0; i < cached_.size(); ++i) {
      std::vector<double> next(full_ + 1, 0.0);
      std::size_t bit = 0;
      for (std::size_t j = 0; j < cached_.size(); ++j) {
        if (j == i) continue;
        const double p = upsilon[cached_[j]];
        const std::size_t b = std::size_t{1} << bit++;
        if (p == 0.0) continue;
        for (std::size_t mask = 0; mask <= full_; ++mask) {
          if (dp_[i][mask] != 0.0) next[mask | b] += dp_[i][mask] * p;
        }
      }
      dp_[i] = std::move(next);
    }
    ++processed_;
  }

 private:
  const StateSpace& space_;
  const PopularityHistory& history_;
  std::span<const ContentId> cached_;
  std::size_t full_ = 0;
  std::size_t processed_ = 0;
  std::vector<std::vector<double>> dp_;
};

std::size_t position_in_state(const StateSpace& space, StateIndex k, ContentId q) {
  const auto s = space.state(k);
  const auto it = std::lower_bound(s.begin(), s.end(), q);
  if (it == s.end() || *it != q) {
    throw Error(Errc::kNotCached, "content " + std::to_string(q) + " is not cached in state " +
                                      std::to_string(k));
  }
  return static_cast<std::size_t>(it - s.begin());
}

std::vector<double> recency_distribution(const StateSpace& space, const PopularityHistory& history,
                                         StateIndex k, const LruOptions& options) {
  const std::size_t cache = space.cache_size();
  if (options.w_max < cache || history.size() < options.w_max) {
    throw Error(Errc::kWindowTooShort,
                "need history length >= w_max >= L (history " + std::to_string(history.size()) +
                    ", w_max " + std::to_string(options.w_max) + ", L " + std::to_string(cache) +
                    ")");
  }
  RecencyWindows windows(space, history, k);
  std::vector<double> total(cache, 0.0);
  while (windows.processed() + 1 <= options.w_max) {
    const std::size_t w = windows.processed() + 1;
    double alive = 0.0;
    for (std::size_t i = 0; i < cache; ++i) {
      if (w >= cache) total[i] += windows.joint(i);
    }
    if (w == options.w_max) break;
    windows.advance();
    for (std::size_t i = 0; i < cache; ++i) alive += windows.alive(i);
    if (w >= cache && alive < options.tail_tol) break;
  }
  double denom = 0.0;
  for (double x : total) denom += x;
  if (!(denom > 0.0)) return std::vector<double>(cache, 1.0 / static_cast<double>(cache));
  for (double& x : total) x /= denom;
  return total;
}

}  // namespace

double lru_joint_prob(const StateSpace& space, const PopularityHistory& history,
                      ContentId q_star, std::size_t w, StateIndex k) {
  const std::size_t i = position_in_state(space, k, q_star);
  if (w < space.cache_size()) {
    throw Error(Errc::kWindowTooShort, "window " + std::to_string(w) + " shorter than L=" +
                                           std::to_string(space.cache_size()));
  }
  if (history.size() < w) {
    throw Error(Errc::kWindowTooShort, "history of " + std::to_string(history.size()) +
                                           " requests cannot cover window " + std::to_string(w));
  }
  RecencyWindows windows(space, history, k);
  while (windows.processed() + 1 < w) windows.advance();
  return windows.joint(i);
}

double lru_conditional_prob(const StateSpace& space, const PopularityHistory& history,
                            ContentId q_star, StateIndex k, const LruOptions& options) {
  const std::size_t i = position_in_state(space, k, q_star);
  return recency_distribution(space, history, k, options)[i];
}

LruTable lru_table_exact(const StateSpace& space, const PopularityHistory& history,
                         const LruOptions& options) {
  std::vector<double> probs;
  probs.reserve(space.size() * space.cache_size());
  for (StateIndex k = 0; k < space.size(); ++k) {
    const auto row = recency_distribution(space, history, k, options);
    probs.insert(probs.end(), row.begin(), row.end());
  }
  return LruTable(space, std::move(probs), LruSource::kExact);
}

// --- TransitionMatrix ---------------------------------------------------------------

TransitionMatrix::Builder::Builder(std::size_t dim) : dim_(dim) { col_start_.push_back(0); }

void TransitionMatrix::Builder::flush_until(StateIndex col) {
  while (current_ < col) {
    std::sort(pending_.begin(), pending_.end(),
              [](const Entry& a, const Entry& b) { return a.row < b.row; });
    for (const Entry& e : pending_) {
      if (!entries_.empty() && col_start_.back() < entries_.size() &&
          entries_.back().row == e.row) {
        entries_.back().value += e.value;
      } else {
        entries_.push_back(e);
      }
    }
    pending_.clear();
    col_start_.push_back(entries_.size());
    ++current_;
  }
}

void TransitionMatrix::Builder::add(StateIndex col, StateIndex row, double value) {
  if (col >= dim_ || row >= dim_ || col < current_) {
    throw Error(Errc::kIndexOutOfRange, "transition entry outside the matrix");
  }
  flush_until(col);
  if (value != 0.0) pending_.push_back({row, value});
}

TransitionMatrix TransitionMatrix::Builder::build(Source source) {
  flush_until(dim_);
  TransitionMatrix m;
  m.col_start_ = std::move(col_start_);
  m.entries_ = std::move(entries_);
  m.source_ = source;
  return m;
}

TransitionMatrix TransitionMatrix::identity(std::size_t dim) {
  Builder b(dim);
  for (StateIndex k = 0; k < dim; ++k) b.add(k, k, 1.0);
  return b.build();
}

std::span<const TransitionMatrix::Entry> TransitionMatrix::column(StateIndex k) const {
  if (k >= dim()) throw Error(Errc::kIndexOutOfRange, "column " + std::to_string(k));
  return {entries_.data() + col_start_[k], col_start_[k + 1] - col_start_[k]};
}

double TransitionMatrix::operator()(StateIndex row, StateIndex col) const {
  for (const Entry& e : column(col)) {
    if (e.row == row) return e.value;
  }
  return 0.0;
}

double TransitionMatrix::column_sum(StateIndex k) const {
  double s = 0.0;
  for (const Entry& e : column(k)) s += e.value;
  return s;
}

std::vector<double> TransitionMatrix::apply(std::span<const double> x) const {
  if (x.size() != dim()) {
    throw Error(Errc::kDimensionMismatch, "vector length " + std::to_string(x.size()) +
                                              " does not match matrix dimension " +
                                              std::to_string(dim()));
  }
  std::vector<double> y(dim(), 0.0);
  for (StateIndex k = 0; k < dim(); ++k) {
    if (x[k] == 0.0) continue;
    for (const Entry& e : column(k)) y[e.row] += e.value * x[k];
  }
  return y;
}

double max_abs_difference(const TransitionMatrix& a, const TransitionMatrix& b) {
  if (a.dim() != b.dim()) throw Error(Errc::kDimensionMismatch, "matrix dimensions differ");
  double worst = 0.0;
  for (StateIndex k = 0; k < a.dim(); ++k) {
    for (const auto& e : a.column(k)) worst = std::max(worst, std::abs(e.value - b(e.row, k)));
    for (const auto& e : b.column(k)) worst = std::max(worst, std::abs(e.value - a(e.row, k)));
  }
  return worst;
}

// --- Conditional matrices -----------------------------------------------------------

std::vector<double> replacement_probabilities(const SchemeSpec& scheme, const StateSpace& space,
                                              StateIndex k, ContentId l,
                                              const PopularityVector& prediction,
                                              const LruTable* lru) {
  const auto cached = space.state(k);
  std::vector<double> probs(cached.size(), 0.0);
  std::visit(
      Overloaded{
          [&](const RandomReplacement& rr) { std::fill(probs.begin(), probs.end(), rr.phi); },
          [&](const ReplaceLessPopular& lp) {
            probs = lp_weights(cached, l, prediction);
            for (double& p : probs) p *= lp.alpha;
          },
          [&](const ReplaceLeastPopular& tlp) {
            const ContentId victim = least_predicted(space, k, prediction);
            const double p = tlp_probability(tlp.mode, prediction[l] - prediction[victim]);
            probs[position_in_state(space, k, victim)] = p;
          },
          [&](const LeastRecentlyUsed&) {
            const auto row = require_lru(space, lru).row(k);
            std::copy(row.begin(), row.end(), probs.begin());
          },
          [&](const GeneralReplacement& g) {
            for (std::size_t i = 0; i < cached.size(); ++i) probs[i] = g.table.get(k, l, cached[i]);
          }},
      scheme);
  return probs;
}

TransitionMatrix conditional_transition(const SchemeSpec& scheme, const StateSpace& space,
                                        ContentId l, const PopularityVector& prediction,
                                        const LruTable* lru) {
  validate_scheme(scheme, space.cache_size());
  check_popularity(space, prediction, "prediction");
  if (l >= space.n_contents()) {
    throw Error(Errc::kUnknownContent, "content " + std::to_string(l) + " outside catalog");
  }
  if (std::holds_alternative<LeastRecentlyUsed>(scheme)) require_lru(space, lru);
  if (const auto* g = std::get_if<GeneralReplacement>(&scheme)) check_general(*g, space);

  TransitionMatrix::Builder builder(space.size());
  for (StateIndex k = 0; k < space.size(); ++k) {
    if (space.caches(k, l)) {
      builder.add(k, k, 1.0);
      continue;
    }
    const auto cached = space.state(k);
    const auto probs = replacement_probabilities(scheme, space, k, l, prediction, lru);
    double stay = 1.0;
    for (std::size_t i = 0; i < cached.size(); ++i) {
      if (probs[i] == 0.0) continue;
      builder.add(k, space.replace(k, cached[i], l), probs[i]);
      stay -= probs[i];
    }
    builder.add(k, k, stay);
  }
  return builder.build(lru != nullptr && std::holds_alternative<LeastRecentlyUsed>(scheme)
                           ? static_cast<TransitionMatrix::Source>(
                                 static_cast<int>(lru->source()) + 1)
                           : TransitionMatrix::Source::kAnalytic);
}

// --- Overall matrices -------------------------------------------------------------
//
// Each scheme's overall matrix is written out from its closed form: a diagonal
// term per state plus one term per neighbor m, where e(m, k) is the inserted
// content and e(k, m) the evicted one.

TransitionMatrix overall_transition(const SchemeSpec& scheme, const StateSpace& space,
                                    const PopularityVector& upsilon,
                                    const PopularityVector& prediction, const LruTable* lru) {
  validate_scheme(scheme, space.cache_size());
  check_popularity(space, upsilon, "popularity");
  check_popularity(space, prediction, "prediction");
  if (std::holds_alternative<LeastRecentlyUsed>(scheme)) require_lru(space, lru);
  if (const auto* g = std::get_if<GeneralReplacement>(&scheme)) check_general(*g, space);

  const double cache = static_cast<double>(space.cache_size());
  TransitionMatrix::Builder builder(space.size());
  for (StateIndex k = 0; k < space.size(); ++k) {
    const auto cached = space.state(k);
    double cached_mass = 0.0;
    for (ContentId q : cached) cached_mass += upsilon[q];
    const double missing_mass = 1.0 - cached_mass;
    const double min_pred = prediction[least_predicted(space, k, prediction)];
    const ContentId victim = least_predicted(space, k, prediction);

    double diagonal = 0.0;
    std::visit(
        Overloaded{
            [&](const RandomReplacement& rr) {
              diagonal = 1.0 - cache * rr.phi * missing_mass;
              for (StateIndex m : space.neighbors(k)) {
                builder.add(k, m, rr.phi * upsilon[space.exchanged_content(m, k)]);
              }
            },
            [&](const ReplaceLessPopular& lp) {
              double below = 0.0;
              double above = 0.0;
              for (ContentId l = 0; l < space.n_contents(); ++l) {
                if (space.caches(k, l)) continue;
                (prediction[l] > min_pred ? above : below) += upsilon[l];
              }
              diagonal = cached_mass + below + above * (1.0 - lp.alpha);
              for (StateIndex m : space.neighbors(k)) {
                const ContentId in = space.exchanged_content(m, k);
                const ContentId out = space.exchanged_content(k, m);
                if (!(prediction[out] < prediction[in])) continue;
                const auto w = lp_weights(cached, in, prediction);
                const double phi = w[position_in_state(space, k, out)];
                builder.add(k, m, lp.alpha * upsilon[in] * phi);
              }
            },
            [&](const ReplaceLeastPopular& tlp) {
              diagonal = cached_mass;
              for (ContentId l = 0; l < space.n_contents(); ++l) {
                if (space.caches(k, l)) continue;
                diagonal += upsilon[l] *
                            (1.0 - tlp_probability(tlp.mode, prediction[l] - min_pred));
              }
              for (StateIndex m : space.neighbors(k)) {
                if (space.exchanged_content(k, m) != victim) continue;
                const ContentId in = space.exchanged_content(m, k);
                const double phi = tlp_probability(tlp.mode, prediction[in] - min_pred);
                builder.add(k, m, upsilon[in] * phi);
              }
            },
            [&](const LeastRecentlyUsed&) {
              diagonal = cached_mass;
              for (StateIndex m : space.neighbors(k)) {
                const double rho = lru->prob(space, space.exchanged_content(k, m), k);
                builder.add(k, m, upsilon[space.exchanged_content(m, k)] * rho);
              }
            },
            [&](const GeneralReplacement& g) {
              diagonal = 1.0;
              for (StateIndex m : space.neighbors(k)) {
                const ContentId in = space.exchanged_content(m, k);
                const double p = upsilon[in] * g.table.get(k, in, space.exchanged_content(k, m));
                builder.add(k, m, p);
                diagonal -= p;
              }
            }},
        scheme);
    builder.add(k, k, diagonal);
  }
  return builder.build(lru != nullptr && std::holds_alternative<LeastRecentlyUsed>(scheme)
                           ? static_cast<TransitionMatrix::Source>(
                                 static_cast<int>(lru->source()) + 1)
                           : TransitionMatrix::Source::kAnalytic);
}

}  // namespace stf
