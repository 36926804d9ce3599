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

#include "stf/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>

#include "stf/error.hpp"

namespace stf {

namespace {

void check_length(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw Error(Errc::kDimensionMismatch, std::string(what) + " has length " +
                                              std::to_string(got) + ", expected " +
                                              std::to_string(want));
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Rank of the N_c x |cols| submatrix of C_s, by Gaussian elimination.
std::size_t state_matrix_rank(const StateSpace& space, std::span<const StateIndex> cols) {
  const std::size_t rows = space.n_contents();
  std::vector<std::vector<double>> m(cols.size(), std::vector<double>(rows, 0.0));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    for (ContentId q : space.state(cols[c])) m[c][q] = 1.0;
  }
  // Work on the transpose: the rank of the column set equals the row rank.
  std::size_t rank = 0;
  for (std::size_t col = 0; col < rows && rank < m.size(); ++col) {
    std::size_t pivot = rank;
    for (std::size_t r = rank; r < m.size(); ++r) {
      if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
    }
    if (std::abs(m[pivot][col]) < 1e-9) continue;
    std::swap(m[pivot], m[rank]);
    for (std::size_t r = rank + 1; r < m.size(); ++r) {
      const double f = m[r][col] / m[rank][col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < rows; ++c) m[r][c] -= f * m[rank][c];
    }
    ++rank;
  }
  return rank;
}

// sum_{q in C_k} w_q for every state k.
std::vector<double> state_sums(const StateSpace& space, std::span<const double> w) {
  std::vector<double> z(space.size(), 0.0);
  for (StateIndex k = 0; k < space.size(); ++k) {
    for (ContentId q : space.state(k)) z[k] += w[q];
  }
  return z;
}

const LruTable* step_table(const SchemeSpec& scheme, std::span<const LruTable> tables,
                           std::size_t t) {
  if (!std::holds_alternative<LeastRecentlyUsed>(scheme)) return nullptr;
  if (t >= tables.size()) {
    throw Error(Errc::kMissingLruTable, "no LRU table for step " + std::to_string(t + 1));
  }
  return &tables[t];
}

}  // namespace

// --- SCP / CCP ------------------------------------------------------------------

std::vector<double> ccp_from_scp(const StateSpace& space, std::span<const double> eta) {
  check_length(eta.size(), space.size(), "SCP vector");
  std::vector<double> lambda(space.n_contents(), 0.0);
  for (StateIndex k = 0; k < space.size(); ++k) {
    if (eta[k] == 0.0) continue;
    for (ContentId q : space.state(k)) lambda[q] += eta[k];
  }
  return lambda;
}

ScpResult scp_from_ccp(const StateSpace& space, std::span<const double> lambda,
                       const ScpOptions& options) {
  check_length(lambda.size(), space.n_contents(), "CCP vector");
  const double cache = static_cast<double>(space.cache_size());
  double sum = 0.0;
  for (double x : lambda) {
    if (!std::isfinite(x) || x < -1e-12 || x > 1.0 + 1e-12) {
      throw Error(Errc::kInfeasible, "CCP entry " + std::to_string(x) + " is not in [0, 1]");
    }
    sum += x;
  }
  if (std::abs(sum - cache) > 1e-9) {
    throw Error(Errc::kInfeasible, "CCP entries sum to " + std::to_string(sum) + ", not L");
  }

  // C_s C_s^T = a I + b J, inverted in closed form.
  const double n = static_cast<double>(space.n_contents());
  const double a = static_cast<double>(binomial(space.n_contents() - 2, space.cache_size() - 1));
  const double b = space.cache_size() >= 2
                       ? static_cast<double>(binomial(space.n_contents() - 2,
                                                      space.cache_size() - 2))
                       : 0.0;
  const double shrink = b / (a + n * b);

  const std::size_t dim = space.size();
  auto project_affine = [&](std::vector<double>& x) {
    auto r = ccp_from_scp(space, x);
    double rsum = 0.0;
    for (std::size_t q = 0; q < r.size(); ++q) {
      r[q] -= lambda[q];
      rsum += r[q];
    }
    for (double& v : r) v = (v - shrink * rsum) / a;
    for (StateIndex k = 0; k < dim; ++k) {
      double c = 0.0;
      for (ContentId q : space.state(k)) c += r[q];
      x[k] -= c;
    }
  };

  std::vector<double> x(dim, 0.0), p(dim, 0.0), q(dim, 0.0), y(dim), prev(dim);
  ScpResult result;
  double residual = std::numeric_limits<double>::infinity();
  for (std::size_t it = 1; it <= options.max_iters; ++it) {
    prev = x;
    for (std::size_t k = 0; k < dim; ++k) y[k] = x[k] + p[k];
    project_affine(y);
    for (std::size_t k = 0; k < dim; ++k) {
      p[k] = x[k] + p[k] - y[k];
      const double shifted = y[k] + q[k];
      x[k] = std::max(shifted, 0.0);
      q[k] = shifted - x[k];
    }
    const auto back = ccp_from_scp(space, x);
    residual = 0.0;
    double change = 0.0;
    for (std::size_t c = 0; c < back.size(); ++c) {
      residual = std::max(residual, std::abs(back[c] - lambda[c]));
    }
    for (std::size_t k = 0; k < dim; ++k) change = std::max(change, std::abs(x[k] - prev[k]));
    result.iterations = it;
    if (residual <= options.tol && change <= options.tol) break;
  }
  if (!(residual <= 1e-10)) {
    throw Error(Errc::kInfeasible, "no SCP vector reproduces the CCP vector (residual " +
                                       std::to_string(residual) + ")");
  }

  std::vector<StateIndex> support;
  for (StateIndex k = 0; k < dim; ++k) {
    if (x[k] > 1e-9) support.push_back(k);
  }
  result.non_unique = state_matrix_rank(space, support) < support.size();
  result.eta = std::move(x);
  return result;
}

// --- STFs -------------------------------------------------------------------------

std::vector<double> instantaneous_stf(const TransitionMatrix& theta, std::span<const double> eta) {
  auto u = theta.apply(eta);
  for (std::size_t k = 0; k < u.size(); ++k) u[k] -= eta[k];
  return u;
}

std::vector<double> content_stf(const TransitionMatrix& theta_l, std::span<const double> eta) {
  return instantaneous_stf(theta_l, eta);
}

std::vector<double> content_stf_closed_form(const SchemeSpec& scheme, const StateSpace& space,
                                            ContentId l, std::span<const double> eta,
                                            const PopularityVector& prediction,
                                            const LruTable* lru) {
  check_length(eta.size(), space.size(), "SCP vector");
  validate_scheme(scheme, space.cache_size());
  if (l >= space.n_contents()) {
    throw Error(Errc::kUnknownContent, "content " + std::to_string(l) + " outside catalog");
  }
  std::vector<double> u(space.size(), 0.0);
  for (StateIndex k = 0; k < space.size(); ++k) {
    if (eta[k] == 0.0 || space.caches(k, l)) continue;
    const auto cached = space.state(k);
    const auto probs = replacement_probabilities(scheme, space, k, l, prediction, lru);
    for (std::size_t i = 0; i < cached.size(); ++i) {
      if (probs[i] == 0.0) continue;
      const double flow = eta[k] * probs[i];
      u[space.replace(k, cached[i], l)] += flow;
      u[k] -= flow;
    }
  }
  return u;
}

// --- Evolution --------------------------------------------------------------------

Evolution evolve_scp(const SchemeSpec& scheme, const StateSpace& space,
                     std::span<const PopularityVector> popularity,
                     std::span<const PopularityVector> prediction, std::span<const double> eta0,
                     std::span<const LruTable> lru_tables) {
  check_length(eta0.size(), space.size(), "initial SCP vector");
  const bool own_prediction = prediction.empty() && !uses_prediction(scheme);
  if (!own_prediction && prediction.size() != popularity.size()) {
    throw Error(Errc::kDimensionMismatch, "prediction sequence length " +
                                              std::to_string(prediction.size()) +
                                              " differs from popularity length " +
                                              std::to_string(popularity.size()));
  }
  Evolution out;
  std::vector<double> eta(eta0.begin(), eta0.end());
  for (std::size_t t = 0; t < popularity.size(); ++t) {
    const auto& pred = own_prediction ? popularity[t] : prediction[t];
    const auto theta = overall_transition(scheme, space, popularity[t], pred,
                                          step_table(scheme, lru_tables, t));
    auto next = theta.apply(eta);
    std::vector<double> u(next.size());
    for (std::size_t k = 0; k < u.size(); ++k) u[k] = next[k] - eta[k];
    out.stfs.push_back(std::move(u));
    out.etas.push_back(next);
    eta = std::move(next);
  }
  return out;
}

std::vector<LruTable> lru_tables_for_sequence(const StateSpace& space,
                                              std::span<const PopularityVector> popularity,
                                              const LruOptions& options) {
  std::vector<LruTable> tables;
  tables.reserve(popularity.size());
  for (std::size_t t = 0; t < popularity.size(); ++t) {
    // Oldest first: entry size()-j is the popularity at request t+1-j (1-based).
    std::vector<PopularityVector> history;
    history.reserve(options.w_max);
    for (std::size_t j = options.w_max; j >= 1; --j) {
      history.push_back(j <= t ? popularity[t - j] : popularity.front());
    }
    tables.push_back(lru_table_exact(space, PopularityHistory(std::move(history)), options));
  }
  return tables;
}

// --- Hit probabilities ------------------------------------------------------------

double instantaneous_hit_prob(const PopularityVector& upsilon_next,
                              std::span<const double> lambda) {
  check_length(lambda.size(), upsilon_next.size(), "CCP vector");
  return dot(upsilon_next.values(), lambda);
}

std::vector<double> state_hit_vector(const StateSpace& space, const PopularityVector& upsilon) {
  check_length(upsilon.size(), space.n_contents(), "popularity");
  return state_sums(space, upsilon.values());
}

double average_hit_prob_direct(std::span<const PopularityVector> popularity,
                               std::span<const std::vector<double>> scp,
                               const StateSpace& space) {
  if (popularity.empty() || scp.size() != popularity.size()) {
    throw Error(Errc::kLengthMismatch, "need one SCP vector per request, got " +
                                           std::to_string(scp.size()) + " for " +
                                           std::to_string(popularity.size()));
  }
  double sum = 0.0;
  for (std::size_t t = 0; t < popularity.size(); ++t) {
    sum += dot(state_hit_vector(space, popularity[t]), scp[t]);
  }
  return sum / static_cast<double>(popularity.size());
}

double average_hit_prob_stf(std::span<const PopularityVector> popularity,
                            std::span<const std::vector<double>> stfs,
                            std::span<const double> eta0, const StateSpace& space) {
  const std::size_t n = popularity.size();
  if (n == 0 || stfs.size() + 1 < n) {
    throw Error(Errc::kLengthMismatch, "need at least n-1 STFs for n requests");
  }
  // Suffix sums of the popularity: the STF u^(t) affects every request after t.
  std::vector<double> suffix(space.n_contents(), 0.0);
  double sum = 0.0;
  for (std::size_t t = n; t-- > 1;) {
    for (std::size_t q = 0; q < suffix.size(); ++q) suffix[q] += popularity[t][q];
    sum += dot(state_sums(space, suffix), stfs[t - 1]);
  }
  for (std::size_t q = 0; q < suffix.size(); ++q) suffix[q] += popularity[0][q];
  return (sum + dot(state_sums(space, suffix), eta0)) / static_cast<double>(n);
}

double hit_prob_delta(const PopularityVector& upsilon_next, const StateSpace& space,
                      std::span<const double> u) {
  check_length(u.size(), space.size(), "STF vector");
  return dot(state_hit_vector(space, upsilon_next), u);
}

double hit_prob_delta_decomposed(const PopularityVector& upsilon_n,
                                 const PopularityVector& upsilon_bar,
                                 std::span<const std::vector<double>> content_stfs,
                                 const PopularityVector& upsilon_next, const StateSpace& space) {
  check_length(upsilon_n.size(), space.n_contents(), "popularity");
  check_length(upsilon_bar.size(), space.n_contents(), "reference popularity");
  check_length(content_stfs.size(), space.n_contents(), "content STF list");
  const auto z = state_hit_vector(space, upsilon_next);
  double d = 0.0;
  for (ContentId l = 0; l < space.n_contents(); ++l) {
    check_length(content_stfs[l].size(), space.size(), "content STF");
    d += (upsilon_n[l] - upsilon_bar[l]) * dot(z, content_stfs[l]);
  }
  return d;
}

DeltaBounds hit_prob_delta_bounds(const SchemeSpec& scheme, const PopularityVector& upsilon_n,
                                  const PopularityVector& prediction, std::size_t cache_size) {
  validate_scheme(scheme, cache_size);
  const double top = upsilon_n.max();
  if (const auto* rr = std::get_if<RandomReplacement>(&scheme)) {
    return {-rr->phi, static_cast<double>(cache_size) * rr->phi * top};
  }
  if (const auto* lp = std::get_if<ReplaceLessPopular>(&scheme)) {
    return {-lp->alpha, lp->alpha * top};
  }
  if (const auto* tlp = std::get_if<ReplaceLeastPopular>(&scheme)) {
    if (tlp->mode == ReplaceLeastPopular::Mode::kAlways) return {-1.0, top};
    check_length(prediction.size(), upsilon_n.size(), "prediction");
    return {-dot(upsilon_n.values(), prediction.values()), top * prediction.max()};
  }
  if (std::holds_alternative<LeastRecentlyUsed>(scheme)) return {-1.0, top};
  throw Error(Errc::kUnsupportedScheme, "no delta bounds for the general scheme");
}

// --- Steady state -----------------------------------------------------------------

SteadyState steady_state(const SchemeSpec& scheme, const StateSpace& space,
                         const PopularityVector& upsilon, const PopularityVector& prediction,
                         const LruTable* lru, const SteadyOptions& options) {
  const auto theta = overall_transition(scheme, space, upsilon, prediction, lru);
  SteadyState out;

  auto residual_of = [&](const std::vector<double>& eta) {
    return max_abs(instantaneous_stf(theta, eta));
  };

  if (uses_prediction(scheme)) {
    std::vector<double> sorted(prediction.values().begin(), prediction.values().end());
    std::sort(sorted.begin(), sorted.end());
    const bool strict = std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end();
    if (strict) {
      std::vector<ContentId> order(space.n_contents());
      std::iota(order.begin(), order.end(), ContentId{0});
      std::sort(order.begin(), order.end(),
                [&](ContentId x, ContentId y) { return prediction[x] > prediction[y]; });
      std::vector<ContentId> top(order.begin(), order.begin() + space.cache_size());
      std::sort(top.begin(), top.end());
      const StateIndex top_state = *space.index_of(top);
      bool single_absorbing = true;
      for (StateIndex k = 0; k < space.size() && single_absorbing; ++k) {
        if (k != top_state && theta(k, k) >= 1.0) single_absorbing = false;
      }
      if (single_absorbing) {
        out.eta.assign(space.size(), 0.0);
        out.eta[top_state] = 1.0;
        out.residual = residual_of(out.eta);
        out.absorbing_shortcut = true;
        return out;
      }
    }
  }

  std::vector<double> eta(space.size(), 1.0 / static_cast<double>(space.size()));
  for (std::size_t it = 1; it <= options.max_iters; ++it) {
    auto next = theta.apply(eta);
    double change = 0.0;
    for (std::size_t k = 0; k < next.size(); ++k) change = std::max(change, std::abs(next[k] - eta[k]));
    eta = std::move(next);
    out.iterations = it;
    if (change <= options.tol) {
      out.residual = residual_of(eta);
      if (out.residual <= options.tol) {
        out.eta = std::move(eta);
        return out;
      }
    }
  }
  throw Error(Errc::kNoConvergence, "power iteration stopped after " +
                                        std::to_string(options.max_iters) +
                                        " steps with residual " + std::to_string(residual_of(eta)));
}

std::vector<double> ccp_step(const StateSpace& space, const SchemeSpec& scheme,
                             std::span<const double> lambda_prev,
                             const PopularityVector& upsilon_n,
                             const PopularityVector& prediction, const LruTable* lru) {
  const auto eta = scp_from_ccp(space, lambda_prev).eta;
  const auto theta = overall_transition(scheme, space, upsilon_n, prediction, lru);
  return ccp_from_scp(space, theta.apply(eta));
}

// --- Field sampling ---------------------------------------------------------------

namespace {

std::size_t grid_divisions(double h) {
  if (!(h > 0.0) || h > 1.0) {
    throw Error(Errc::kInvalidRange, "grid step must lie in (0, 1], got " + std::to_string(h));
  }
  const double inv = 1.0 / h;
  const double rounded = std::round(inv);
  if (std::abs(inv - rounded) > 1e-9 * inv) {
    throw Error(Errc::kInvalidRange, "1/h must be an integer, got h=" + std::to_string(h));
  }
  return static_cast<std::size_t>(rounded);
}

}  // namespace

std::vector<FieldPoint> sample_field(const TransitionMatrix& theta, const StateSpace& space,
                                     const PopularityVector& upsilon_next, double h) {
  if (space.size() != 3 || theta.dim() != 3) {
    throw Error(Errc::kInvalidDimensions, "field sampling needs exactly 3 states, got " +
                                              std::to_string(space.size()));
  }
  const std::size_t n = grid_divisions(h);
  const auto z = state_hit_vector(space, upsilon_next);
  const double step = 1.0 / static_cast<double>(n);
  std::vector<FieldPoint> field;
  field.reserve((n + 1) * (n + 2) / 2);
  for (std::size_t i = 0; i <= n; ++i) {
    for (std::size_t j = 0; i + j <= n; ++j) {
      FieldPoint p{};
      p.eta = {static_cast<double>(i) * step, static_cast<double>(j) * step,
               static_cast<double>(n - i - j) * step};
      const auto u = instantaneous_stf(theta, p.eta);
      std::copy(u.begin(), u.end(), p.u.begin());
      p.d_gamma = dot(z, u);
      field.push_back(p);
    }
  }
  return field;
}

double field_grid_error(std::span<const FieldPoint> field, double h) {
  const std::size_t n = grid_divisions(h);
  std::map<std::pair<std::size_t, std::size_t>, const FieldPoint*> at;
  for (const auto& p : field) {
    at[{static_cast<std::size_t>(std::llround(p.eta[0] * static_cast<double>(n))),
        static_cast<std::size_t>(std::llround(p.eta[1] * static_cast<double>(n)))}] = &p;
  }
  double worst = 0.0;
  auto compare = [&](const FieldPoint& a, std::size_t i, std::size_t j) {
    const auto it = at.find({i, j});
    if (it == at.end()) return;
    for (std::size_t c = 0; c < 3; ++c) worst = std::max(worst, std::abs(a.u[c] - it->second->u[c]));
  };
  for (const auto& [key, p] : at) {
    const auto [i, j] = key;
    compare(*p, i + 1, j);
    compare(*p, i, j + 1);
    if (i > 0) compare(*p, i - 1, j + 1);
  }
  return worst;
}

const FieldPoint& nearest_field_point(std::span<const FieldPoint> field,
                                      std::span<const double> eta) {
  check_length(eta.size(), 3, "SCP vector");
  if (field.empty()) throw Error(Errc::kInvalidDimensions, "empty field");
  const FieldPoint* best = &field.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& p : field) {
    double d = 0.0;
    for (std::size_t c = 0; c < 3; ++c) d += (p.eta[c] - eta[c]) * (p.eta[c] - eta[c]);
    if (d < best_d) {
      best_d = d;
      best = &p;
    }
  }
  return *best;
}

}  // namespace stf
