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

#include <array>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "stf/popularity.hpp"
#include "stf/schemes.hpp"
#include "stf/state_space.hpp"

namespace stf {

// Vectors over states (SCP eta, STF u, state hit vector z) and over contents
// (CCP lambda) are plain std::vector<double>; functions check lengths and
// throw kDimensionMismatch.

/// lambda = C_s eta.
std::vector<double> ccp_from_scp(const StateSpace& space, std::span<const double> eta);

struct ScpOptions {
  double tol = 1e-13;
  std::size_t max_iters = 200'000;
};

struct ScpResult {
  std::vector<double> eta;
  bool non_unique = false;  // other feasible eta reproduce the same lambda
  std::size_t iterations = 0;
};

/// Minimum-norm eta >= 0 with C_s eta = lambda (which implies sum(eta) = 1),
/// found by Dykstra's alternating projections from 0. Throws kInfeasible when
/// lambda is outside [0,1]^N_c, does not sum to L, or no feasible point is
/// found within max_iters.
ScpResult scp_from_ccp(const StateSpace& space, std::span<const double> lambda,
                       const ScpOptions& options = {});

/// u = Theta eta - eta. Also serves content components with Theta_l.
std::vector<double> instantaneous_stf(const TransitionMatrix& theta, std::span<const double> eta);
std::vector<double> content_stf(const TransitionMatrix& theta_l, std::span<const double> eta);

/// u_l evaluated from each scheme's closed form without building Theta_l:
/// mass eta_k of every state not caching l moves to each content-l neighbor
/// with the scheme's replacement probability.
std::vector<double> content_stf_closed_form(const SchemeSpec& scheme, const StateSpace& space,
                                            ContentId l, std::span<const double> eta,
                                            const PopularityVector& prediction,
                                            const LruTable* lru = nullptr);

struct Evolution {
  std::vector<std::vector<double>> etas;  // eta^(1) .. eta^(n)
  std::vector<std::vector<double>> stfs;  // u^(1) .. u^(n), u^(t) taken at eta^(t-1)
};

/// Iterates eta^(t) = Theta^(t) eta^(t-1) for t = 1..n, where Theta^(t) uses
/// popularity[t-1] and prediction[t-1] (the forecast for request t+1).
/// LRU needs one table per step in `lru_tables`.
Evolution evolve_scp(const SchemeSpec& scheme, const StateSpace& space,
                     std::span<const PopularityVector> popularity,
                     std::span<const PopularityVector> prediction, std::span<const double> eta0,
                     std::span<const LruTable> lru_tables = {});

/// Exact LRU tables for every step of `popularity`. Requests before the first
/// one are taken to follow popularity[0].
std::vector<LruTable> lru_tables_for_sequence(const StateSpace& space,
                                              std::span<const PopularityVector> popularity,
                                              const LruOptions& options = {});

/// gamma = upsilon^T lambda.
double instantaneous_hit_prob(const PopularityVector& upsilon_next,
                              std::span<const double> lambda);

/// z = C_s^T upsilon.
std::vector<double> state_hit_vector(const StateSpace& space, const PopularityVector& upsilon);

/// (1/n) sum_t upsilon^(t)^T C_s eta^(t-1), with scp holding eta^(0)..eta^(n-1).
/// Throws kLengthMismatch.
double average_hit_prob_direct(std::span<const PopularityVector> popularity,
                               std::span<const std::vector<double>> scp,
                               const StateSpace& space);

/// Same average assembled from eta^(0) and the STFs u^(1)..u^(n-1).
/// Throws kLengthMismatch.
double average_hit_prob_stf(std::span<const PopularityVector> popularity,
                            std::span<const std::vector<double>> stfs,
                            std::span<const double> eta0, const StateSpace& space);

/// d_gamma = upsilon_next^T C_s u.
double hit_prob_delta(const PopularityVector& upsilon_next, const StateSpace& space,
                      std::span<const double> u);

/// sum_l (upsilon_n[l] - upsilon_bar[l]) c_l with c_l = upsilon_next^T C_s u_l.
double hit_prob_delta_decomposed(const PopularityVector& upsilon_n,
                                 const PopularityVector& upsilon_bar,
                                 std::span<const std::vector<double>> content_stfs,
                                 const PopularityVector& upsilon_next, const StateSpace& space);

struct DeltaBounds {
  double lower;
  double upper;
};

/// Scheme-wide bounds on d_gamma given upsilon^(n) and the prediction.
/// Throws kUnsupportedScheme for General.
DeltaBounds hit_prob_delta_bounds(const SchemeSpec& scheme, const PopularityVector& upsilon_n,
                                  const PopularityVector& prediction, std::size_t cache_size);

struct SteadyOptions {
  double tol = 1e-12;
  std::size_t max_iters = 1'000'000;
};

struct SteadyState {
  std::vector<double> eta;
  double residual = 0.0;  // ||Theta eta - eta||_inf
  std::size_t iterations = 0;
  bool absorbing_shortcut = false;
};

/// Fixed point of Theta under constant popularity, by power iteration from the
/// uniform SCP. LP and TLP with a strictly ordered prediction whose top state
/// is the only absorbing one return that state's indicator directly.
/// Throws kNoConvergence.
SteadyState steady_state(const SchemeSpec& scheme, const StateSpace& space,
                         const PopularityVector& upsilon, const PopularityVector& prediction,
                         const LruTable* lru = nullptr, const SteadyOptions& options = {});

/// lambda^(n) from lambda^(n-1) through the min-norm SCP preimage.
std::vector<double> ccp_step(const StateSpace& space, const SchemeSpec& scheme,
                             std::span<const double> lambda_prev,
                             const PopularityVector& upsilon_n,
                             const PopularityVector& prediction, const LruTable* lru = nullptr);

// --- Field sampling (three-state spaces) --------------------------------------------

struct FieldPoint {
  std::array<double, 3> eta;
  std::array<double, 3> u;
  double d_gamma;
};

/// STF and d_gamma on the simplex grid eta = (i h, j h, 1 - i h - j h).
/// Throws kInvalidDimensions unless N_s == 3, kInvalidRange unless 0 < h <= 1
/// and 1/h is an integer within 1e-9.
std::vector<FieldPoint> sample_field(const TransitionMatrix& theta, const StateSpace& space,
                                     const PopularityVector& upsilon_next, double h);

/// Largest ||u(a) - u(b)||_inf over grid neighbors a, b: the error bound for
/// reading the field off the grid by nearest-point lookup.
double field_grid_error(std::span<const FieldPoint> field, double h);

/// Grid point nearest to eta in Euclidean distance.
const FieldPoint& nearest_field_point(std::span<const FieldPoint> field,
                                      std::span<const double> eta);

}  // namespace stf
