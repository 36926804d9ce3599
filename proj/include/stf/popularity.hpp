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
#include <variant>
#include <vector>

#include "stf/state_space.hpp"

namespace stf {

/// Per-request content request probabilities (a point on the simplex).
class PopularityVector {
 public:
  /// Accepted off-simplex slack before rejecting; inputs within it are
  /// renormalized so the stored entries sum to 1 within rounding.
  static constexpr double kSimplexSlack = 1e-9;

  PopularityVector() = default;

  /// Throws kInvalidPopularity on negative or non-finite entries, an empty
  /// vector, or a sum further than kSimplexSlack from 1.
  explicit PopularityVector(std::vector<double> probs);

  static PopularityVector uniform(std::size_t n);
  static PopularityVector one_hot(std::size_t n, ContentId at);
  /// Normalizes arbitrary non-negative weights; kZeroTotalRate if they sum to 0.
  static PopularityVector from_weights(std::vector<double> weights);

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t l) const { return probs_[l]; }
  std::span<const double> values() const noexcept { return probs_; }
  double max() const;

  friend bool operator==(const PopularityVector&, const PopularityVector&) = default;

 private:
  std::vector<double> probs_;
};

/// Shot-noise model: y_l(t) = A_l b_l exp(-b_l (t - t_l0)) for t >= t_l0.
struct ShotNoiseModel {
  std::vector<double> amplitude;
  std::vector<double> decay;
  std::vector<double> onset;
};

/// Gaussian pulse: y_l(t) = A_l / (sqrt(2 pi) sigma) exp(-(t - t_l0)^2 / (2 sigma^2)).
struct GaussianPulseModel {
  std::vector<double> amplitude;
  std::vector<double> peak;
  double sigma = 200.0;
};

/// Time-invariant popularity; each content is requested at total_rate * p_l.
struct StaticModel {
  PopularityVector popularity;
  double total_rate = 1.0;
};

/// Step-interpolated popularity: breakpoint i applies on [times[i], times[i+1]).
/// Before the first breakpoint the first vector applies.
struct PiecewiseModel {
  std::vector<double> times;
  std::vector<PopularityVector> popularity;
  double total_rate = 1.0;
};

enum class RateModelKind { kShotNoise, kGaussianPulse, kStatic, kPiecewise };

/// Instantaneous per-content request-rate model. Immutable value.
class RateModel {
 public:
  explicit RateModel(ShotNoiseModel m);
  explicit RateModel(GaussianPulseModel m);
  explicit RateModel(StaticModel m);
  explicit RateModel(PiecewiseModel m);

  RateModelKind kind() const noexcept;
  std::size_t n_contents() const noexcept { return n_contents_; }

  /// y_l(t) in requests per second for any variant.
  double rate(ContentId l, double t) const;

  template <typename T>
  const T& as() const { return std::get<T>(params_); }

  const auto& params() const noexcept { return params_; }

 private:
  std::variant<ShotNoiseModel, GaussianPulseModel, StaticModel, PiecewiseModel> params_;
  std::size_t n_contents_ = 0;
};

/// Shot-noise rate of content l at time t. kWrongVariant for other models.
double shot_noise_rate(const RateModel& model, ContentId l, double t);

/// Gaussian-pulse rate of content l at time t. kWrongVariant for other models.
double gaussian_rate(const RateModel& model, ContentId l, double t);

/// Normalized instantaneous rates y_l(t) / sum_q y_q(t).
/// Throws kZeroTotalRate when no content is active at t.
PopularityVector popularity_at(const RateModel& model, double t);

enum class ModelFamily { kShotNoise, kGaussian };

/// Generation parameters for a random shot-noise or Gaussian model.
struct ModelConfig {
  ModelFamily family = ModelFamily::kShotNoise;
  std::size_t n_contents = 100;
  double t0_max = 0.0;   // seconds
  double a_min = 10.0;   // expected requests per content
  double a_max = 1000.0;
  double decay_b = 0.01;        // 1/s, shot noise
  double decay_b_max = 0.0;     // if > decay_b, b_l ~ U[decay_b, decay_b_max]
  double sigma = 200.0;         // seconds, Gaussian
};

/// Draws t_l0 ~ U[0, t0_max] and A_l ~ U[a_min, a_max] per content from
/// per-content substreams of `seed`. Throws kInvalidRange on bad ranges.
RateModel sample_model(const ModelConfig& config, std::uint64_t seed);

struct Request {
  double time;
  ContentId content;

  friend bool operator==(const Request&, const Request&) = default;
};

using RequestTrace = std::vector<Request>;

/// Samples each content's inhomogeneous Poisson process on [0, horizon] from
/// its own substream and merges by (time, content). Shot noise uses the
/// closed-form inverse of the integrated rate; Gaussian pulses and piecewise
/// models use thinning against a per-content constant majorant.
RequestTrace sample_trace(const RateModel& model, double horizon, std::uint64_t seed);

/// How the popularity forecast for the next request is produced.
struct OraclePredictor {};
struct StalePredictor {
  std::size_t every = 1;  // refresh period in requests, >= 1
};
struct ConstantPredictor {
  PopularityVector popularity;
};
using Predictor = std::variant<OraclePredictor, StalePredictor, ConstantPredictor>;

/// Popularity forecast used for the decision at target request index
/// `target` (0-based into request_times). Oracle evaluates the model at
/// request_times[target]; Stale evaluates it at the latest index <= target
/// that is a multiple of `every`. Throws kOutOfBounds if target is outside
/// the trace (except for Constant, which ignores time).
PopularityVector predict_at(const Predictor& predictor, const RateModel& model,
                            std::span<const double> request_times, std::size_t target);

/// Forecast for request n+1 made after request n (0-based).
inline PopularityVector predict(const Predictor& predictor, const RateModel& model,
                                std::span<const double> request_times, std::size_t n) {
  return predict_at(predictor, model, request_times, n + 1);
}

}  // namespace stf
