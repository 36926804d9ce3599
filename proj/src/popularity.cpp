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

#include "stf/popularity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "stf/error.hpp"
#include "stf/rng.hpp"

namespace stf {

// --- PopularityVector -------------------------------------------------------

PopularityVector::PopularityVector(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw Error(Errc::kInvalidPopularity, "empty popularity vector");
  double sum = 0.0;
  for (double p : probs_) {
    if (!std::isfinite(p) || p < 0.0) {
      throw Error(Errc::kInvalidPopularity, "entry " + std::to_string(p) + " is not a probability");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSimplexSlack) {
    throw Error(Errc::kInvalidPopularity,
                "entries sum to " + std::to_string(sum) + ", not 1");
  }
  for (double& p : probs_) p /= sum;
}

PopularityVector PopularityVector::uniform(std::size_t n) {
  return PopularityVector(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

PopularityVector PopularityVector::one_hot(std::size_t n, ContentId at) {
  std::vector<double> v(n, 0.0);
  v.at(at) = 1.0;
  return PopularityVector(std::move(v));
}

PopularityVector PopularityVector::from_weights(std::vector<double> weights) {
  double sum = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) {
      throw Error(Errc::kInvalidPopularity, "negative or non-finite weight");
    }
    sum += w;
  }
  if (!(sum > 0.0)) throw Error(Errc::kZeroTotalRate, "all weights are zero");
  for (double& w : weights) w /= sum;
  return PopularityVector(std::move(weights));
}

double PopularityVector::max() const {
  return *std::max_element(probs_.begin(), probs_.end());
}

// --- RateModel --------------------------------------------------------------

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::kInvalidRange, what);
}

double gaussian_pulse(double amplitude, double peak, double sigma, double t) {
  const double z = (t - peak) / sigma;
  return amplitude / (std::sqrt(2.0 * std::numbers::pi) * sigma) * std::exp(-0.5 * z * z);
}

double shot_noise(double amplitude, double decay, double onset, double t) {
  if (t < onset) return 0.0;
  return amplitude * decay * std::exp(-decay * (t - onset));
}

std::size_t piece_at(const PiecewiseModel& m, double t) {
  const auto it = std::upper_bound(m.times.begin(), m.times.end(), t);
  return it == m.times.begin() ? 0 : static_cast<std::size_t>(it - m.times.begin()) - 1;
}

}  // namespace

RateModel::RateModel(ShotNoiseModel m) {
  const std::size_t n = m.amplitude.size();
  require(n > 0 && m.decay.size() == n && m.onset.size() == n,
          "shot-noise parameter vectors must be non-empty and equally sized");
  for (std::size_t l = 0; l < n; ++l) {
    require(m.amplitude[l] > 0.0, "A_l must be positive");
    require(m.decay[l] > 0.0, "b_l must be positive");
  }
  n_contents_ = n;
  params_ = std::move(m);
}

RateModel::RateModel(GaussianPulseModel m) {
  const std::size_t n = m.amplitude.size();
  require(n > 0 && m.peak.size() == n, "Gaussian parameter vectors must be non-empty and equally sized");
  require(m.sigma > 0.0, "sigma must be positive");
  for (double a : m.amplitude) require(a > 0.0, "A_l must be positive");
  n_contents_ = n;
  params_ = std::move(m);
}

RateModel::RateModel(StaticModel m) {
  require(m.popularity.size() > 0, "static model needs a popularity vector");
  require(m.total_rate > 0.0, "total rate must be positive");
  n_contents_ = m.popularity.size();
  params_ = std::move(m);
}

RateModel::RateModel(PiecewiseModel m) {
  require(!m.times.empty() && m.times.size() == m.popularity.size(),
          "piecewise model needs one popularity vector per breakpoint");
  require(m.total_rate > 0.0, "total rate must be positive");
  for (std::size_t i = 1; i < m.times.size(); ++i) {
    require(m.times[i] > m.times[i - 1], "breakpoints must be strictly increasing");
  }
  n_contents_ = m.popularity.front().size();
  for (const auto& p : m.popularity) {
    require(p.size() == n_contents_, "breakpoint vectors must share a length");
  }
  params_ = std::move(m);
}

RateModelKind RateModel::kind() const noexcept {
  return static_cast<RateModelKind>(params_.index());
}

double RateModel::rate(ContentId l, double t) const {
  if (l >= n_contents_) {
    throw Error(Errc::kUnknownContent, "content " + std::to_string(l) + " outside model");
  }
  switch (kind()) {
    case RateModelKind::kShotNoise: {
      const auto& m = std::get<ShotNoiseModel>(params_);
      return shot_noise(m.amplitude[l], m.decay[l], m.onset[l], t);
    }
    case RateModelKind::kGaussianPulse: {
      const auto& m = std::get<GaussianPulseModel>(params_);
      return gaussian_pulse(m.amplitude[l], m.peak[l], m.sigma, t);
    }
    case RateModelKind::kStatic: {
      const auto& m = std::get<StaticModel>(params_);
      return m.total_rate * m.popularity[l];
    }
    case RateModelKind::kPiecewise: {
      const auto& m = std::get<PiecewiseModel>(params_);
      return m.total_rate * m.popularity[piece_at(m, t)][l];
    }
  }
  return 0.0;
}

double shot_noise_rate(const RateModel& model, ContentId l, double t) {
  if (model.kind() != RateModelKind::kShotNoise) {
    throw Error(Errc::kWrongVariant, "model is not a shot-noise model");
  }
  return model.rate(l, t);
}

double gaussian_rate(const RateModel& model, ContentId l, double t) {
  if (model.kind() != RateModelKind::kGaussianPulse) {
    throw Error(Errc::kWrongVariant, "model is not a Gaussian-pulse model");
  }
  return model.rate(l, t);
}

PopularityVector popularity_at(const RateModel& model, double t) {
  switch (model.kind()) {
    case RateModelKind::kStatic:
      return model.as<StaticModel>().popularity;
    case RateModelKind::kPiecewise: {
      const auto& m = model.as<PiecewiseModel>();
      return m.popularity[piece_at(m, t)];
    }
    default:
      break;
  }
  std::vector<double> rates(model.n_contents());
  for (ContentId l = 0; l < rates.size(); ++l) rates[l] = model.rate(l, t);
  try {
    return PopularityVector::from_weights(std::move(rates));
  } catch (const Error& e) {
    if (e.code() != Errc::kZeroTotalRate) throw;
    throw Error(Errc::kZeroTotalRate, "no content is active at t=" + std::to_string(t));
  }
}

RateModel sample_model(const ModelConfig& config, std::uint64_t seed) {
  require(config.n_contents > 0, "need at least one content");
  require(config.a_min > 0.0 && config.a_min <= config.a_max, "need 0 < a_min <= a_max");
  require(config.t0_max >= 0.0, "t0_max must be non-negative");
  const std::size_t n = config.n_contents;
  std::vector<double> amplitude(n), onset(n), decay(n);
  for (std::size_t l = 0; l < n; ++l) {
    Rng rng(seed, Stream::kModel, l);
    // Fixed draw order per content: onset, amplitude, decay.
    onset[l] = rng.uniform(0.0, config.t0_max);
    amplitude[l] = rng.uniform(config.a_min, config.a_max);
    decay[l] = config.decay_b_max > config.decay_b
                   ? rng.uniform(config.decay_b, config.decay_b_max)
                   : config.decay_b;
  }
  if (config.family == ModelFamily::kShotNoise) {
    require(config.decay_b > 0.0, "decay_b must be positive");
    return RateModel(ShotNoiseModel{std::move(amplitude), std::move(decay), std::move(onset)});
  }
  require(config.sigma > 0.0, "sigma must be positive");
  return RateModel(GaussianPulseModel{std::move(amplitude), std::move(onset), config.sigma});
}

// --- Trace sampling -----------------------------------------------------------

namespace {

void sample_shot_noise(const ShotNoiseModel& m, ContentId l, double horizon, Rng& rng,
                       RequestTrace& out) {
  const double a = m.amplitude[l];
  const double b = m.decay[l];
  const double onset = m.onset[l];
  if (onset > horizon) return;
  const double start = std::max(0.0, onset);
  // Integrated rate from `start` to t is a * (head - exp(-b (t - onset))).
  const double head = std::exp(-b * (start - onset));
  const double available = a * (head - std::exp(-b * (horizon - onset)));
  double cumulative = 0.0;
  while (true) {
    cumulative += rng.exponential();
    if (cumulative >= available) break;
    const double t = onset - std::log(head - cumulative / a) / b;
    out.push_back({std::min(t, horizon), l});
  }
}

template <typename RateFn>
void sample_by_thinning(double majorant, double horizon, ContentId l, RateFn rate, Rng& rng,
                        RequestTrace& out) {
  if (!(majorant > 0.0)) return;
  double t = 0.0;
  while (true) {
    t += rng.exponential() / majorant;
    if (t > horizon) break;
    if (rng.uniform() * majorant < rate(t)) out.push_back({t, l});
  }
}

}  // namespace

RequestTrace sample_trace(const RateModel& model, double horizon, std::uint64_t seed) {
  require(horizon > 0.0, "horizon must be positive");
  RequestTrace trace;
  for (ContentId l = 0; l < model.n_contents(); ++l) {
    Rng rng(seed, Stream::kContent, l);
    switch (model.kind()) {
      case RateModelKind::kShotNoise:
        sample_shot_noise(model.as<ShotNoiseModel>(), l, horizon, rng, trace);
        break;
      case RateModelKind::kGaussianPulse: {
        const auto& m = model.as<GaussianPulseModel>();
        const double closest = std::clamp(m.peak[l], 0.0, horizon);
        const double majorant = gaussian_pulse(m.amplitude[l], m.peak[l], m.sigma, closest);
        sample_by_thinning(majorant, horizon, l, [&](double t) { return model.rate(l, t); },
                           rng, trace);
        break;
      }
      case RateModelKind::kStatic: {
        const double r = model.rate(l, 0.0);
        if (!(r > 0.0)) break;
        for (double t = rng.exponential() / r; t <= horizon; t += rng.exponential() / r) {
          trace.push_back({t, l});
        }
        break;
      }
      case RateModelKind::kPiecewise: {
        const auto& m = model.as<PiecewiseModel>();
        double majorant = 0.0;
        for (const auto& p : m.popularity) majorant = std::max(majorant, m.total_rate * p[l]);
        sample_by_thinning(majorant, horizon, l, [&](double t) { return model.rate(l, t); },
                           rng, trace);
        break;
      }
    }
  }
  std::sort(trace.begin(), trace.end(), [](const Request& x, const Request& y) {
    return x.time < y.time || (x.time == y.time && x.content < y.content);
  });
  return trace;
}

// --- Prediction ---------------------------------------------------------------

PopularityVector predict_at(const Predictor& predictor, const RateModel& model,
                            std::span<const double> request_times, std::size_t target) {
  if (const auto* constant = std::get_if<ConstantPredictor>(&predictor)) {
    return constant->popularity;
  }
  if (target >= request_times.size()) {
    throw Error(Errc::kOutOfBounds, "prediction target " + std::to_string(target) +
                                        " outside trace of length " +
                                        std::to_string(request_times.size()));
  }
  std::size_t index = target;
  if (const auto* stale = std::get_if<StalePredictor>(&predictor)) {
    if (stale->every == 0) throw Error(Errc::kInvalidRange, "stale period must be >= 1");
    index = (target / stale->every) * stale->every;
  }
  return popularity_at(model, request_times[index]);
}

}  // namespace stf
