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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "oracles.hpp"
#include "stf/analysis.hpp"
#include "stf/error.hpp"
#include "stf/simulator.hpp"

namespace stf {
namespace {

template <typename F>
void expect_code(Errc code, F&& fn) {
  try {
    fn();
    FAIL() << "expected " << errc_name(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

void expect_vec_near(const std::vector<double>& a, const std::vector<double>& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "at " << i;
}

const StateSpace kS32(3, 2);
const PopularityVector kUps({0.5, 0.3, 0.2});
const PopularityVector kNext({0.4, 0.35, 0.25});

TEST(CcpTest, FromScp) {
  expect_vec_near(ccp_from_scp(kS32, std::vector<double>{1, 0, 0}), {1, 1, 0}, 0);
  expect_vec_near(ccp_from_scp(kS32, std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3}),
                  {2.0 / 3, 2.0 / 3, 2.0 / 3}, 1e-15);
  expect_vec_near(ccp_from_scp(kS32, std::vector<double>{0.5, 0.3, 0.2}), {0.8, 0.7, 0.5}, 1e-15);
  expect_code(Errc::kDimensionMismatch, [] { ccp_from_scp(kS32, std::vector<double>{1, 0}); });
}

TEST(CcpTest, ToScp) {
  const auto vertex = scp_from_ccp(kS32, std::vector<double>{1, 1, 0});
  expect_vec_near(vertex.eta, {1, 0, 0}, 1e-12);
  EXPECT_FALSE(vertex.non_unique);
  const auto sym = scp_from_ccp(kS32, std::vector<double>{2.0 / 3, 2.0 / 3, 2.0 / 3});
  expect_vec_near(sym.eta, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 1e-12);

  // space(4,2) has more states than contents: the uniform CCP has many preimages.
  const StateSpace s42(4, 2);
  const auto u = scp_from_ccp(s42, std::vector<double>{0.5, 0.5, 0.5, 0.5});
  EXPECT_TRUE(u.non_unique);
  expect_vec_near(u.eta, std::vector<double>(6, 1.0 / 6), 1e-10);

  expect_code(Errc::kInfeasible, [] { scp_from_ccp(kS32, std::vector<double>{1, 1, 1}); });
  expect_code(Errc::kInfeasible, [] { scp_from_ccp(kS32, std::vector<double>{1.2, 0.8, 0}); });
}

TEST(CcpTest, RoundTrip) {
  Rng rng(4);
  for (int draw = 0; draw < 50; ++draw) {
    const StateSpace space(5 + rng.below(2), 2 + rng.below(2));
    auto eta = oracle::random_simplex(space.size(), rng);
    if (draw % 4 == 0) {  // sparse support
      for (std::size_t k = 0; k < eta.size(); ++k) eta[k] = (k % 3 == 0) ? eta[k] : 0.0;
      const double s = std::accumulate(eta.begin(), eta.end(), 0.0);
      for (auto& x : eta) x /= s;
    }
    const auto lambda = ccp_from_scp(space, eta);
    const auto r = scp_from_ccp(space, lambda);
    expect_vec_near(ccp_from_scp(space, r.eta), lambda, 1e-10);
    for (double x : r.eta) EXPECT_GE(x, 0.0);
  }
}

TEST(StfTest, Examples) {
  const auto id = TransitionMatrix::identity(3);
  expect_vec_near(instantaneous_stf(id, std::vector<double>{0.2, 0.3, 0.5}), {0, 0, 0}, 0);

  const double phi = 0.5;
  const auto theta = overall_transition(RandomReplacement{phi}, kS32, kUps, kUps);
  expect_vec_near(instantaneous_stf(theta, std::vector<double>{1, 0, 0}), {-0.2, 0.1, 0.1}, 1e-15);

  const auto t2 = conditional_transition(RandomReplacement{phi}, kS32, 2, kUps);
  expect_vec_near(content_stf(t2, std::vector<double>{1, 0, 0}), {-2 * phi, phi, phi}, 1e-15);
  const auto t0 = conditional_transition(RandomReplacement{phi}, kS32, 0, kUps);
  expect_vec_near(content_stf(t0, std::vector<double>{0.6, 0.4, 0}), {0, 0, 0}, 0);

  const auto ss = steady_state(RandomReplacement{phi}, kS32, kUps, kUps);
  for (double x : instantaneous_stf(theta, ss.eta)) EXPECT_NEAR(x, 0.0, 1e-12);
}

TEST(StfTest, ClosedFormMatchesGeneric) {
  Rng rng(8);
  for (int draw = 0; draw < 100; ++draw) {
    const std::size_t n = 4 + rng.below(3), cap = 1 + rng.below(3);
    const StateSpace space(n, cap);
    const auto pred = oracle::random_popularity(n, rng);
    const auto eta = oracle::random_simplex(space.size(), rng);
    std::vector<double> probs(space.size() * cap);
    for (auto& p : probs) p = rng.uniform() + 0.01;
    const LruTable lru(space, probs, LruSource::kSupplied);
    for (const SchemeSpec& s : std::vector<SchemeSpec>{
             RandomReplacement{0.5 / cap}, ReplaceLessPopular{0.6}, ReplaceLeastPopular{},
             ReplaceLeastPopular{ReplaceLeastPopular::Mode::kProbabilistic}, LeastRecentlyUsed{}}) {
      for (ContentId l = 0; l < n; ++l) {
        const auto generic = content_stf(conditional_transition(s, space, l, pred, &lru), eta);
        expect_vec_near(content_stf_closed_form(s, space, l, eta, pred, &lru), generic, 1e-14);
        EXPECT_NEAR(std::accumulate(generic.begin(), generic.end(), 0.0), 0.0, 1e-12);
      }
    }
  }
}

TEST(EvolveTest, EmptyAndConvergence) {
  const std::vector<double> eta0{1, 0, 0};
  const auto none = evolve_scp(RandomReplacement{0.3}, kS32, {}, {}, eta0);
  EXPECT_TRUE(none.etas.empty());

  const std::vector<PopularityVector> seq(3000, kUps);
  const auto ev = evolve_scp(RandomReplacement{0.3}, kS32, seq, {}, eta0);
  ASSERT_EQ(ev.etas.size(), 3000u);
  expect_vec_near(ev.etas.back(), oracle::rr_product_form(kS32, kUps), 1e-10);
  // eta^(t) = eta^(t-1) + u^(t).
  for (std::size_t t = 1; t < 5; ++t) {
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_NEAR(ev.etas[t][k], ev.etas[t - 1][k] + ev.stfs[t][k], 1e-15);
    }
  }
  expect_code(Errc::kMissingLruTable,
              [&] { evolve_scp(LeastRecentlyUsed{}, kS32, seq, {}, eta0); });
}

TEST(HitProbTest, Instantaneous) {
  EXPECT_NEAR(instantaneous_hit_prob(kUps, std::vector<double>{0.8, 0.7, 0.5}), 0.71, 1e-15);
  const auto lam = ccp_from_scp(kS32, std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3});
  EXPECT_NEAR(instantaneous_hit_prob(PopularityVector::uniform(3), lam), 2.0 / 3, 1e-15);
  const StateSpace full(3, 2);
  EXPECT_NEAR(instantaneous_hit_prob(kUps, std::vector<double>{1, 1, 1}), 1.0, 1e-15);
}

TEST(HitProbTest, StateHitVector) {
  expect_vec_near(state_hit_vector(kS32, kNext), {0.75, 0.65, 0.60}, 1e-15);
  const StateSpace s52(5, 2);
  for (double z : state_hit_vector(s52, PopularityVector::uniform(5))) EXPECT_NEAR(z, 0.4, 1e-15);
  const auto z = state_hit_vector(s52, PopularityVector::one_hot(5, 3));
  for (StateIndex k = 0; k < s52.size(); ++k) EXPECT_EQ(z[k], s52.caches(k, 3) ? 1.0 : 0.0);
}

TEST(HitProbTest, AverageDirectAndStf) {
  Rng rng(12);
  const StateSpace space(5, 2);
  const std::vector<double> eta0 = oracle::random_simplex(space.size(), rng);
  std::vector<PopularityVector> seq;
  for (int t = 0; t < 20; ++t) seq.push_back(oracle::random_popularity(5, rng));
  const auto ev = evolve_scp(RandomReplacement{0.4}, space, seq, {}, eta0);

  std::vector<std::vector<double>> scp{eta0};
  for (std::size_t t = 0; t + 1 < seq.size(); ++t) scp.push_back(ev.etas[t]);

  // Hand-rolled mean over the first 10 steps.
  double hand = 0.0;
  for (std::size_t t = 0; t < 10; ++t) {
    for (StateIndex k = 0; k < space.size(); ++k) {
      for (ContentId l : space.state(k)) hand += seq[t][l] * scp[t][k];
    }
  }
  const std::span<const PopularityVector> first10(seq.data(), 10);
  const std::span<const std::vector<double>> scp10(scp.data(), 10);
  EXPECT_NEAR(average_hit_prob_direct(first10, scp10, space), hand / 10, 1e-14);

  const std::span<const std::vector<double>> stfs(ev.stfs.data(), seq.size() - 1);
  EXPECT_NEAR(average_hit_prob_stf(seq, stfs, eta0, space),
              average_hit_prob_direct(seq, scp, space), 1e-10);

  // n = 1 and all-zero STFs reduce to the eta0 term.
  const std::span<const PopularityVector> one(seq.data(), 1);
  const double g0 = instantaneous_hit_prob(seq[0], ccp_from_scp(space, eta0));
  EXPECT_NEAR(average_hit_prob_direct(one, std::span(scp.data(), 1), space), g0, 1e-15);
  EXPECT_NEAR(average_hit_prob_stf(one, {}, eta0, space), g0, 1e-15);
  const std::vector<std::vector<double>> zeros(19, std::vector<double>(space.size(), 0.0));
  std::vector<double> avg(5, 0.0);
  for (const auto& v : seq) for (std::size_t l = 0; l < 5; ++l) avg[l] += v[l] / 20;
  EXPECT_NEAR(average_hit_prob_stf(seq, zeros, eta0, space),
              instantaneous_hit_prob(PopularityVector(avg), ccp_from_scp(space, eta0)), 1e-14);

  expect_code(Errc::kLengthMismatch, [&] { average_hit_prob_direct(seq, scp10, space); });
  expect_code(Errc::kLengthMismatch, [&] { average_hit_prob_stf(seq, scp10, eta0, space); });
}

TEST(HitProbTest, SteadyConstantSequence) {
  const auto ss = steady_state(RandomReplacement{0.3}, kS32, kUps, kUps);
  const std::vector<PopularityVector> seq(8, kUps);
  const std::vector<std::vector<double>> scp(8, ss.eta);
  EXPECT_NEAR(average_hit_prob_direct(seq, scp, kS32),
              instantaneous_hit_prob(kUps, ccp_from_scp(kS32, ss.eta)), 1e-14);
}

TEST(DeltaTest, Examples) {
  EXPECT_NEAR(hit_prob_delta(kNext, kS32, std::vector<double>{-0.2, 0.1, 0.1}), -0.025, 1e-15);
  EXPECT_EQ(hit_prob_delta(kNext, kS32, std::vector<double>{0, 0, 0}), 0.0);
  EXPECT_NEAR(hit_prob_delta(PopularityVector::uniform(3), kS32,
                             std::vector<double>{-0.3, 0.2, 0.1}),
              0.0, 1e-16);
}

TEST(DeltaTest, Decomposition) {
  const double phi = 0.4;
  const auto bar = PopularityVector({0.45, 0.35, 0.2});
  const auto eta = steady_state(RandomReplacement{phi}, kS32, bar, bar).eta;
  std::vector<std::vector<double>> ul;
  for (ContentId l = 0; l < 3; ++l) {
    ul.push_back(content_stf(conditional_transition(RandomReplacement{phi}, kS32, l, bar), eta));
  }
  EXPECT_EQ(hit_prob_delta_decomposed(bar, bar, ul, kNext, kS32), 0.0);

  const double eps = 0.05;
  const PopularityVector dev({0.45 + eps, 0.35 - eps, 0.2});
  const auto ca = hit_prob_delta(kNext, kS32, ul[0]);
  const auto cb = hit_prob_delta(kNext, kS32, ul[1]);
  EXPECT_NEAR(hit_prob_delta_decomposed(dev, bar, ul, kNext, kS32), eps * (ca - cb), 1e-15);

  const auto u = instantaneous_stf(overall_transition(RandomReplacement{phi}, kS32, dev, dev), eta);
  EXPECT_NEAR(hit_prob_delta_decomposed(dev, bar, ul, kNext, kS32),
              hit_prob_delta(kNext, kS32, u), 1e-12);
}

TEST(BoundsTest, Examples) {
  auto b = hit_prob_delta_bounds(RandomReplacement{0.5}, kUps, kUps, 2);
  EXPECT_DOUBLE_EQ(b.lower, -0.5);
  EXPECT_DOUBLE_EQ(b.upper, 0.5);
  b = hit_prob_delta_bounds(ReplaceLeastPopular{}, kUps, kUps, 2);
  EXPECT_EQ(b.lower, -1.0);
  EXPECT_EQ(b.upper, 0.5);
  b = hit_prob_delta_bounds(ReplaceLeastPopular{ReplaceLeastPopular::Mode::kProbabilistic}, kUps,
                            kUps, 2);
  EXPECT_NEAR(b.lower, -0.38, 1e-15);
  EXPECT_NEAR(b.upper, 0.25, 1e-15);
  expect_code(Errc::kUnsupportedScheme,
              [] { hit_prob_delta_bounds(general_phi_table({}), kUps, kUps, 2); });
}

TEST(PropertyTest, RrScalingAndLpAscent) {
  Rng rng(21);
  const StateSpace space(6, 3);
  const auto z_of = [&](const PopularityVector& v) { return state_hit_vector(space, v); };
  for (int draw = 0; draw < 100; ++draw) {
    const auto un = oracle::random_popularity(6, rng);
    const auto next = oracle::random_popularity(6, rng);
    const auto eta = oracle::random_simplex(space.size(), rng);
    const auto d = [&](const SchemeSpec& s) {
      return hit_prob_delta(next, space, instantaneous_stf(overall_transition(s, space, un, next), eta));
    };
    EXPECT_NEAR(d(RandomReplacement{0.3}), 1.5 * d(RandomReplacement{0.2}), 1e-12);
    for (const SchemeSpec& s : std::vector<SchemeSpec>{
             ReplaceLessPopular{0.5}, ReplaceLeastPopular{},
             ReplaceLeastPopular{ReplaceLeastPopular::Mode::kProbabilistic}}) {
      const auto u = instantaneous_stf(overall_transition(s, space, un, next), eta);
      const auto z = z_of(next);
      double zu = 0.0;
      for (std::size_t k = 0; k < z.size(); ++k) zu += z[k] * u[k];
      EXPECT_GE(zu, -1e-15);
    }
  }
}

TEST(SteadyTest, Examples) {
  const auto tlp = steady_state(ReplaceLeastPopular{}, kS32, kUps, kUps);
  EXPECT_TRUE(tlp.absorbing_shortcut);
  expect_vec_near(tlp.eta, {1, 0, 0}, 0);

  const StateSpace s52(5, 2);
  const auto uni = steady_state(RandomReplacement{0.2}, s52, PopularityVector::uniform(5),
                                PopularityVector::uniform(5));
  expect_vec_near(uni.eta, std::vector<double>(10, 0.1), 1e-12);

  Rng rng(1);
  for (int draw = 0; draw < 10; ++draw) {
    const auto u = oracle::random_popularity(5, rng);
    const auto ss = steady_state(RandomReplacement{0.3}, s52, u, u);
    expect_vec_near(ss.eta, oracle::rr_product_form(s52, u), 1e-9);
  }

  SteadyOptions few;
  few.max_iters = 1;
  expect_code(Errc::kNoConvergence,
              [&] { steady_state(RandomReplacement{0.1}, kS32, kUps, kUps, nullptr, few); });
}

TEST(SteadyTest, RrMatchesLongRunOccupancy) {
  const double phi = 0.3;
  const auto ss = steady_state(RandomReplacement{phi}, kS32, kUps, kUps);
  CacheSim sim(RandomReplacement{phi}, 3, 2, 99);
  const std::vector<ContentId> start{0, 1};
  sim.reset(start);
  Rng req(5);
  std::vector<double> occ(3, 0.0);
  const std::size_t n = 1'000'000;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = req.uniform();
    const ContentId l = x < 0.5 ? 0 : (x < 0.8 ? 1 : 2);
    sim.step(l);
    occ[*kS32.index_of(sim.contents())] += 1.0 / n;
  }
  EXPECT_LE(oracle::tv_distance(occ, ss.eta), 0.01);
}

TEST(CcpStepTest, Examples) {
  const SchemeSpec rr = RandomReplacement{0.3};
  const std::vector<double> vertex{0, 1, 0};
  const auto theta = overall_transition(rr, kS32, kUps, kUps);
  expect_vec_near(ccp_step(kS32, rr, ccp_from_scp(kS32, vertex), kUps, kUps),
                  ccp_from_scp(kS32, theta.apply(vertex)), 1e-10);

  const StateSpace s42(4, 2);
  const auto u4 = PopularityVector::uniform(4);
  expect_vec_near(ccp_step(s42, rr, std::vector<double>(4, 0.5), u4, u4),
                  std::vector<double>(4, 0.5), 1e-10);

  const std::vector<double> lam{0.7, 0.5, 0.4, 0.4};
  const auto pre = scp_from_ccp(s42, lam).eta;
  const auto t4 = overall_transition(rr, s42, PopularityVector({0.4, 0.3, 0.2, 0.1}), u4);
  expect_vec_near(ccp_step(s42, rr, lam, PopularityVector({0.4, 0.3, 0.2, 0.1}), u4),
                  ccp_from_scp(s42, t4.apply(pre)), 1e-12);
}

TEST(FieldTest, GridAndErrors) {
  const auto theta = overall_transition(RandomReplacement{0.5}, kS32, kUps, kUps);
  const auto field = sample_field(theta, kS32, kNext, 0.05);
  EXPECT_EQ(field.size(), 21u * 22u / 2u);
  for (const auto& p : field) {
    const std::vector<double> eta(p.eta.begin(), p.eta.end());
    const auto u = instantaneous_stf(theta, eta);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(p.u[i], u[i], 1e-15);
    EXPECT_NEAR(p.d_gamma, hit_prob_delta(kNext, kS32, u), 1e-15);
  }
  EXPECT_GT(field_grid_error(field, 0.05), 0.0);
  const auto& near = nearest_field_point(field, std::vector<double>{0.51, 0.26, 0.23});
  EXPECT_NEAR(near.eta[0], 0.5, 1e-12);
  EXPECT_NEAR(near.eta[1], 0.25, 1e-12);

  const StateSpace s42(4, 2);
  expect_code(Errc::kInvalidDimensions, [&] {
    sample_field(TransitionMatrix::identity(6), s42, PopularityVector::uniform(4), 0.1);
  });
  expect_code(Errc::kInvalidRange, [&] { sample_field(theta, kS32, kNext, 0.3); });
}

}  // namespace
}  // namespace stf
