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

#include <algorithm>
#include <set>
#include <vector>

#include "stf/error.hpp"
#include "stf/state_space.hpp"

namespace stf {
namespace {

std::vector<ContentId> set_of(const StateSpace& space, StateIndex k) {
  const auto s = space.state(k);
  return {s.begin(), s.end()};
}

StateIndex index(const StateSpace& space, std::vector<ContentId> contents) {
  return space.index_of(contents).value();
}

void expect_code(Errc code, const auto& fn) {
  try {
    fn();
    FAIL() << "expected " << errc_name(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

TEST(StateSpaceTest, CountsMatchBinomial) {
  EXPECT_EQ(StateSpace(3, 2).size(), 3u);
  EXPECT_EQ(StateSpace(4, 2).size(), 6u);
  EXPECT_EQ(StateSpace(10, 5).size(), 252u);
  EXPECT_EQ(binomial(10, 5), 252u);
  EXPECT_EQ(binomial(3, 5), 0u);
  EXPECT_EQ(binomial(200, 100), ~std::uint64_t{0});  // saturates
}

TEST(StateSpaceTest, LexicographicOrder) {
  const StateSpace space(3, 2);
  EXPECT_EQ(set_of(space, 0), (std::vector<ContentId>{0, 1}));
  EXPECT_EQ(set_of(space, 1), (std::vector<ContentId>{0, 2}));
  EXPECT_EQ(set_of(space, 2), (std::vector<ContentId>{1, 2}));

  const StateSpace big(7, 3);
  for (StateIndex k = 0; k + 1 < big.size(); ++k) {
    EXPECT_TRUE(std::lexicographical_compare(big.state(k).begin(), big.state(k).end(),
                                             big.state(k + 1).begin(), big.state(k + 1).end()));
  }
  for (StateIndex k = 0; k < big.size(); ++k) EXPECT_EQ(big.index_of(big.state(k)), k);
}

TEST(StateSpaceTest, IndexOfRejectsInvalidSets) {
  const StateSpace space(4, 2);
  EXPECT_FALSE(space.index_of(std::vector<ContentId>{1, 0}).has_value());
  EXPECT_FALSE(space.index_of(std::vector<ContentId>{1, 1}).has_value());
  EXPECT_FALSE(space.index_of(std::vector<ContentId>{0, 4}).has_value());
  EXPECT_FALSE(space.index_of(std::vector<ContentId>{0}).has_value());
}

TEST(StateSpaceTest, Errors) {
  expect_code(Errc::kInvalidDimensions, [] { StateSpace(3, 3); });
  expect_code(Errc::kInvalidDimensions, [] { StateSpace(3, 0); });
  expect_code(Errc::kTooLarge, [] { StateSpace(10, 5, 100); });
  const StateSpace space(3, 2);
  expect_code(Errc::kIndexOutOfRange, [&] { space.state_vector(3); });
  expect_code(Errc::kIndexOutOfRange, [&] { space.neighbors(7); });
}

TEST(StateSpaceTest, StateVectors) {
  const StateSpace s32(3, 2);
  EXPECT_EQ(s32.state_vector(index(s32, {0, 1})), (std::vector<int>{1, 1, 0}));
  EXPECT_EQ(s32.state_vector(index(s32, {1, 2})), (std::vector<int>{0, 1, 1}));
  const StateSpace s42(4, 2);
  EXPECT_EQ(s42.state_vector(index(s42, {0, 3})), (std::vector<int>{1, 0, 0, 1}));
}

TEST(StateSpaceTest, StateMatrixSums) {
  for (auto [n, l] : {std::pair{3, 2}, {4, 2}, {6, 3}, {7, 1}}) {
    const StateSpace space(n, l);
    const auto cs = space.state_matrix();
    for (std::size_t k = 0; k < space.size(); ++k) {
      double col = 0.0;
      for (std::size_t q = 0; q < space.n_contents(); ++q) {
        col += cs(q, k);
        EXPECT_EQ(cs(q, k), space.state_vector(k)[q]);
      }
      EXPECT_EQ(col, l);
    }
    for (std::size_t q = 0; q < space.n_contents(); ++q) {
      double row = 0.0;
      for (std::size_t k = 0; k < space.size(); ++k) row += cs(q, k);
      EXPECT_EQ(row, static_cast<double>(binomial(n - 1, l - 1)));
    }
  }
}

TEST(StateSpaceTest, Neighbors) {
  const StateSpace s32(3, 2);
  EXPECT_EQ(s32.neighbors(index(s32, {0, 1})),
            (std::vector<StateIndex>{index(s32, {0, 2}), index(s32, {1, 2})}));
  const StateSpace s42(4, 2);
  EXPECT_EQ(s42.neighbors(index(s42, {0, 1})).size(), 4u);

  const StateSpace space(6, 3);
  for (StateIndex k = 0; k < space.size(); ++k) {
    const auto nb = space.neighbors(k);
    EXPECT_EQ(nb.size(), 3u * 3u);
    EXPECT_EQ(std::set<StateIndex>(nb.begin(), nb.end()).size(), nb.size());
    for (StateIndex m : nb) {
      const auto mn = space.neighbors(m);
      EXPECT_TRUE(std::binary_search(mn.begin(), mn.end(), k));
      std::vector<ContentId> common;
      std::set_intersection(space.state(k).begin(), space.state(k).end(),
                            space.state(m).begin(), space.state(m).end(),
                            std::back_inserter(common));
      EXPECT_EQ(common.size(), 2u);
    }
  }
}

TEST(StateSpaceTest, ContentNeighbors) {
  const StateSpace s32(3, 2);
  EXPECT_EQ(s32.content_neighbors(index(s32, {0, 1}), 2),
            (std::vector<StateIndex>{index(s32, {0, 2}), index(s32, {1, 2})}));
  const StateSpace s42(4, 2);
  EXPECT_EQ(s42.content_neighbors(index(s42, {0, 1}), 3),
            (std::vector<StateIndex>{index(s42, {0, 3}), index(s42, {1, 3})}));
  expect_code(Errc::kContentAlreadyCached, [&] { s42.content_neighbors(0, 0); });

  const StateSpace space(6, 3);
  for (StateIndex k = 0; k < space.size(); ++k) {
    const auto nb = space.neighbors(k);
    for (ContentId l = 0; l < 6; ++l) {
      if (space.caches(k, l)) continue;
      const auto cn = space.content_neighbors(k, l);
      EXPECT_EQ(cn.size(), 3u);
      EXPECT_TRUE(std::includes(nb.begin(), nb.end(), cn.begin(), cn.end()));
    }
  }
}

TEST(StateSpaceTest, ExchangedContent) {
  const StateSpace s32(3, 2);
  EXPECT_EQ(s32.exchanged_content(index(s32, {0, 1}), index(s32, {0, 2})), 1u);
  EXPECT_EQ(s32.exchanged_content(index(s32, {0, 2}), index(s32, {0, 1})), 2u);
  const StateSpace s42(4, 2);
  expect_code(Errc::kNotNeighbors,
              [&] { s42.exchanged_content(index(s42, {0, 1}), index(s42, {2, 3})); });
  expect_code(Errc::kNotNeighbors, [&] { s42.exchanged_content(0, 0); });

  const StateSpace space(6, 3);
  for (StateIndex k = 0; k < space.size(); ++k) {
    for (StateIndex m : space.neighbors(k)) {
      const ContentId out = space.exchanged_content(k, m);
      const ContentId in = space.exchanged_content(m, k);
      EXPECT_NE(out, in);
      EXPECT_TRUE(space.caches(k, out));
      EXPECT_FALSE(space.caches(m, out));
      EXPECT_EQ(space.replace(k, out, in), m);
    }
  }
}

}  // namespace
}  // namespace stf
