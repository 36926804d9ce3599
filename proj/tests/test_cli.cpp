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

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "stf/cli.hpp"

namespace stf::cli {
namespace {

namespace fs = std::filesystem;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::string tmp(const std::string& name) {
  const fs::path dir = fs::path(STF_TEST_TMPDIR) / "cli_out";
  fs::create_directories(dir);
  return (dir / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(CliTest, SpaceListsStates) {
  const auto r = run({"space", "--contents", "3", "--cache", "2"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("N_s = 3"), std::string::npos);
  EXPECT_NE(r.out.find("{0,1}"), std::string::npos);
}

TEST(CliTest, ThetaCsv) {
  const auto r = run({"theta", "--scheme", "rr", "--phi", "0.5", "--upsilon", "0.5,0.3,0.2",
                      "--cache", "2"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out.rfind("row,col,value\n0,0,0.8", 0), 0u);
}

TEST(CliTest, FieldRows) {
  const auto r = run({"field", "--scheme", "rr", "--phi", "0.5", "--upsilon-n", "0.46,0.30,0.24",
                      "--upsilon-next", "0.4,0.35,0.25", "--cache", "2", "--grid-step", "0.1"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::istringstream lines(r.out);
  std::string header, line;
  std::getline(lines, header);
  EXPECT_EQ(header, "eta1,eta2,eta3,u1,u2,u3,d_gamma");
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  EXPECT_EQ(rows, 66);
}

TEST(CliTest, JsonOutputAndDelta) {
  auto r = run({"bounds", "--scheme", "tlpp", "--upsilon-n", "0.5,0.3,0.2", "--cache", "2",
                "--json"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_NEAR(j[0]["lower"].get<double>(), -0.38, 1e-15);

  r = run({"dgamma", "--scheme", "rr", "--phi", "0.5", "--upsilon-n", "0.5,0.3,0.2",
           "--upsilon-next", "0.4,0.35,0.25", "--cache", "2", "--eta-state", "0", "--json"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NEAR(nlohmann::json::parse(r.out)[0]["d_gamma"].get<double>(), -0.025, 1e-15);
}

TEST(CliTest, UsageErrorsExitTwo) {
  auto r = run({"theta", "--scheme", "rr", "--phi", "0.5", "--upsilon", "0.5,0.3,0.2",
                "--cache", "2", "--bogus"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("--bogus"), std::string::npos);
  r = run({"theta", "--scheme", "rr", "--upsilon", "0.5,0.3,0.2", "--cache", "2"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("--phi"), std::string::npos);
  EXPECT_EQ(run({"nosuchcommand"}).code, kExitUsage);
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"--help"}).code, kExitOk);
}

TEST(CliTest, ComputationErrorsExitOne) {
  auto r = run({"theta", "--scheme", "rr", "--phi", "0.9", "--upsilon", "0.5,0.3,0.2",
                "--cache", "2"});
  EXPECT_EQ(r.code, kExitComputation);
  EXPECT_NE(r.err.find("InvalidScheme"), std::string::npos);
  r = run({"theta", "--scheme", "rr", "--phi", "0.1", "--upsilon", "0.5,0.3,0.3", "--cache",
           "2"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("--upsilon"), std::string::npos);
  EXPECT_NE(r.err.find("InvalidPopularity"), std::string::npos);
  r = run({"steady", "--scheme", "rr", "--phi", "0.1", "--upsilon", "0.5,0.3,0.2", "--cache",
           "2", "--max-iters", "1"});
  EXPECT_EQ(r.code, kExitComputation);
  EXPECT_NE(r.err.find("NoConvergence"), std::string::npos);
}

TEST(CliTest, GenWritesTraceAndSidecars) {
  const auto path = tmp("trace.csv");
  const auto r = run({"gen", "--model", "shotnoise", "--contents", "5", "--horizon", "50",
                      "--a-min", "5", "--a-max", "10", "--seed", "3", "--out", path});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto text = slurp(path);
  EXPECT_EQ(text.rfind("time,content\n", 0), 0u);
  const auto first = text.substr(13, text.find('\n', 13) - 13);
  EXPECT_GE(first.size() - first.find('.') - 1, 6u + 2u);  // >= 6 decimals, then ",id"
  EXPECT_TRUE(fs::exists(path + ".model.json"));
  const auto manifest = nlohmann::json::parse(slurp(path + ".manifest.json"));
  EXPECT_EQ(manifest["command"], "gen");
  EXPECT_TRUE(manifest.contains("seeds"));
  EXPECT_EQ(manifest["outputs"][path].get<std::string>(), sha256_file(path));
}

TEST(CliTest, SimManifestReplays) {
  const auto path = tmp("sim.json");
  const auto r = run({"sim", "--scheme", "lp:0.9", "--cache", "3", "--contents", "20",
                      "--horizon", "200", "--rounds", "3", "--seed", "5", "--out", path});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto result = nlohmann::json::parse(slurp(path));
  EXPECT_EQ(result["rounds"], 3);
  const auto before = slurp(path);
  const auto rep = run({"replay", path + ".manifest.json"});
  EXPECT_EQ(rep.code, kExitOk) << rep.err;
  EXPECT_NE(rep.out.find("match"), std::string::npos);
  EXPECT_EQ(slurp(path), before);

  // A wrong recorded digest is reported as a mismatch.
  auto manifest = nlohmann::json::parse(slurp(path + ".manifest.json"));
  manifest["outputs"][path] = std::string(64, '0');
  std::ofstream(path + ".manifest.json") << manifest.dump();
  EXPECT_EQ(run({"replay", path + ".manifest.json"}).code, kExitComputation);
}

TEST(CliTest, SweepTable) {
  const auto r = run({"sweep", "--schemes", "lp:0.9,rrmiss:0.9", "--t0", "0,100", "--cache", "3",
                      "--contents", "20", "--horizon", "100", "--rounds", "2"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out.rfind("t0_max,scheme,mean,stderr\n0,lp:0.9,", 0), 0u);
  EXPECT_NE(r.out.find("100,rrmiss:0.9,"), std::string::npos);
}

TEST(CliTest, SteadyAndEvolve) {
  auto r = run({"steady", "--scheme", "tlpa", "--upsilon", "0.5,0.3,0.2", "--cache", "2"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("state,contents,eta"), std::string::npos);

  const auto file = tmp("ups.txt");
  std::ofstream(file) << "0.5,0.3,0.2\n0.2,0.3,0.5\n";
  r = run({"evolve", "--scheme", "rr", "--phi", "0.3", "--upsilon-file", file, "--cache", "2",
           "--eta-state", "0"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out.rfind("t,state,eta,u\n", 0), 0u);
  r = run({"hitprob", "--scheme", "rr", "--phi", "0.3", "--upsilon-file", file, "--cache", "2"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("n,gamma_direct,gamma_stf"), std::string::npos);
}

}  // namespace
}  // namespace stf::cli
