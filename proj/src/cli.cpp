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

#include "stf/cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "stf/analysis.hpp"
#include "stf/error.hpp"
#include "stf/popularity.hpp"
#include "stf/schemes.hpp"
#include "stf/simulator.hpp"
#include "stf/state_space.hpp"

#ifndef STF_VERSION
#define STF_VERSION "0.0.0"
#endif

namespace stf::cli {

using json = nlohmann::ordered_json;

namespace {

// Bad flag values detected after parsing; reported like parse errors.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- Parsing helpers ------------------------------------------------------------------

double parse_number(std::string_view text, const std::string& flag) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\r')) text.remove_suffix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw UsageError(flag + ": '" + std::string(text) + "' is not a number");
  }
  return value;
}

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number(item, flag));
  if (out.empty()) throw UsageError(flag + ": empty list");
  return out;
}

PopularityVector parse_popularity(const std::string& text, const std::string& flag) {
  try {
    return PopularityVector(parse_list(text, flag));
  } catch (const Error& e) {
    throw UsageError(flag + ": " + e.what());
  }
}

std::vector<PopularityVector> read_popularity_file(const std::string& path,
                                                   const std::string& flag) {
  std::ifstream in(path);
  if (!in) throw UsageError(flag + ": cannot open '" + path + "'");
  std::vector<PopularityVector> seq;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line.front() == '#') continue;
    seq.push_back(parse_popularity(line, flag + " line " + std::to_string(line_no)));
  }
  if (seq.empty()) throw UsageError(flag + ": no popularity vectors in '" + path + "'");
  return seq;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// --- Tabular output --------------------------------------------------------------------

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<json>> rows;
};

std::string format_cell(const json& v) {
  if (v.is_null()) return "";
  if (v.is_number_float()) return format_double(v.get<double>());
  if (v.is_number()) return v.dump();
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : " ") + format_cell(x);
    return s;
  }
  return v.dump();
}

void write_table(const Table& t, bool as_json, std::ostream& os) {
  if (as_json) {
    json arr = json::array();
    for (const auto& row : t.rows) {
      json obj = json::object();
      for (std::size_t c = 0; c < t.header.size(); ++c) obj[t.header[c]] = row[c];
      arr.push_back(std::move(obj));
    }
    os << arr.dump(2) << '\n';
    return;
  }
  for (std::size_t c = 0; c < t.header.size(); ++c) os << (c ? "," : "") << t.header[c];
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << format_cell(row[c]);
    os << '\n';
  }
}

// --- Shared flag groups ------------------------------------------------------------------

struct OutputArgs {
  bool json = false;
  std::string out;
};

void add_output_flags(CLI::App* sub, OutputArgs& a) {
  sub->add_flag("--json", a.json, "Emit JSON instead of CSV/text");
  sub->add_option("--out", a.out, "Write output to this file plus <file>.manifest.json");
}

struct SchemeArgs {
  std::string name = "rr";
  std::optional<double> phi;
  double alpha = 0.9;
  std::string lru_source = "exact";
  std::size_t lru_wmax = 256;
  std::size_t lru_requests = 1'000'000;
  std::uint64_t lru_seed = 1;
};

void add_scheme_flags(CLI::App* sub, SchemeArgs& a) {
  sub->add_option("--scheme", a.name, "rr | lp | tlpa | tlpp | lru")
      ->check(CLI::IsMember({"rr", "lp", "tlpa", "tlpp", "lru"}));
  sub->add_option("--phi", a.phi, "RR per-content replacement probability, 0 < phi <= 1/L");
  sub->add_option("--alpha", a.alpha, "LP replacement probability, 0 < alpha <= 1");
  sub->add_option("--lru-source", a.lru_source, "LRU recency table: exact | estimated")
      ->check(CLI::IsMember({"exact", "estimated"}));
  sub->add_option("--lru-wmax", a.lru_wmax, "Longest recency window for the exact LRU table");
  sub->add_option("--lru-requests", a.lru_requests, "Simulated requests for an estimated table");
  sub->add_option("--lru-seed", a.lru_seed, "Seed for an estimated LRU table");
}

SchemeSpec make_scheme(const SchemeArgs& a) {
  if (a.name == "rr") {
    if (!a.phi) throw UsageError("--phi is required for --scheme rr");
    return RandomReplacement{*a.phi};
  }
  if (a.name == "lp") return ReplaceLessPopular{a.alpha};
  if (a.name == "tlpa") return ReplaceLeastPopular{ReplaceLeastPopular::Mode::kAlways};
  if (a.name == "tlpp") return ReplaceLeastPopular{ReplaceLeastPopular::Mode::kProbabilistic};
  return LeastRecentlyUsed{};
}

// Scheme tokens for sim/sweep: rr:<phi>, rrmiss:<p> (phi = p/L), lp:<alpha>,
// tlpa, tlpp, lru.
SchemeSpec parse_scheme_token(const std::string& token, std::size_t cache_size) {
  const auto colon = token.find(':');
  const std::string kind = token.substr(0, colon);
  const bool has_value = colon != std::string::npos;
  auto value = [&]() {
    if (!has_value) throw UsageError("--schemes: '" + token + "' needs a value after ':'");
    return parse_number(token.substr(colon + 1), "--schemes");
  };
  if (kind == "rr") return RandomReplacement{value()};
  if (kind == "rrmiss") return RandomReplacement{value() / static_cast<double>(cache_size)};
  if (kind == "lp") return ReplaceLessPopular{has_value ? value() : 0.9};
  if (!has_value && kind == "tlpa") return ReplaceLeastPopular{ReplaceLeastPopular::Mode::kAlways};
  if (!has_value && kind == "tlpp") {
    return ReplaceLeastPopular{ReplaceLeastPopular::Mode::kProbabilistic};
  }
  if (!has_value && kind == "lru") return LeastRecentlyUsed{};
  throw UsageError("--schemes: unknown scheme '" + token + "'");
}

std::optional<LruTable> lru_table_for(const SchemeSpec& scheme, const StateSpace& space,
                                      const PopularityVector& upsilon, const SchemeArgs& a) {
  if (!std::holds_alternative<LeastRecentlyUsed>(scheme)) return std::nullopt;
  if (a.lru_source == "estimated") {
    return estimate_lru_table(space, upsilon, a.lru_requests, a.lru_seed);
  }
  LruOptions options;
  options.w_max = a.lru_wmax;
  return lru_table_exact(space, PopularityHistory::constant(upsilon, a.lru_wmax), options);
}

struct ModelArgs {
  std::string model = "shotnoise";
  std::size_t contents = 100;
  double t0_max = 0.0;
  double a_min = 10.0;
  double a_max = 1000.0;
  double decay_b = 0.01;
  double decay_b_max = 0.0;
  double sigma = 200.0;
  double horizon = 5000.0;
  double rate = 1.0;
  std::string static_popularity;
  std::uint64_t seed = 1;
};

void add_model_flags(CLI::App* sub, ModelArgs& a) {
  sub->add_option("--model", a.model, "shotnoise | gaussian | static")
      ->check(CLI::IsMember({"shotnoise", "gaussian", "static"}));
  sub->add_option("--contents", a.contents, "Catalog size N_c");
  sub->add_option("--t0-max", a.t0_max, "Onset/peak times are drawn from U[0, t0-max] (s)");
  sub->add_option("--a-min", a.a_min, "Smallest amplitude A_l");
  sub->add_option("--a-max", a.a_max, "Largest amplitude A_l");
  sub->add_option("--decay-b", a.decay_b, "Shot-noise decay b_l (1/s)");
  sub->add_option("--decay-b-max", a.decay_b_max, "If larger than --decay-b, b_l ~ U[b, b-max]");
  sub->add_option("--sigma", a.sigma, "Gaussian pulse width (s)");
  sub->add_option("--horizon", a.horizon, "Trace length (s)");
  sub->add_option("--rate", a.rate, "Static model total request rate (1/s)");
  sub->add_option("--static-popularity", a.static_popularity,
                  "Static model popularity (comma-separated; default uniform)");
  sub->add_option("--seed", a.seed, "Master seed");
}

ModelConfig model_config(const ModelArgs& a) {
  ModelConfig c;
  c.family = a.model == "gaussian" ? ModelFamily::kGaussian : ModelFamily::kShotNoise;
  c.n_contents = a.contents;
  c.t0_max = a.t0_max;
  c.a_min = a.a_min;
  c.a_max = a.a_max;
  c.decay_b = a.decay_b;
  c.decay_b_max = a.decay_b_max;
  c.sigma = a.sigma;
  return c;
}

RateModel make_model(const ModelArgs& a, std::uint64_t seed) {
  if (a.model == "static") {
    const auto p = a.static_popularity.empty()
                       ? PopularityVector::uniform(a.contents)
                       : parse_popularity(a.static_popularity, "--static-popularity");
    return RateModel(StaticModel{p, a.rate});
  }
  return sample_model(model_config(a), seed);
}

struct PredictorArgs {
  std::string predictor = "oracle";
  std::string lookahead = "on";
};

void add_predictor_flags(CLI::App* sub, PredictorArgs& a) {
  sub->add_option("--predictor", a.predictor, "oracle | stale:K");
  sub->add_option("--prediction-lookahead", a.lookahead,
                  "on: forecast at the next request's time; off: at the current one")
      ->check(CLI::IsMember({"on", "off"}));
}

Predictor make_predictor(const PredictorArgs& a) {
  if (a.predictor == "oracle") return OraclePredictor{};
  if (a.predictor.rfind("stale:", 0) == 0) {
    const double k = parse_number(a.predictor.substr(6), "--predictor");
    if (k < 1.0 || k != std::floor(k)) throw UsageError("--predictor: K must be an integer >= 1");
    return StalePredictor{static_cast<std::size_t>(k)};
  }
  throw UsageError("--predictor: expected oracle or stale:K, got '" + a.predictor + "'");
}

// --- Model sidecar -----------------------------------------------------------------------

json model_to_json(const RateModel& model) {
  return std::visit(
      [](const auto& m) -> json {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ShotNoiseModel>) {
          return {{"family", "shotnoise"}, {"amplitude", m.amplitude}, {"decay", m.decay},
                  {"onset", m.onset}};
        } else if constexpr (std::is_same_v<T, GaussianPulseModel>) {
          return {{"family", "gaussian"}, {"amplitude", m.amplitude}, {"peak", m.peak},
                  {"sigma", m.sigma}};
        } else if constexpr (std::is_same_v<T, StaticModel>) {
          std::vector<double> p(m.popularity.values().begin(), m.popularity.values().end());
          return {{"family", "static"}, {"popularity", p}, {"total_rate", m.total_rate}};
        } else {
          json pops = json::array();
          for (const auto& v : m.popularity) {
            pops.push_back(std::vector<double>(v.values().begin(), v.values().end()));
          }
          return {{"family", "piecewise"}, {"times", m.times}, {"popularity", pops},
                  {"total_rate", m.total_rate}};
        }
      },
      model.params());
}

RateModel model_from_json(const json& j) {
  const auto family = j.at("family").get<std::string>();
  if (family == "shotnoise") {
    return RateModel(ShotNoiseModel{j.at("amplitude").get<std::vector<double>>(),
                                    j.at("decay").get<std::vector<double>>(),
                                    j.at("onset").get<std::vector<double>>()});
  }
  if (family == "gaussian") {
    return RateModel(GaussianPulseModel{j.at("amplitude").get<std::vector<double>>(),
                                        j.at("peak").get<std::vector<double>>(),
                                        j.at("sigma").get<double>()});
  }
  if (family == "static") {
    return RateModel(StaticModel{PopularityVector(j.at("popularity").get<std::vector<double>>()),
                                 j.at("total_rate").get<double>()});
  }
  if (family == "piecewise") {
    std::vector<PopularityVector> pops;
    for (const auto& v : j.at("popularity")) pops.emplace_back(v.get<std::vector<double>>());
    return RateModel(PiecewiseModel{j.at("times").get<std::vector<double>>(), std::move(pops),
                                    j.at("total_rate").get<double>()});
  }
  throw Error(Errc::kParseError, "unknown model family '" + family + "'");
}

RequestTrace read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIoError, "cannot open trace '" + path + "'");
  RequestTrace trace;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("time", 0) == 0) continue;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto comma = line.find(',');
    try {
      if (comma == std::string::npos) throw UsageError("missing comma");
      const double t = parse_number(line.substr(0, comma), "time");
      const double c = parse_number(line.substr(comma + 1), "content");
      if (c < 0 || c != std::floor(c)) throw UsageError("bad content id");
      trace.push_back({t, static_cast<ContentId>(c)});
    } catch (const UsageError& e) {
      throw Error(Errc::kParseError,
                  path + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return trace;
}

// --- Manifest -----------------------------------------------------------------------------

json resolved_config(const CLI::App* sub) {
  json cfg = json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help") continue;
    if (opt->count() > 0) {
      const auto& res = opt->results();
      cfg[name] = res.size() == 1 ? json(res.front()) : json(res);
    } else {
      cfg[name] = opt->get_default_str();
    }
  }
  return cfg;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::kIoError, "cannot write '" + path + "'");
  f << content;
  if (!f) throw Error(Errc::kIoError, "write to '" + path + "' failed");
}

struct RunContext {
  const std::vector<std::string>* args = nullptr;
  const CLI::App* sub = nullptr;
  json seeds = json::object();
  std::vector<std::string> extra_outputs;  // written by the command itself
};

// Writes `content` to --out (plus manifest) or to `out`.
void emit(const OutputArgs& o, const std::string& content, RunContext& ctx, std::ostream& out) {
  if (o.out.empty()) {
    out << content;
    return;
  }
  write_file(o.out, content);
  json outputs = json::object();
  outputs[o.out] = sha256_file(o.out);
  for (const auto& p : ctx.extra_outputs) outputs[p] = sha256_file(p);
  json manifest = {{"command", ctx.sub->get_name()},
                   {"argv", *ctx.args},
                   {"config", resolved_config(ctx.sub)},
                   {"seeds", ctx.seeds},
                   {"version", version()},
                   {"outputs", outputs}};
  write_file(o.out + ".manifest.json", manifest.dump(2) + "\n");
}

std::string table_text(const Table& t, bool as_json) {
  std::ostringstream os;
  write_table(t, as_json, os);
  return os.str();
}

std::vector<double> parse_eta(const std::string& text, std::optional<std::size_t> state,
                              const StateSpace& space) {
  if (!text.empty() && state) throw UsageError("--eta and --eta-state are exclusive");
  if (state) {
    if (*state >= space.size()) throw UsageError("--eta-state: no state " + std::to_string(*state));
    std::vector<double> eta(space.size(), 0.0);
    eta[*state] = 1.0;
    return eta;
  }
  if (text.empty()) return std::vector<double>(space.size(), 1.0 / static_cast<double>(space.size()));
  const auto eta = parse_popularity(text, "--eta");
  if (eta.size() != space.size()) {
    throw UsageError("--eta: expected " + std::to_string(space.size()) + " entries");
  }
  return {eta.values().begin(), eta.values().end()};
}

std::size_t require_cache(std::size_t cache) {
  if (cache == 0) throw UsageError("--cache is required");
  return cache;
}

}  // namespace

// --- Public helpers -------------------------------------------------------------------------

std::string version() { return STF_VERSION; }

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIoError, "cannot read '" + path + "'");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    char b[3];
    std::snprintf(b, sizeof b, "%02x", digest[i]);
    hex += b;
  }
  return hex;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"State transition field analysis and simulation of cache replacement", "stfcache"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version());

  RunContext ctx;
  ctx.args = &args;
  std::function<void()> run;

  // space
  auto* space_cmd = app.add_subcommand("space", "Enumerate cache states");
  std::size_t n_contents = 0, cache = 0;
  OutputArgs space_out;
  space_cmd->add_option("--contents", n_contents, "Catalog size N_c")->required();
  space_cmd->add_option("--cache", cache, "Cache size L")->required();
  add_output_flags(space_cmd, space_out);
  space_cmd->callback([&] {
    run = [&] {
      const StateSpace space(n_contents, cache);
      std::ostringstream os;
      if (space_out.json) {
        json states = json::array();
        for (StateIndex k = 0; k < space.size(); ++k) {
          const auto s = space.state(k);
          states.push_back(std::vector<ContentId>(s.begin(), s.end()));
        }
        os << json{{"n_states", space.size()}, {"states", states}}.dump(2) << '\n';
      } else {
        os << "N_s = " << space.size() << '\n';
        for (StateIndex k = 0; k < space.size(); ++k) {
          os << k << ": {";
          const auto s = space.state(k);
          for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
          os << "}\n";
        }
      }
      emit(space_out, os.str(), ctx, out);
    };
  });

  // theta
  auto* theta_cmd = app.add_subcommand("theta", "Export the overall transition matrix");
  SchemeArgs theta_scheme;
  OutputArgs theta_out;
  std::string theta_upsilon, theta_prediction;
  add_scheme_flags(theta_cmd, theta_scheme);
  add_output_flags(theta_cmd, theta_out);
  theta_cmd->add_option("--upsilon", theta_upsilon, "Popularity at request n")->required();
  theta_cmd->add_option("--prediction", theta_prediction, "Forecast for request n+1 (default --upsilon)");
  theta_cmd->add_option("--cache", cache, "Cache size L")->required();
  theta_cmd->callback([&] {
    run = [&] {
      const auto upsilon = parse_popularity(theta_upsilon, "--upsilon");
      const auto prediction = theta_prediction.empty()
                                  ? upsilon
                                  : parse_popularity(theta_prediction, "--prediction");
      const StateSpace space(upsilon.size(), cache);
      const auto scheme = make_scheme(theta_scheme);
      const auto lru = lru_table_for(scheme, space, upsilon, theta_scheme);
      const auto theta =
          overall_transition(scheme, space, upsilon, prediction, lru ? &*lru : nullptr);
      Table t{{"row", "col", "value"}, {}};
      for (StateIndex k = 0; k < theta.dim(); ++k) {
        for (const auto& e : theta.column(k)) t.rows.push_back({e.row, k, e.value});
      }
      emit(theta_out, table_text(t, theta_out.json), ctx, out);
    };
  });

  // field
  auto* field_cmd = app.add_subcommand("field", "Sample the STF on a simplex grid (N_s = 3)");
  SchemeArgs field_scheme;
  OutputArgs field_out;
  std::string field_un, field_unext, field_pred;
  double grid_step = 0.05;
  add_scheme_flags(field_cmd, field_scheme);
  add_output_flags(field_cmd, field_out);
  field_cmd->add_option("--upsilon-n", field_un, "Popularity at request n")->required();
  field_cmd->add_option("--upsilon-next", field_unext, "Popularity at request n+1")->required();
  field_cmd->add_option("--prediction", field_pred, "Forecast for request n+1 (default --upsilon-next)");
  field_cmd->add_option("--cache", cache, "Cache size L")->required();
  field_cmd->add_option("--grid-step", grid_step, "Grid spacing h; 1/h must be an integer");
  field_cmd->callback([&] {
    run = [&] {
      const auto un = parse_popularity(field_un, "--upsilon-n");
      const auto unext = parse_popularity(field_unext, "--upsilon-next");
      const auto pred = field_pred.empty() ? unext : parse_popularity(field_pred, "--prediction");
      const StateSpace space(un.size(), cache);
      const auto scheme = make_scheme(field_scheme);
      const auto lru = lru_table_for(scheme, space, un, field_scheme);
      const auto theta = overall_transition(scheme, space, un, pred, lru ? &*lru : nullptr);
      Table t{{"eta1", "eta2", "eta3", "u1", "u2", "u3", "d_gamma"}, {}};
      for (const auto& p : sample_field(theta, space, unext, grid_step)) {
        t.rows.push_back({p.eta[0], p.eta[1], p.eta[2], p.u[0], p.u[1], p.u[2], p.d_gamma});
      }
      emit(field_out, table_text(t, field_out.json), ctx, out);
    };
  });

  // evolve and hitprob share the sequence inputs.
  struct SequenceArgs {
    SchemeArgs scheme;
    OutputArgs output;
    std::string upsilon_file, prediction_file, eta;
    std::optional<std::size_t> eta_state;
  };
  auto add_sequence_flags = [&](CLI::App* sub, SequenceArgs& a) {
    add_scheme_flags(sub, a.scheme);
    add_output_flags(sub, a.output);
    sub->add_option("--upsilon-file", a.upsilon_file, "Popularity per request, one vector per line")
        ->required();
    sub->add_option("--prediction-file", a.prediction_file,
                    "Forecast per request (default: the next line of --upsilon-file)");
    sub->add_option("--cache", cache, "Cache size L")->required();
    sub->add_option("--eta", a.eta, "Initial SCP (default uniform)");
    sub->add_option("--eta-state", a.eta_state, "Start in this state with probability 1");
  };
  struct Sequence {
    std::vector<PopularityVector> popularity, prediction;
    std::vector<LruTable> lru;
  };
  auto load_sequence = [&](const SequenceArgs& a, const StateSpace& space,
                           const SchemeSpec& scheme) {
    Sequence s;
    s.popularity = read_popularity_file(a.upsilon_file, "--upsilon-file");
    if (a.prediction_file.empty()) {
      for (std::size_t t = 0; t < s.popularity.size(); ++t) {
        s.prediction.push_back(s.popularity[std::min(t + 1, s.popularity.size() - 1)]);
      }
    } else {
      s.prediction = read_popularity_file(a.prediction_file, "--prediction-file");
    }
    if (std::holds_alternative<LeastRecentlyUsed>(scheme)) {
      LruOptions options;
      options.w_max = a.scheme.lru_wmax;
      s.lru = lru_tables_for_sequence(space, s.popularity, options);
    }
    return s;
  };

  auto* evolve_cmd = app.add_subcommand("evolve", "Evolve the SCP through a popularity sequence");
  SequenceArgs evolve_args;
  add_sequence_flags(evolve_cmd, evolve_args);
  evolve_cmd->callback([&] {
    run = [&] {
      const auto first = read_popularity_file(evolve_args.upsilon_file, "--upsilon-file");
      const StateSpace space(first.front().size(), cache);
      const auto scheme = make_scheme(evolve_args.scheme);
      const auto seq = load_sequence(evolve_args, space, scheme);
      const auto eta0 = parse_eta(evolve_args.eta, evolve_args.eta_state, space);
      const auto ev = evolve_scp(scheme, space, seq.popularity, seq.prediction, eta0, seq.lru);
      Table t{{"t", "state", "eta", "u"}, {}};
      for (StateIndex k = 0; k < space.size(); ++k) t.rows.push_back({0, k, eta0[k], 0.0});
      for (std::size_t i = 0; i < ev.etas.size(); ++i) {
        for (StateIndex k = 0; k < space.size(); ++k) {
          t.rows.push_back({i + 1, k, ev.etas[i][k], ev.stfs[i][k]});
        }
      }
      emit(evolve_args.output, table_text(t, evolve_args.output.json), ctx, out);
    };
  });

  auto* hit_cmd = app.add_subcommand(
      "hitprob", "Instantaneous (--lambda) or average (--upsilon-file) hit probability");
  SequenceArgs hit_args;
  std::string hit_upsilon, hit_lambda;
  add_scheme_flags(hit_cmd, hit_args.scheme);
  add_output_flags(hit_cmd, hit_args.output);
  hit_cmd->add_option("--upsilon", hit_upsilon, "Popularity at request n+1 (with --lambda)");
  hit_cmd->add_option("--lambda", hit_lambda, "CCP vector (instantaneous mode)");
  hit_cmd->add_option("--upsilon-file", hit_args.upsilon_file, "Popularity per request");
  hit_cmd->add_option("--prediction-file", hit_args.prediction_file, "Forecast per request");
  hit_cmd->add_option("--cache", cache, "Cache size L");
  hit_cmd->add_option("--eta", hit_args.eta, "Initial SCP (default uniform)");
  hit_cmd->add_option("--eta-state", hit_args.eta_state, "Initial state");
  hit_cmd->callback([&] {
    run = [&] {
      if (!hit_lambda.empty()) {
        if (hit_upsilon.empty()) throw UsageError("--lambda needs --upsilon");
        const auto lambda = parse_list(hit_lambda, "--lambda");
        const double g = instantaneous_hit_prob(parse_popularity(hit_upsilon, "--upsilon"), lambda);
        emit(hit_args.output, table_text({{"gamma"}, {{g}}}, hit_args.output.json), ctx, out);
        return;
      }
      if (hit_args.upsilon_file.empty()) throw UsageError("need --lambda or --upsilon-file");
      const auto first = read_popularity_file(hit_args.upsilon_file, "--upsilon-file");
      const StateSpace space(first.front().size(), require_cache(cache));
      const auto scheme = make_scheme(hit_args.scheme);
      const auto seq = load_sequence(hit_args, space, scheme);
      const auto eta0 = parse_eta(hit_args.eta, hit_args.eta_state, space);
      const auto ev = evolve_scp(scheme, space, seq.popularity, seq.prediction, eta0, seq.lru);
      std::vector<std::vector<double>> scp{eta0};
      scp.insert(scp.end(), ev.etas.begin(), ev.etas.end() - 1);
      const double direct = average_hit_prob_direct(seq.popularity, scp, space);
      const double via_stf = average_hit_prob_stf(seq.popularity, ev.stfs, eta0, space);
      Table t{{"n", "gamma_direct", "gamma_stf"}, {{seq.popularity.size(), direct, via_stf}}};
      emit(hit_args.output, table_text(t, hit_args.output.json), ctx, out);
    };
  });

  // dgamma
  auto* dg_cmd = app.add_subcommand("dgamma", "One-step hit-probability change of a replacement");
  SchemeArgs dg_scheme;
  OutputArgs dg_out;
  std::string dg_un, dg_unext, dg_pred, dg_bar, dg_eta;
  std::optional<std::size_t> dg_state;
  add_scheme_flags(dg_cmd, dg_scheme);
  add_output_flags(dg_cmd, dg_out);
  dg_cmd->add_option("--upsilon-n", dg_un, "Popularity at request n")->required();
  dg_cmd->add_option("--upsilon-next", dg_unext, "Popularity at request n+1")->required();
  dg_cmd->add_option("--prediction", dg_pred, "Forecast for request n+1 (default --upsilon-next)");
  dg_cmd->add_option("--upsilon-bar", dg_bar, "Reference popularity for the decomposed form");
  dg_cmd->add_option("--cache", cache, "Cache size L")->required();
  dg_cmd->add_option("--eta", dg_eta, "SCP before request n (default uniform)");
  dg_cmd->add_option("--eta-state", dg_state, "Deterministic state before request n");
  dg_cmd->callback([&] {
    run = [&] {
      const auto un = parse_popularity(dg_un, "--upsilon-n");
      const auto unext = parse_popularity(dg_unext, "--upsilon-next");
      const auto pred = dg_pred.empty() ? unext : parse_popularity(dg_pred, "--prediction");
      const StateSpace space(un.size(), cache);
      const auto scheme = make_scheme(dg_scheme);
      const auto lru = lru_table_for(scheme, space, un, dg_scheme);
      const LruTable* table = lru ? &*lru : nullptr;
      const auto eta = parse_eta(dg_eta, dg_state, space);
      const auto u = instantaneous_stf(overall_transition(scheme, space, un, pred, table), eta);
      const auto bounds = hit_prob_delta_bounds(scheme, un, pred, cache);
      json decomposed = nullptr;
      if (!dg_bar.empty()) {
        std::vector<std::vector<double>> parts;
        for (ContentId l = 0; l < space.n_contents(); ++l) {
          parts.push_back(content_stf(conditional_transition(scheme, space, l, pred, table), eta));
        }
        decomposed = hit_prob_delta_decomposed(un, parse_popularity(dg_bar, "--upsilon-bar"),
                                               parts, unext, space);
      }
      Table t{{"d_gamma", "d_gamma_decomposed", "lower", "upper"},
              {{hit_prob_delta(unext, space, u), decomposed, bounds.lower, bounds.upper}}};
      emit(dg_out, table_text(t, dg_out.json), ctx, out);
    };
  });

  // bounds
  auto* bounds_cmd = app.add_subcommand("bounds", "Scheme-wide bounds on d_gamma");
  SchemeArgs bounds_scheme;
  OutputArgs bounds_out;
  std::string bounds_un, bounds_pred;
  add_scheme_flags(bounds_cmd, bounds_scheme);
  add_output_flags(bounds_cmd, bounds_out);
  bounds_cmd->add_option("--upsilon-n", bounds_un, "Popularity at request n")->required();
  bounds_cmd->add_option("--prediction", bounds_pred, "Forecast for request n+1 (default --upsilon-n)");
  bounds_cmd->add_option("--cache", cache, "Cache size L")->required();
  bounds_cmd->callback([&] {
    run = [&] {
      const auto un = parse_popularity(bounds_un, "--upsilon-n");
      const auto pred = bounds_pred.empty() ? un : parse_popularity(bounds_pred, "--prediction");
      const auto b = hit_prob_delta_bounds(make_scheme(bounds_scheme), un, pred, cache);
      emit(bounds_out, table_text({{"lower", "upper"}, {{b.lower, b.upper}}}, bounds_out.json),
           ctx, out);
    };
  });

  // steady
  auto* steady_cmd = app.add_subcommand("steady", "Steady-state SCP under constant popularity");
  SchemeArgs steady_scheme;
  OutputArgs steady_out;
  std::string steady_upsilon, steady_pred;
  SteadyOptions steady_opts;
  add_scheme_flags(steady_cmd, steady_scheme);
  add_output_flags(steady_cmd, steady_out);
  steady_cmd->add_option("--upsilon", steady_upsilon, "Constant popularity")->required();
  steady_cmd->add_option("--prediction", steady_pred, "Constant forecast (default --upsilon)");
  steady_cmd->add_option("--cache", cache, "Cache size L")->required();
  steady_cmd->add_option("--tol", steady_opts.tol, "Residual tolerance");
  steady_cmd->add_option("--max-iters", steady_opts.max_iters, "Power-iteration cap");
  steady_cmd->callback([&] {
    run = [&] {
      const auto upsilon = parse_popularity(steady_upsilon, "--upsilon");
      const auto pred = steady_pred.empty() ? upsilon : parse_popularity(steady_pred, "--prediction");
      const StateSpace space(upsilon.size(), cache);
      const auto scheme = make_scheme(steady_scheme);
      const auto lru = lru_table_for(scheme, space, upsilon, steady_scheme);
      const auto ss = steady_state(scheme, space, upsilon, pred, lru ? &*lru : nullptr, steady_opts);
      Table t{{"state", "contents", "eta"}, {}};
      for (StateIndex k = 0; k < space.size(); ++k) {
        const auto s = space.state(k);
        t.rows.push_back({k, std::vector<ContentId>(s.begin(), s.end()), ss.eta[k]});
      }
      emit(steady_out, table_text(t, steady_out.json), ctx, out);
      err << "residual " << format_double(ss.residual) << " after " << ss.iterations
          << " iterations\n";
    };
  });

  // gen
  auto* gen_cmd = app.add_subcommand("gen", "Sample a request trace (CSV time,content)");
  ModelArgs gen_model;
  OutputArgs gen_out;
  add_model_flags(gen_cmd, gen_model);
  gen_cmd->add_option("--out", gen_out.out, "Trace file; also writes <file>.model.json");
  gen_cmd->callback([&] {
    run = [&] {
      const auto model = make_model(gen_model, gen_model.seed);
      const auto trace = sample_trace(model, gen_model.horizon, gen_model.seed);
      std::ostringstream os;
      os << "time,content\n";
      char buf[64];
      for (const auto& r : trace) {
        std::snprintf(buf, sizeof buf, "%.9f,%u\n", r.time, r.content);
        os << buf;
      }
      ctx.seeds["seed"] = gen_model.seed;
      if (!gen_out.out.empty()) {
        const std::string sidecar = gen_out.out + ".model.json";
        write_file(sidecar, model_to_json(model).dump(2) + "\n");
        ctx.extra_outputs.push_back(sidecar);
      }
      emit(gen_out, os.str(), ctx, out);
    };
  });

  // sim
  auto* sim_cmd = app.add_subcommand("sim", "Monte Carlo hit ratio of one scheme");
  ModelArgs sim_model;
  PredictorArgs sim_pred;
  OutputArgs sim_out;
  std::string sim_scheme = "lru", sim_trace, sim_model_json;
  std::size_t sim_rounds = 200;
  add_model_flags(sim_cmd, sim_model);
  add_predictor_flags(sim_cmd, sim_pred);
  add_output_flags(sim_cmd, sim_out);
  sim_cmd->add_option("--scheme", sim_scheme, "rr:PHI | rrmiss:P | lp:ALPHA | tlpa | tlpp | lru");
  sim_cmd->add_option("--cache", cache, "Cache size L")->required();
  sim_cmd->add_option("--rounds", sim_rounds, "Monte Carlo rounds");
  sim_cmd->add_option("--trace", sim_trace, "Replay this trace instead of sampling");
  sim_cmd->add_option("--model-json", sim_model_json, "Model sidecar for predictions on --trace");
  sim_cmd->callback([&] {
    run = [&] {
      const auto scheme = parse_scheme_token(sim_scheme, cache);
      const auto predictor = make_predictor(sim_pred);
      const bool lookahead = sim_pred.lookahead == "on";
      json result;
      ctx.seeds["seed"] = sim_model.seed;
      if (!sim_trace.empty()) {
        const auto trace = read_trace(sim_trace);
        std::optional<RateModel> model;
        if (!sim_model_json.empty()) {
          std::ifstream in(sim_model_json);
          if (!in) throw Error(Errc::kIoError, "cannot open '" + sim_model_json + "'");
          model = model_from_json(json::parse(in));
        } else if (uses_prediction(scheme)) {
          throw UsageError("--trace with LP/TLP needs --model-json for predictions");
        } else {
          ContentId top = 0;
          for (const auto& r : trace) top = std::max(top, r.content);
          const std::size_t n = std::max<std::size_t>(sim_model.contents, top + 1);
          model = RateModel(StaticModel{PopularityVector::uniform(n), 1.0});
        }
        const auto hits = run_trace(scheme, cache, trace, *model, predictor,
                                    policy_seed(sim_model.seed, 0), lookahead);
        const double ratio = hits.empty() ? 0.0
                                          : static_cast<double>(std::count(hits.begin(), hits.end(), true)) /
                                                static_cast<double>(hits.size());
        result = {{"mean", ratio}, {"stderr", 0.0}, {"rounds", 1}, {"requests", hits.size()}};
      } else {
        if (sim_model.model == "static") throw UsageError("sim samples shotnoise or gaussian models");
        SimConfig cfg;
        cfg.scheme = scheme;
        cfg.model = model_config(sim_model);
        cfg.horizon = sim_model.horizon;
        cfg.rounds = sim_rounds;
        cfg.cache_size = cache;
        cfg.master_seed = sim_model.seed;
        cfg.predictor = predictor;
        cfg.lookahead = lookahead;
        const auto r = run_monte_carlo(cfg);
        result = {{"mean", r.mean}, {"stderr", r.stderr_}, {"rounds", r.per_round.size()},
                  {"requests", r.total_requests}};
      }
      emit(sim_out, result.dump(2) + "\n", ctx, out);
    };
  });

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Paired hit-ratio sweep over t0_max");
  ModelArgs sweep_model;
  PredictorArgs sweep_pred;
  OutputArgs sweep_out;
  std::vector<double> sweep_t0;
  std::vector<std::string> sweep_schemes;
  std::size_t sweep_rounds = 200;
  add_model_flags(sweep_cmd, sweep_model);
  add_predictor_flags(sweep_cmd, sweep_pred);
  add_output_flags(sweep_cmd, sweep_out);
  sweep_cmd->add_option("--t0", sweep_t0, "t0_max values (s)")->required()->delimiter(',');
  sweep_cmd->add_option("--schemes", sweep_schemes, "Scheme tokens, e.g. lp:0.9,tlpa,rrmiss:0.9,lru")
      ->required()
      ->delimiter(',');
  sweep_cmd->add_option("--cache", cache, "Cache size L")->required();
  sweep_cmd->add_option("--rounds", sweep_rounds, "Monte Carlo rounds per point");
  sweep_cmd->callback([&] {
    run = [&] {
      if (sweep_model.model == "static") throw UsageError("sweep samples shotnoise or gaussian models");
      std::vector<SchemeSpec> schemes;
      for (const auto& token : sweep_schemes) schemes.push_back(parse_scheme_token(token, cache));
      SimConfig cfg;
      cfg.model = model_config(sweep_model);
      cfg.horizon = sweep_model.horizon;
      cfg.rounds = sweep_rounds;
      cfg.cache_size = cache;
      cfg.master_seed = sweep_model.seed;
      cfg.predictor = make_predictor(sweep_pred);
      cfg.lookahead = sweep_pred.lookahead == "on";
      ctx.seeds["seed"] = sweep_model.seed;
      const auto rows = sweep_t0max(cfg, sweep_t0, schemes);
      Table t{{"t0_max", "scheme", "mean", "stderr"}, {}};
      for (std::size_t i = 0; i < rows.size(); ++i) {
        t.rows.push_back({rows[i].t0_max, sweep_schemes[i % schemes.size()], rows[i].result.mean,
                          rows[i].result.stderr_});
      }
      emit(sweep_out, table_text(t, sweep_out.json), ctx, out);
    };
  });

  // replay
  auto* replay_cmd = app.add_subcommand("replay", "Re-run a manifest and compare output digests");
  std::string manifest_path;
  replay_cmd->add_option("manifest", manifest_path, "Path to <output>.manifest.json")->required();
  replay_cmd->callback([&] {
    run = [&] {
      std::ifstream in(manifest_path);
      if (!in) throw Error(Errc::kIoError, "cannot open '" + manifest_path + "'");
      const json manifest = json::parse(in);
      const auto argv = manifest.at("argv").get<std::vector<std::string>>();
      if (!argv.empty() && argv.front() == "replay") {
        throw UsageError("a manifest cannot replay another replay");
      }
      std::ostringstream inner_out;
      const int code = dispatch(argv, inner_out, err);
      if (code != kExitOk) throw Error(Errc::kIoError, "replayed command failed");
      bool same = true;
      for (const auto& [path, digest] : manifest.at("outputs").items()) {
        const bool match = sha256_file(path) == digest.get<std::string>();
        out << (match ? "match " : "MISMATCH ") << path << '\n';
        same = same && match;
      }
      if (!same) throw Error(Errc::kIoError, "outputs differ from the manifest");
    };
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    for (const CLI::App* sub : app.get_subcommands()) ctx.sub = sub;
    run();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    // Help and version requests are "errors" with exit code 0.
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitComputation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitComputation;
  }
}

}  // namespace stf::cli
