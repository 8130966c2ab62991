// Copyright 2026 The Subtrack Authors. All Rights Reserved.
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


// Experiment specs, scenario runners, seed-parallel execution and CSV
// aggregation.

#ifndef SUBTRACK_HARNESS_HPP_
#define SUBTRACK_HARNESS_HPP_

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "subtrack/dataset_io.hpp"
#include "subtrack/error.hpp"
#include "subtrack/fedcore.hpp"
#include "subtrack/fedrst.hpp"
#include "subtrack/linalg.hpp"
#include "subtrack/plot.hpp"
#include "subtrack/sparse.hpp"
#include "subtrack/stmiss.hpp"
#include "subtrack/synth.hpp"

namespace subtrack {

inline constexpr int kSchemaVersion = 1;
inline constexpr Index kDefaultTrials = 20;

enum class Scenario {
  kStMissRotation,
  kStMissPiecewise,
  kRstMissCentral,
  kFedRotation,
  kFedPiecewise,
  kFedPmEta,
  kFedPmRatio,
  kPmInitCheck,
};

inline const std::vector<std::pair<Scenario, std::string>>& scenario_names() {
  static const std::vector<std::pair<Scenario, std::string>> names = {
      {Scenario::kStMissRotation, "stmiss_rotation"}, {Scenario::kStMissPiecewise, "stmiss_piecewise"},
      {Scenario::kRstMissCentral, "rstmiss_central"}, {Scenario::kFedRotation, "fed_rotation"},
      {Scenario::kFedPiecewise, "fed_piecewise"},     {Scenario::kFedPmEta, "fedpm_eta"},
      {Scenario::kFedPmRatio, "fedpm_ratio"},         {Scenario::kPmInitCheck, "pm_init_check"},
  };
  return names;
}

inline std::string scenario_name(Scenario s) {
  for (const auto& [k, v] : scenario_names())
    if (k == s) return v;
  return "unknown";
}

inline Scenario scenario_from_name(const std::string& name) {
  for (const auto& [k, v] : scenario_names())
    if (v == name) return k;
  throw SchemaError("unknown scenario '" + name + "'");
}

// One power-method curve: normalization period, channel noise and the top
// eigenvalue of the spiked operator.
struct PmVariant {
  Index eta = 1;
  double sigma_c = 0.0;
  double top = 1.1;
};

struct ExperimentSpec {
  int schema_version = kSchemaVersion;
  std::string name = "custom";
  Scenario scenario = Scenario::kStMissRotation;
  ModelConfig model;

  // Tracking.
  double eps = 0.01;
  double eps_init = 0.1;
  std::vector<double> c_values;  // stmiss_rotation: alpha = C f^2 r log n sweep

  // Federated tracking.
  Index K = 4;
  double sigma_c = 0.0;
  Index L = 0;

  // Power method and init check.
  Index pm_n = 1000;
  Index pm_r = 30;
  Index pm_L = 400;
  double tail = 1.0;
  std::vector<PmVariant> variants;
  std::vector<double> gammas;
  Index trials = 1000;

  std::vector<std::uint64_t> seeds;
  std::string out_dir = "out";
  bool plot = true;
};

inline bool is_stmiss(Scenario s) {
  return s == Scenario::kStMissRotation || s == Scenario::kStMissPiecewise;
}
inline bool is_fed_track(Scenario s) {
  return s == Scenario::kFedRotation || s == Scenario::kFedPiecewise;
}
inline bool is_fedpm(Scenario s) { return s == Scenario::kFedPmEta || s == Scenario::kFedPmRatio; }
inline bool uses_model(Scenario s) {
  return is_stmiss(s) || is_fed_track(s) || s == Scenario::kRstMissCentral;
}

inline std::vector<std::uint64_t> seed_range(Index trials) {
  std::vector<std::uint64_t> out;
  for (Index i = 1; i <= trials; ++i) out.push_back(static_cast<std::uint64_t>(i));
  return out;
}

inline void validate(const ExperimentSpec& s) {
  if (s.schema_version != kSchemaVersion)
    throw SchemaError("schema_version " + std::to_string(s.schema_version) + " is not supported");
  if (s.name.empty() || s.name.find_first_of("/\\") != std::string::npos)
    throw ConfigError("name must be a non-empty file name");
  if (s.seeds.empty()) throw ConfigError("seed list is empty");
  if (std::set<std::uint64_t>(s.seeds.begin(), s.seeds.end()).size() != s.seeds.size())
    throw ConfigError("seed list has duplicates");
  if (uses_model(s.scenario)) {
    const ModelConfig& m = s.model;
    if (m.alpha < 1 || m.d % m.alpha != 0) throw ConfigError("d must be a positive multiple of alpha");
    if (!(m.n > m.r && m.r >= 1 && m.alpha >= m.r)) throw ConfigError("need n > r >= 1 and alpha >= r");
    const bool piecewise =
        s.scenario == Scenario::kStMissPiecewise || s.scenario == Scenario::kFedPiecewise;
    if (piecewise != (m.kind == ChangeKind::kPiecewise))
      throw ConfigError("model change kind does not match scenario " + scenario_name(s.scenario));
    if (m.kind == ChangeKind::kRotation && !m.change_batches.empty())
      throw ConfigError("change_batches given for a rotation model");
    if (!(s.eps > 0.0 && s.eps < 1.0)) throw ConfigError("eps must be in (0, 1)");
  }
  if (!s.c_values.empty()) {
    if (s.scenario != Scenario::kStMissRotation) throw ConfigError("c_values needs stmiss_rotation");
    for (double c : s.c_values)
      if (!(c > 0.0)) throw ConfigError("c_values must be positive");
  }
  if (s.scenario == Scenario::kRstMissCentral) {
    if (!(s.model.outlier.col_frac > 0.0)) throw ConfigError("rstmiss_central needs outliers");
    if (!(s.eps_init > 0.0 && s.eps_init < 1.0)) throw ConfigError("eps_init must be in (0, 1)");
  }
  if (is_fed_track(s.scenario)) {
    if (s.K < 1 || s.K > s.model.alpha) throw ConfigError("K must be in [1, alpha]");
    if (s.sigma_c < 0.0) throw ConfigError("sigma_c must be non-negative");
    if (s.L < 0) throw ConfigError("L must be non-negative");
  }
  if (is_fedpm(s.scenario)) {
    if (!(s.pm_n > s.pm_r && s.pm_r >= 1)) throw ConfigError("need pm n > r >= 1");
    if (s.pm_L < 1) throw ConfigError("pm L must be positive");
    if (s.variants.empty()) throw ConfigError("power-method scenario needs variants");
    for (const PmVariant& v : s.variants) {
      if (v.eta < 1) throw ConfigError("eta must be >= 1");
      if (v.sigma_c < 0.0) throw ConfigError("sigma_c must be non-negative");
      if (!(v.top > s.tail && s.tail > 0.0)) throw ConfigError("need top > tail > 0");
    }
  }
  if (s.scenario == Scenario::kPmInitCheck) {
    if (!(s.pm_n > s.pm_r && s.pm_r >= 1)) throw ConfigError("need pm n > r >= 1");
    if (s.gammas.empty()) throw ConfigError("pm_init_check needs gammas");
    for (double g : s.gammas)
      if (!(g > 1.0)) throw ConfigError("gamma must exceed 1");
    if (s.trials < 100) throw ConfigError("pm_init_check needs at least 100 trials");
  }
}

// JSON layout. Blocks that do not belong to the scenario are rejected.
inline nlohmann::json spec_to_json(const ExperimentSpec& s) {
  nlohmann::json j;
  j["schema_version"] = s.schema_version;
  j["name"] = s.name;
  j["scenario"] = scenario_name(s.scenario);
  j["seeds"] = s.seeds;
  j["out_dir"] = s.out_dir;
  j["plot"] = s.plot;
  if (uses_model(s.scenario)) {
    j["model"] = model_to_json(s.model);
    j["track"] = {{"eps", s.eps}, {"eps_init", s.eps_init}};
    if (!s.c_values.empty()) j["c_values"] = s.c_values;
  }
  if (is_fed_track(s.scenario)) j["fed"] = {{"K", s.K}, {"sigma_c", s.sigma_c}, {"L", s.L}};
  if (is_fedpm(s.scenario)) {
    nlohmann::json vs = nlohmann::json::array();
    for (const PmVariant& v : s.variants)
      vs.push_back({{"eta", v.eta}, {"sigma_c", v.sigma_c}, {"top", v.top}});
    j["pm"] = {{"n", s.pm_n}, {"r", s.pm_r}, {"L", s.pm_L}, {"tail", s.tail}, {"variants", vs}};
  }
  if (s.scenario == Scenario::kPmInitCheck)
    j["init_check"] = {{"n", s.pm_n}, {"r", s.pm_r}, {"gammas", s.gammas}, {"trials", s.trials}};
  return j;
}

inline ExperimentSpec spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("spec must be a JSON object");
  ExperimentSpec s;
  try {
    if (!j.contains("schema_version")) throw SchemaError("missing schema_version");
    s.schema_version = j.at("schema_version").get<int>();
    if (s.schema_version != kSchemaVersion)
      throw SchemaError("schema_version " + std::to_string(s.schema_version) + " is not supported");
    s.scenario = scenario_from_name(j.at("scenario").get<std::string>());
    std::set<std::string> allowed = {"schema_version", "name", "scenario", "seeds", "out_dir", "plot"};
    if (uses_model(s.scenario)) allowed.insert({"model", "track", "c_values"});
    if (is_fed_track(s.scenario)) allowed.insert("fed");
    if (is_fedpm(s.scenario)) allowed.insert("pm");
    if (s.scenario == Scenario::kPmInitCheck) allowed.insert("init_check");
    for (const auto& item : j.items())
      if (!allowed.count(item.key()))
        throw SchemaError("key '" + item.key() + "' is not valid for scenario " +
                          scenario_name(s.scenario));
    s.name = j.value("name", s.name);
    s.out_dir = j.value("out_dir", s.out_dir);
    s.plot = j.value("plot", s.plot);
    s.seeds = j.contains("seeds") ? j.at("seeds").get<std::vector<std::uint64_t>>()
                                  : seed_range(kDefaultTrials);
    if (j.contains("model")) s.model = model_from_json(j.at("model"));
    if (j.contains("track")) {
      const auto& t = j.at("track");
      s.eps = t.value("eps", s.eps);
      s.eps_init = t.value("eps_init", s.eps_init);
    }
    if (j.contains("c_values")) s.c_values = j.at("c_values").get<std::vector<double>>();
    if (j.contains("fed")) {
      const auto& f = j.at("fed");
      s.K = f.value("K", s.K);
      s.sigma_c = f.value("sigma_c", s.sigma_c);
      s.L = f.value("L", s.L);
    }
    if (j.contains("pm")) {
      const auto& p = j.at("pm");
      s.pm_n = p.value("n", s.pm_n);
      s.pm_r = p.value("r", s.pm_r);
      s.pm_L = p.value("L", s.pm_L);
      s.tail = p.value("tail", s.tail);
      for (const auto& v : p.at("variants"))
        s.variants.push_back({v.value("eta", Index{1}), v.value("sigma_c", 0.0), v.value("top", 1.1)});
    }
    if (j.contains("init_check")) {
      const auto& p = j.at("init_check");
      s.pm_n = p.value("n", Index{50});
      s.pm_r = p.value("r", Index{3});
      s.gammas = p.at("gammas").get<std::vector<double>>();
      s.trials = p.value("trials", s.trials);
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(e.what());
  }
  validate(s);
  return s;
}

inline ExperimentSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  return spec_from_json(j);
}

namespace harness_detail {

inline ModelConfig section_va_model() {
  ModelConfig m;
  m.n = 1000;
  m.d = 3000;
  m.r = 30;
  m.alpha = 60;
  m.delta = 1e-4;
  m.mask.rho = 0.9;
  return m;
}

inline ModelConfig robust_model() {
  ModelConfig m;
  m.n = 200;
  m.d = 1000;
  m.r = 5;
  m.alpha = 100;
  m.delta = 1e-4;
  m.mask.mode = MaskMode::kBounded;
  m.mask.col_frac = 0.02;
  m.mask.row_frac = 0.1;
  m.outlier.col_frac = 0.02;
  m.outlier.row_frac = 0.1;
  m.outlier.s_min = 10.0;
  m.outlier.s_max = 20.0;
  return m;
}

}  // namespace harness_detail

inline std::vector<std::string> builtin_names() {
  return {"fig1a", "fig1b", "rst", "fig3", "fig3b", "fig4a", "fig4b", "initcheck", "csweep"};
}

inline ExperimentSpec builtin_spec(const std::string& name) {
  using namespace harness_detail;
  ExperimentSpec s;
  s.name = name;
  s.seeds = seed_range(kDefaultTrials);
  if (name == "fig1a") {
    s.scenario = Scenario::kStMissRotation;
    s.model = section_va_model();
  } else if (name == "fig1b") {
    s.scenario = Scenario::kStMissPiecewise;
    s.model = section_va_model();
    s.model.kind = ChangeKind::kPiecewise;
    s.model.change_batches = {25};  // t = 1500
  } else if (name == "rst") {
    s.scenario = Scenario::kRstMissCentral;
    s.model = robust_model();
  } else if (name == "fig3") {
    s.scenario = Scenario::kFedRotation;
    s.model = section_va_model();
    s.sigma_c = 1e-3;  // variance 1e-6
  } else if (name == "fig3b") {
    s.scenario = Scenario::kFedPiecewise;
    s.model = section_va_model();
    s.model.kind = ChangeKind::kPiecewise;
    s.model.change_batches = {25};
    s.sigma_c = 1e-3;
  } else if (name == "fig4a") {
    s.scenario = Scenario::kFedPmEta;
    s.variants = {{1, 1e-4, 1.1}, {10, 1e-4, 1.1}, {1, 1e-8, 1.1}, {10, 1e-8, 1.1}};
  } else if (name == "fig4b") {
    s.scenario = Scenario::kFedPmRatio;
    s.variants = {{1, 1e-8, 1.1}, {1, 1e-8, 3.3}};
  } else if (name == "initcheck") {
    s.scenario = Scenario::kPmInitCheck;
    s.pm_n = 50;
    s.pm_r = 3;
    s.gammas = {2.0, 5.0, 10.0, 20.0, 50.0};
    s.seeds = {1, 2, 3};
  } else if (name == "csweep") {
    s.scenario = Scenario::kStMissRotation;
    s.model = section_va_model();
    s.model.d = 1200;  // 20 batches per C value
    s.c_values = {0.25, 0.5, 1.0, 2.0, 4.0};
    s.seeds = {1, 2, 3};
  } else {
    throw ConfigError("unknown built-in spec '" + name + "'");
  }
  validate(s);
  return s;
}

// Per-seed result: one row per x value, one column per series.
struct SeriesTable {
  std::string x_name = "x";
  std::vector<std::string> series;
  std::vector<double> x;
  std::vector<std::vector<double>> rows;

  void add_row(double xv, std::vector<double> values) {
    if (values.size() != series.size()) throw SchemaError("row width differs from series count");
    x.push_back(xv);
    rows.push_back(std::move(values));
  }
};

inline void write_table_csv(std::ostream& os, const SeriesTable& t) {
  os << t.x_name;
  for (const std::string& s : t.series) os << ',' << s;
  os << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < t.x.size(); ++i) {
    os << t.x[i];
    for (double v : t.rows[i]) os << ',' << v;
    os << '\n';
  }
}

// Mean, min and max per x value over finite entries; NaN where no seed has
// a finite value.
inline SeriesTable aggregate(const std::vector<SeriesTable>& tables) {
  if (tables.empty()) throw SchemaError("nothing to aggregate");
  const SeriesTable& first = tables.front();
  for (const SeriesTable& t : tables)
    if (t.series != first.series || t.x != first.x)
      throw SchemaError("per-seed tables disagree in layout");
  SeriesTable out;
  out.x_name = first.x_name;
  for (const std::string& s : first.series)
    for (const char* suffix : {"_mean", "_min", "_max"}) out.series.push_back(s + suffix);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < first.x.size(); ++i) {
    std::vector<double> row;
    for (std::size_t c = 0; c < first.series.size(); ++c) {
      double sum = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
      int count = 0;
      for (const SeriesTable& t : tables) {
        const double v = t.rows[i][c];
        if (!std::isfinite(v)) continue;
        sum += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        ++count;
      }
      if (count == 0) {
        row.insert(row.end(), {nan, nan, nan});
      } else {
        row.insert(row.end(), {sum / count, lo, hi});
      }
    }
    out.add_row(first.x[i], std::move(row));
  }
  return out;
}

inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string());
    out << content;
    if (!out) throw IoError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

// Worker count: SUBTRACK_THREADS if set and positive, else the hardware
// concurrency, never more than the number of tasks.
inline std::size_t worker_count(std::size_t tasks) {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SUBTRACK_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) n = static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::min(n, tasks));
}

// Runs fn(i) for i in [0, count). Results must be written to per-index
// slots; the first failing index (lowest i) is rethrown.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = worker_count(count);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
}

namespace harness_detail {

inline double nan() { return std::numeric_limits<double>::quiet_NaN(); }

inline SeriesTable run_stmiss(const ExperimentSpec& s, std::uint64_t seed) {
  const Dataset ds = generate_dataset(s.model, seed);
  TrackerConfig tc;
  tc.alpha = ds.config.alpha;
  tc.r = ds.config.r;
  tc.eps_nolev = ds.stats.noise_level;
  tc.refine = true;
  if (s.scenario == Scenario::kStMissPiecewise) {
    tc.detection = DetectionConfig{};
    tc.detection->eps = s.eps;
    tc.detection->k_updates = updates_to_converge(s.eps);
  }
  StMissTracker tracker(tc);
  const std::vector<double> pca = simple_pca_errors(ds);
  SeriesTable t;
  t.x_name = "j";
  t.series = {"simple_pca", "tracker", "refined"};
  Matrix lt;
  for (Index j = 0; j < ds.num_batches(); ++j) {
    const Batch b = make_batch(ds, j);
    const BatchTruth truth = truth_for(ds, j, &lt);
    const BatchOutput out = j == 0 ? tracker.init(b, truth) : tracker.step(b, truth);
    double refined = nan();
    if (out.Lhat_refined.size() > 0)
      refined = dist(r_svd(out.Lhat_refined, tc.r).basis, ds.P[static_cast<std::size_t>(j)]);
    t.add_row(static_cast<double>(j + 1),
              {pca[static_cast<std::size_t>(j)], tracker.history().back().dist, refined});
  }
  return t;
}

// Pass rate of the decay property per C, with alpha = ceil(C f^2 r log n)
// and the batch count of the spec's model.
inline SeriesTable run_csweep(const ExperimentSpec& s, std::uint64_t seed) {
  SeriesTable t;
  t.x_name = "C";
  t.series = {"alpha", "pass", "max_ratio"};
  const Index J = s.model.d / s.model.alpha;
  const double f = s.model.coef.lambda_plus / s.model.coef.lambda_minus;
  for (double C : s.c_values) {
    ModelConfig m = s.model;
    m.alpha = std::max(m.r, static_cast<Index>(std::ceil(recommended_alpha(C, f, m.r, m.n))));
    m.d = m.alpha * J;
    const Dataset ds = generate_dataset(m, seed);
    TrackerConfig tc;
    tc.eps_nolev = ds.stats.noise_level;
    tc.refine = false;
    const StMissTracker tr = track_dataset(ds, tc);
    double worst = 0.0;
    for (const BatchRecord& r : tr.history()) {
      if (r.j < 2) continue;
      worst = std::max(worst, r.dist / theoretical_bound_loose(r.j, ds.stats.delta_tv,
                                                               ds.stats.noise_level));
    }
    t.add_row(C, {static_cast<double>(m.alpha), worst <= 3.0 ? 1.0 : 0.0, worst});
  }
  return t;
}

inline SeriesTable run_rst(const ExperimentSpec& s, std::uint64_t seed) {
  const Dataset ds = generate_dataset(s.model, seed);
  RstConfig rc;
  rc.alpha = ds.config.alpha;
  rc.r = ds.config.r;
  rc.eps_init = s.eps_init;
  rc.eps_nolev = ds.stats.noise_level;
  rc.delta_tv = ds.stats.delta_tv;
  rc.cs = CsConfig::from_smin(ds.stats.s_min);
  RstTracker tracker(rc);
  Matrix lt;
  tracker.init_with(oracle_init(ds.P[0], s.eps_init, seed), truth_for(ds, 0, &lt));
  for (Index j = 1; j < ds.num_batches(); ++j) tracker.step(make_batch(ds, j), truth_for(ds, j, &lt));
  SeriesTable t;
  t.x_name = "j";
  t.series = {"tracker", "bound", "support_recall"};
  for (const RstRecord& r : tracker.history())
    t.add_row(static_cast<double>(r.base.j), {r.base.dist, r.base.bound, r.support_recall});
  return t;
}

inline FedRstConfig fed_config(const ExperimentSpec& s, const Dataset& ds, std::uint64_t seed) {
  FedRstConfig fc;
  fc.alpha = ds.config.alpha;
  fc.r = ds.config.r;
  fc.K = s.K;
  fc.sigma_c = s.sigma_c;
  fc.seed = seed;
  fc.eps = s.eps;
  fc.L = s.L;
  fc.eps_init = s.eps_init;
  fc.eps_nolev = ds.stats.noise_level;
  fc.delta_tv = ds.stats.delta_tv;
  if (ds.config.outlier.col_frac > 0.0) {
    fc.fill = FillMode::kModCs;
    fc.cs = CsConfig::from_smin(ds.stats.s_min);
    fc.init = FedInitMode::kOracle;
  } else {
    fc.fill = FillMode::kProjectedLs;
    fc.init = FedInitMode::kOutlierFreeBatch;
  }
  if (s.scenario == Scenario::kFedPiecewise) {
    fc.detection = FedDetectionConfig{};
    fc.detection->eps = s.eps;
    fc.detection->k_updates = updates_to_converge(s.eps);
  }
  return fc;
}

inline SeriesTable run_fed(const ExperimentSpec& s, std::uint64_t seed) {
  const Dataset ds = generate_dataset(s.model, seed);
  const FedRstTracker tr = fed_track_dataset(ds, fed_config(s, ds, seed));
  const std::vector<double> pca = simple_pca_errors(ds);
  SeriesTable t;
  t.x_name = "t";
  t.series = {"simple_pca", "tracker", "noise_floor"};
  for (const FedRecord& r : tr.history()) {
    const double floor =
        std::isfinite(r.sigma_r_op) ? predicted_noise_floor(ds.config.n, s.sigma_c, r.sigma_r_op) : nan();
    t.add_row(static_cast<double>(r.t), {pca[static_cast<std::size_t>(r.t - 1)], r.dist, floor});
  }
  return t;
}

inline std::string variant_label(const ExperimentSpec& s, const PmVariant& v) {
  char buf[64];
  if (s.scenario == Scenario::kFedPmRatio)
    std::snprintf(buf, sizeof buf, "R%.2f", s.tail / v.top);
  else
    std::snprintf(buf, sizeof buf, "eta%lld_sc%.0e", static_cast<long long>(v.eta), v.sigma_c);
  return buf;
}

// All variants of one seed share the operator basis and the initial iterate.
inline SeriesTable run_fedpm(const ExperimentSpec& s, std::uint64_t seed) {
  Stream stream(seed, "fedpm-operator");
  const Matrix U = random_basis(s.pm_n, s.pm_r, stream);
  SeriesTable t;
  t.x_name = "l";
  std::vector<std::vector<double>> cols;
  for (const PmVariant& v : s.variants) {
    t.series.push_back(variant_label(s, v));
    const SpikedOperator A{U, Vector::Constant(s.pm_r, v.top), s.tail};
    Channel ch(v.sigma_c, seed);
    PmConfig cfg;
    cfg.r = s.pm_r;
    cfg.L = s.pm_L;
    cfg.eta = v.eta;
    cfg.init_seed = seed;
    cfg.truth = &U;
    const PmResult res = fedoa_pm(std::function<Matrix(const Matrix&)>(A), s.pm_n, cfg, ch);
    std::vector<double> col;
    for (const PmIterate& it : res.trace) col.push_back(it.dist);
    cols.push_back(std::move(col));
  }
  for (Index l = 1; l <= s.pm_L; ++l) {
    std::vector<double> row;
    for (const auto& c : cols) row.push_back(c[static_cast<std::size_t>(l - 1)]);
    t.add_row(static_cast<double>(l), std::move(row));
  }
  return t;
}

inline SeriesTable run_init_check(const ExperimentSpec& s, std::uint64_t seed) {
  SeriesTable t;
  t.x_name = "gamma";
  t.series = {"success_rate", "target"};
  for (double g : s.gammas) {
    const InitQuality q = random_init_quality_check(s.pm_n, s.pm_r, g, s.trials, seed);
    t.add_row(g, {q.success_rate, 1.0 - 1.0 / g});
  }
  return t;
}

}  // namespace harness_detail

inline SeriesTable run_seed(const ExperimentSpec& s, std::uint64_t seed) {
  using namespace harness_detail;
  switch (s.scenario) {
    case Scenario::kStMissRotation:
      return s.c_values.empty() ? run_stmiss(s, seed) : run_csweep(s, seed);
    case Scenario::kStMissPiecewise:
      return run_stmiss(s, seed);
    case Scenario::kRstMissCentral:
      return run_rst(s, seed);
    case Scenario::kFedRotation:
    case Scenario::kFedPiecewise:
      return run_fed(s, seed);
    case Scenario::kFedPmEta:
    case Scenario::kFedPmRatio:
      return run_fedpm(s, seed);
    case Scenario::kPmInitCheck:
      return run_init_check(s, seed);
  }
  throw ConfigError("unhandled scenario");
}

struct ExperimentResult {
  std::filesystem::path dir;
  std::vector<std::filesystem::path> seed_csvs;
  std::filesystem::path aggregate_csv;
  std::filesystem::path plot;  // empty when plotting is off
  SeriesTable aggregate;
};

// Writes <out_dir>/<name>/{spec.json, seed_<s>.csv, aggregate.csv, plot.svg}.
inline ExperimentResult run_experiment(const ExperimentSpec& spec, bool quiet = false) {
  validate(spec);
  namespace fs = std::filesystem;
  ExperimentResult res;
  res.dir = fs::path(spec.out_dir) / spec.name;
  fs::create_directories(res.dir);
  write_file_atomic(res.dir / "spec.json", spec_to_json(spec).dump(2) + "\n");
  std::vector<SeriesTable> tables(spec.seeds.size());
  res.seed_csvs.resize(spec.seeds.size());
  parallel_for(spec.seeds.size(), [&](std::size_t i) {
    const std::uint64_t seed = spec.seeds[i];
    const auto start = std::chrono::steady_clock::now();
    tables[i] = run_seed(spec, seed);
    std::ostringstream os;
    write_table_csv(os, tables[i]);
    res.seed_csvs[i] = res.dir / ("seed_" + std::to_string(seed) + ".csv");
    write_file_atomic(res.seed_csvs[i], os.str());
    if (!quiet)
      spdlog::info("{}: seed {} done in {:.1f} s", spec.name, seed,
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  });
  res.aggregate = aggregate(tables);
  std::ostringstream os;
  write_table_csv(os, res.aggregate);
  res.aggregate_csv = res.dir / "aggregate.csv";
  write_file_atomic(res.aggregate_csv, os.str());
  if (spec.plot) {
    PlotStyle style;
    style.title = spec.name;
    style.x_label = res.aggregate.x_name;
    style.log_y = spec.scenario != Scenario::kPmInitCheck && spec.c_values.empty();
    res.plot = res.dir / "plot.svg";
    write_file_atomic(res.plot, plot_svg(read_csv_table(os.str()), style));
  }
  return res;
}

}  // namespace subtrack

#endif  // SUBTRACK_HARNESS_HPP_
