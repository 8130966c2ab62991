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


// Command-line front end: dataset generation, experiment runs, acceptance
// suites and plotting.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "subtrack/acceptance.hpp"
#include "subtrack/dataset_io.hpp"
#include "subtrack/error.hpp"
#include "subtrack/fedrst.hpp"
#include "subtrack/harness.hpp"
#include "subtrack/plot.hpp"
#include "subtrack/sparse.hpp"
#include "subtrack/stmiss.hpp"

namespace {

namespace fs = std::filesystem;
using namespace subtrack;

struct Common {
  std::string config;
  std::string builtin;
  std::optional<std::uint64_t> seed;
  Index trials = 0;
  std::string out;
  bool quiet = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "Experiment spec (JSON)");
  app->add_option("--builtin", c.builtin, "Built-in spec name instead of --config");
  app->add_option("--seed", c.seed, "Run this seed only");
  app->add_option("--trials", c.trials, "Use seeds 1..N");
  app->add_option("--out", c.out, "Output directory");
  app->add_flag("--quiet", c.quiet, "Only print errors");
}

ExperimentSpec resolve_spec(const Common& c) {
  if (c.config.empty() == c.builtin.empty())
    throw ConfigError("give exactly one of --config and --builtin");
  ExperimentSpec s = c.config.empty() ? builtin_spec(c.builtin) : load_spec(c.config);
  if (c.seed && c.trials > 0) throw ConfigError("--seed and --trials are exclusive");
  if (c.seed) s.seeds = {*c.seed};
  if (c.trials > 0) s.seeds = seed_range(c.trials);
  if (!c.out.empty()) s.out_dir = c.out;
  validate(s);
  return s;
}

void require(bool ok, const std::string& cmd, const ExperimentSpec& s) {
  if (!ok)
    throw ConfigError("scenario " + scenario_name(s.scenario) + " does not belong to '" + cmd + "'");
}

int run_spec(const ExperimentSpec& s, bool quiet) {
  const ExperimentResult res = run_experiment(s, quiet);
  if (!quiet) {
    std::cout << "aggregate: " << res.aggregate_csv.string() << "\n";
    if (!res.plot.empty()) std::cout << "plot: " << res.plot.string() << "\n";
  }
  return 0;
}

// Detailed per-batch CSV for an exported dataset.
int track_dataset_dir(const fs::path& dir, const Common& c, bool federated, double sigma_c, Index K) {
  const Dataset ds = import_dataset(dir);
  if (ds.P.empty()) throw ConfigError("dataset has no ground-truth subspaces");
  const fs::path out = fs::path(c.out.empty() ? "out" : c.out) / "track.csv";
  std::ostringstream os;
  if (federated) {
    ExperimentSpec s = builtin_spec("fig3");
    s.sigma_c = sigma_c;
    s.K = K;
    s.model = ds.config;
    if (ds.config.kind == ChangeKind::kPiecewise) s.scenario = Scenario::kFedPiecewise;
    write_fed_csv(os, fed_track_dataset(ds, harness_detail::fed_config(s, ds, ds.seed)).history());
  } else if (ds.config.outlier.col_frac > 0.0) {
    RstConfig rc;
    rc.alpha = ds.config.alpha;
    rc.r = ds.config.r;
    rc.eps_nolev = ds.stats.noise_level;
    rc.delta_tv = ds.stats.delta_tv;
    rc.cs = CsConfig::from_smin(ds.stats.s_min);
    RstTracker tr(rc);
    Matrix lt;
    tr.init_with(oracle_init(ds.P[0], rc.eps_init, ds.seed), truth_for(ds, 0, &lt));
    for (Index j = 1; j < ds.num_batches(); ++j) tr.step(make_batch(ds, j), truth_for(ds, j, &lt));
    write_rst_csv(os, tr.history());
  } else {
    TrackerConfig tc;
    tc.eps_nolev = ds.stats.noise_level;
    tc.delta_tv = ds.stats.delta_tv;
    if (ds.config.kind == ChangeKind::kPiecewise) tc.detection = DetectionConfig{};
    write_tracker_csv(os, track_dataset(ds, tc).history());
  }
  write_file_atomic(out, os.str());
  if (!c.quiet) std::cout << "wrote " << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Subspace tracking with missing data, outliers and federated power iterations"};
  app.require_subcommand(1);

  Common gen_c, track_c, fedpm_c, fedtrack_c;
  CLI::App* gen = app.add_subcommand("gen", "Generate and export the dataset of a spec");
  add_common(gen, gen_c);

  std::string track_dataset_path;
  CLI::App* track = app.add_subcommand("track", "Centralized tracking experiments");
  add_common(track, track_c);
  track->add_option("--dataset", track_dataset_path, "Track an exported dataset instead");

  CLI::App* fedpm = app.add_subcommand("fedpm", "Federated power method experiments");
  add_common(fedpm, fedpm_c);

  std::string fed_dataset_path;
  double fed_sigma_c = 1e-3;
  Index fed_K = 4;
  CLI::App* fedtrack = app.add_subcommand("fedtrack", "Federated tracking experiments");
  add_common(fedtrack, fedtrack_c);
  fedtrack->add_option("--dataset", fed_dataset_path, "Track an exported dataset instead");
  fedtrack->add_option("--sigma-c", fed_sigma_c, "Channel noise for --dataset runs");
  fedtrack->add_option("--nodes", fed_K, "Node count for --dataset runs");

  std::string suite = "all", report_path, verify_dataset;
  Index verify_trials = 0;
  bool verify_quiet = false;
  CLI::App* verify_cmd = app.add_subcommand("verify", "Run an acceptance suite");
  verify_cmd->add_option("suite", suite, "Suite name")
      ->check(CLI::IsMember(subtrack::suite_names()));
  verify_cmd->add_option("--trials", verify_trials, "Seed count for multi-seed criteria");
  verify_cmd->add_option("--dataset", verify_dataset, "Evaluate on an exported dataset");
  verify_cmd->add_option("--out", report_path, "Write the JSON report here");
  verify_cmd->add_flag("--quiet", verify_quiet, "Only print failures");

  std::string csv_in, svg_out, title, x_label = "x", y_label = "dist";
  bool linear = false;
  CLI::App* plot = app.add_subcommand("plot", "Render a CSV as an SVG line chart");
  plot->add_option("csv", csv_in, "Input CSV")->required();
  plot->add_option("--out", svg_out, "Output SVG (default: input with .svg)");
  plot->add_option("--title", title);
  plot->add_option("--xlabel", x_label);
  plot->add_option("--ylabel", y_label);
  plot->add_flag("--linear", linear, "Linear y axis");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      spdlog::set_level(gen_c.quiet ? spdlog::level::err : spdlog::level::info);
      const ExperimentSpec s = resolve_spec(gen_c);
      require(uses_model(s.scenario), "gen", s);
      for (std::uint64_t seed : s.seeds) {
        const fs::path dir = fs::path(s.out_dir) / s.name / ("dataset_" + std::to_string(seed));
        export_dataset(generate_dataset(s.model, seed), dir);
        if (!gen_c.quiet) std::cout << "wrote " << dir.string() << "\n";
      }
      return 0;
    }
    if (*track) {
      spdlog::set_level(track_c.quiet ? spdlog::level::err : spdlog::level::info);
      if (!track_dataset_path.empty()) return track_dataset_dir(track_dataset_path, track_c, false, 0.0, 1);
      const ExperimentSpec s = resolve_spec(track_c);
      require(is_stmiss(s.scenario) || s.scenario == Scenario::kRstMissCentral, "track", s);
      return run_spec(s, track_c.quiet);
    }
    if (*fedpm) {
      spdlog::set_level(fedpm_c.quiet ? spdlog::level::err : spdlog::level::info);
      const ExperimentSpec s = resolve_spec(fedpm_c);
      require(is_fedpm(s.scenario) || s.scenario == Scenario::kPmInitCheck, "fedpm", s);
      return run_spec(s, fedpm_c.quiet);
    }
    if (*fedtrack) {
      spdlog::set_level(fedtrack_c.quiet ? spdlog::level::err : spdlog::level::info);
      if (!fed_dataset_path.empty())
        return track_dataset_dir(fed_dataset_path, fedtrack_c, true, fed_sigma_c, fed_K);
      const ExperimentSpec s = resolve_spec(fedtrack_c);
      require(is_fed_track(s.scenario), "fedtrack", s);
      return run_spec(s, fedtrack_c.quiet);
    }
    if (*verify_cmd) {
      spdlog::set_level(spdlog::level::err);
      VerifyOptions opt;
      opt.trials = verify_trials;
      if (!verify_dataset.empty()) opt.dataset = fs::path(verify_dataset);
      const AcceptanceReport rep = verify(suite, opt);
      for (const CriterionResult& r : rep.results)
        if (!verify_quiet || !r.pass()) std::cout << format_line(r) << "\n";
      if (!report_path.empty()) write_file_atomic(report_path, rep.to_json().dump(2) + "\n");
      return rep.all_pass() ? 0 : 1;
    }
    if (*plot) {
      std::ifstream in(csv_in);
      if (!in) throw IoError("cannot open " + csv_in);
      std::stringstream buf;
      buf << in.rdbuf();
      PlotStyle style;
      style.title = title;
      style.x_label = x_label;
      style.y_label = y_label;
      style.log_y = !linear;
      const std::string out = svg_out.empty() ? fs::path(csv_in).replace_extension(".svg").string() : svg_out;
      write_file_atomic(out, plot_svg(read_csv_table(buf.str()), style));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
