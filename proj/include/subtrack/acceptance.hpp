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


// Executable acceptance criteria. Each criterion reports the measured value
// next to its pinned threshold and its wall time next to the runtime limit.
// Failures and thrown errors become report entries.

#ifndef SUBTRACK_ACCEPTANCE_HPP_
#define SUBTRACK_ACCEPTANCE_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "subtrack/dataset_io.hpp"
#include "subtrack/error.hpp"
#include "subtrack/fedcore.hpp"
#include "subtrack/fedrst.hpp"
#include "subtrack/harness.hpp"
#include "subtrack/linalg.hpp"
#include "subtrack/oracle/jacobi.hpp"
#include "subtrack/sparse.hpp"
#include "subtrack/stmiss.hpp"
#include "subtrack/synth.hpp"

namespace subtrack {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool metric_pass = false;
  bool runtime_pass = true;
  std::string measured;
  std::string threshold;
  double elapsed_s = 0.0;
  double limit_s = 0.0;  // 0: no separate runtime (shares another criterion's runs)
  std::string error;
  nlohmann::json details = nlohmann::json::object();

  bool pass() const { return error.empty() && metric_pass && runtime_pass; }
};

struct AcceptanceReport {
  std::string suite;
  std::vector<CriterionResult> results;

  bool all_pass() const {
    return !results.empty() &&
           std::all_of(results.begin(), results.end(), [](const CriterionResult& r) { return r.pass(); });
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["suite"] = suite;
    j["pass"] = all_pass();
    j["results"] = nlohmann::json::array();
    for (const CriterionResult& r : results) {
      j["results"].push_back({{"id", r.id},
                              {"name", r.name},
                              {"pass", r.pass()},
                              {"metric_pass", r.metric_pass},
                              {"runtime_pass", r.runtime_pass},
                              {"measured", r.measured},
                              {"threshold", r.threshold},
                              {"elapsed_s", r.elapsed_s},
                              {"limit_s", r.limit_s},
                              {"error", r.error},
                              {"details", r.details}});
    }
    return j;
  }
};

struct VerifyOptions {
  Index trials = 0;                                // 0: criterion default
  std::optional<std::filesystem::path> dataset;    // replaces generated data where supported
};

namespace acceptance_detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

inline std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline void finish(CriterionResult& r, Clock::time_point t0) {
  r.elapsed_s = seconds_since(t0);
  if (r.limit_s > 0.0) r.runtime_pass = r.elapsed_s < r.limit_s;
}

// Runs body and converts a thrown error into a failed entry.
inline CriterionResult guarded(int id, const std::string& name, double limit_s,
                               const std::function<void(CriterionResult&)>& body) {
  CriterionResult r;
  r.id = id;
  r.name = name;
  r.limit_s = limit_s;
  const auto t0 = Clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.metric_pass = false;
    r.error = e.what();
  }
  finish(r, t0);
  return r;
}

inline std::vector<std::uint64_t> seeds(Index trials, Index fallback, std::uint64_t first = 1) {
  std::vector<std::uint64_t> out;
  const Index n = trials > 0 ? trials : fallback;
  for (Index i = 0; i < n; ++i) out.push_back(first + static_cast<std::uint64_t>(i));
  return out;
}

// Imports a dataset and insists on per-batch ground truth.
inline Dataset dataset_with_truth(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "manifest.json"))
    throw ConfigError("no dataset manifest in " + dir.string());
  if (!std::filesystem::exists(dir / "subspaces.f64"))
    throw ConfigError("dataset " + dir.string() + " has no ground-truth subspaces");
  Dataset ds = import_dataset(dir);
  if (static_cast<Index>(ds.P.size()) != ds.num_batches() || ds.P.empty())
    throw ConfigError("dataset " + dir.string() + " has no ground-truth subspaces");
  return ds;
}

// The rotation configuration: n = 1000, d = 3000, r = 30, alpha = 60,
// 10% missing, delta = 1e-4.
inline ModelConfig rotation_model() { return harness_detail::section_va_model(); }

inline ModelConfig piecewise_model(std::vector<Index> changes) {
  ModelConfig m = rotation_model();
  m.kind = ChangeKind::kPiecewise;
  m.change_batches = std::move(changes);
  return m;
}

}  // namespace acceptance_detail

// 1. r_svd, spectral_norm and dist against cyclic Jacobi.
inline CriterionResult criterion_linalg_oracles() {
  using namespace acceptance_detail;
  return guarded(1, "linalg-oracles", 10.0, [](CriterionResult& r) {
    constexpr double kTol = 1e-8;
    double worst_basis = 0.0, worst_values = 0.0, worst_norm = 0.0, worst_dist = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
      Stream s(static_cast<std::uint64_t>(trial), "acceptance-linalg");
      const Index n = 1 + static_cast<Index>(s.below(12));
      const Index d = 1 + static_cast<Index>(s.below(12));
      const Index k = 1 + static_cast<Index>(s.below(static_cast<std::uint64_t>(std::min(n, d))));
      const Matrix M = s.gaussian(n, d);
      const SvdResult res = r_svd(M, k);
      const oracle::EigenPairs ref = oracle::jacobi_left_svd(M, k);
      worst_basis = std::max(worst_basis, oracle::jacobi_proj_dist(res.basis, ref.vectors));
      for (Index i = 0; i < k; ++i)
        worst_values = std::max(worst_values, std::abs(res.values(i) / ref.values(i) - 1.0));
      worst_norm = std::max(worst_norm, std::abs(spectral_norm(M) / oracle::jacobi_spectral_norm(M) - 1.0));
      if (n >= 2) {
        const Index q = 1 + static_cast<Index>(s.below(static_cast<std::uint64_t>(n - 1)));
        const Matrix P1 = random_basis(n, q, s);
        const Matrix P2 = random_basis(n, q, s);
        worst_dist = std::max(worst_dist, std::abs(dist(P1, P2) - oracle::jacobi_proj_dist(P1, P2)));
      }
    }
    const double worst = std::max({worst_basis, worst_values, worst_norm, worst_dist});
    r.metric_pass = worst <= kTol;
    r.measured = "max deviation " + fmt(worst);
    r.threshold = "<= 1e-08 on 500 matrices";
    r.details = {{"basis", worst_basis}, {"singular_values", worst_values},
                 {"spectral_norm", worst_norm}, {"dist", worst_dist}};
  });
}

// 2. Slow-change decay on the rotation configuration.
inline CriterionResult criterion_decay_bound(const VerifyOptions& opt = {}) {
  using namespace acceptance_detail;
  return guarded(2, "decay-bound", 180.0, [&](CriterionResult& r) {
    const std::vector<std::uint64_t> sd =
        opt.dataset ? std::vector<std::uint64_t>{0} : seeds(opt.trials, 20);
    struct Out {
      double max_ratio = 0.0;
      Index first_violation = 0;
      bool beats = true;
    };
    std::vector<Out> out(sd.size());
    parallel_for(sd.size(), [&](std::size_t i) {
      const Dataset ds = opt.dataset ? dataset_with_truth(*opt.dataset)
                                     : generate_dataset(rotation_model(), sd[i]);
      TrackerConfig tc;
      tc.eps_nolev = ds.stats.noise_level;
      tc.delta_tv = ds.stats.delta_tv;
      tc.refine = false;
      const StMissTracker tr = track_dataset(ds, tc);
      const std::vector<double> pca = simple_pca_errors(ds);
      for (const BatchRecord& b : tr.history()) {
        if (b.j >= 2) {
          const double ratio =
              b.dist / theoretical_bound_loose(b.j, ds.stats.delta_tv, ds.stats.noise_level);
          out[i].max_ratio = std::max(out[i].max_ratio, ratio);
          if (ratio > 3.0 && out[i].first_violation == 0) out[i].first_violation = b.j;
        }
        if (b.j >= 5 && !(b.dist < pca[static_cast<std::size_t>(b.j - 1)])) out[i].beats = false;
      }
    });
    int decay_ok = 0, beats = 0;
    double worst = 0.0;
    nlohmann::json per_seed = nlohmann::json::array();
    for (std::size_t i = 0; i < sd.size(); ++i) {
      decay_ok += out[i].max_ratio <= 3.0;
      beats += out[i].beats;
      worst = std::max(worst, out[i].max_ratio);
      per_seed.push_back({{"seed", sd[i]}, {"max_ratio", out[i].max_ratio},
                          {"first_violation_j", out[i].first_violation}, {"beats_pca", out[i].beats}});
    }
    const double frac = static_cast<double>(decay_ok) / static_cast<double>(sd.size());
    r.metric_pass = frac >= 0.95 && beats == static_cast<int>(sd.size());
    r.measured = "decay held in " + std::to_string(decay_ok) + "/" + std::to_string(sd.size()) +
                 " seeds (max dist/bound " + fmt(worst) + "), beats simple PCA from j=5 in " +
                 std::to_string(beats) + "/" + std::to_string(sd.size());
    r.threshold = "dist <= 3 x bound for all j >= 2 in >= 95% of seeds; beats PCA in every seed";
    r.details = {{"seeds", per_seed}};
  });
}

// 3. Change detection on the piecewise model, change at t = 1500.
inline CriterionResult criterion_detection(const VerifyOptions& opt = {}) {
  using namespace acceptance_detail;
  return guarded(3, "detection", 180.0, [&](CriterionResult& r) {
    constexpr double kEps = 0.01;
    const Index K = updates_to_converge(kEps);
    const std::vector<std::uint64_t> sd = seeds(opt.trials, 20);
    struct Out {
      std::vector<Index> changed, clean;
      Index change = 0;  // 1-based batch holding the new subspace
      double post = std::numeric_limits<double>::quiet_NaN();
    };
    const std::size_t runs = opt.dataset ? 1 : sd.size();
    std::vector<Out> out(runs);
    TrackerConfig tc;
    tc.refine = false;
    tc.detection = DetectionConfig{};
    tc.detection->eps = kEps;
    tc.detection->k_updates = K;
    parallel_for(runs, [&](std::size_t i) {
      const Dataset ds =
          opt.dataset ? dataset_with_truth(*opt.dataset) : generate_dataset(piecewise_model({25}), sd[i]);
      if (ds.config.change_batches.size() != 1) throw ConfigError("dataset needs exactly one change");
      Out& o = out[i];
      o.change = ds.config.change_batches[0] + 1;
      const StMissTracker tr = track_dataset(ds, tc);
      o.changed = tr.detections();
      const std::size_t at = static_cast<std::size_t>(o.change + K - 1);
      if (at < tr.history().size()) o.post = tr.history()[at].dist;
      if (!opt.dataset) o.clean = track_dataset(generate_dataset(piecewise_model({}), 1000 + sd[i]), tc).detections();
    });
    int timely = 0, false_alarms = 0, reconverged = 0;
    Index worst_delay = 0;
    nlohmann::json per_seed = nlohmann::json::array();
    for (std::size_t i = 0; i < runs; ++i) {
      const Out& o = out[i];
      bool ok = false;
      Index delay = -1;
      for (Index det : o.changed) {
        if (det < o.change) ++false_alarms;
      }
      for (Index det : o.changed) {
        if (det >= o.change) {
          delay = det - o.change;
          ok = delay <= 2;
          break;
        }
      }
      false_alarms += static_cast<int>(o.clean.size());
      timely += ok;
      worst_delay = std::max(worst_delay, delay < 0 ? Index{999} : delay);
      reconverged += o.post <= 2.0 * kEps * 3.0;
      per_seed.push_back({{"seed", opt.dataset ? 0 : sd[i]}, {"detections", o.changed},
                          {"delay", delay}, {"clean_alarms", o.clean.size()}, {"post_dist", o.post}});
    }
    const double frac = static_cast<double>(timely) / static_cast<double>(runs);
    r.metric_pass = frac >= 0.95 && false_alarms == 0 && reconverged == static_cast<int>(runs);
    r.measured = "delay <= 2 in " + std::to_string(timely) + "/" + std::to_string(runs) +
                 " (worst " + std::to_string(worst_delay) + "), false alarms " +
                 std::to_string(false_alarms) + ", dist <= 0.06 after " + std::to_string(K) +
                 " batches in " + std::to_string(reconverged) + "/" + std::to_string(runs);
    r.threshold = ">= 95% delay <= 2; 0 false alarms on 20 change-free runs; post-change dist <= 6 eps";
    r.details = {{"seeds", per_seed}};
  });
}

// 4. Exact support recovery of modified-CS in the verified regime.
inline CriterionResult criterion_modcs_support() {
  using namespace acceptance_detail;
  return guarded(4, "modcs-support", 60.0, [](CriterionResult& r) {
    const Index n = 1000, rank = 3, m = 4, k = 2;
    const double s_min = 10.0, xi = s_min / 15.0;
    int verified = 0, exact = 0;
    double worst_err = 0.0, worst_ric = 0.0;
    SupportScore score;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      Stream s(seed, "acceptance-cs");
      const Matrix P = random_basis(n, rank, s);
      const Matrix Phat = basis_at_distance(P, 0.05, s);
      std::vector<Index> perm(static_cast<std::size_t>(n));
      for (Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
      for (Index i = 0; i < m + k; ++i)
        std::swap(perm[static_cast<std::size_t>(i)],
                  perm[static_cast<std::size_t>(i + static_cast<Index>(s.below(static_cast<std::uint64_t>(n - i))))]);
      IndexSet M(perm.begin(), perm.begin() + m), T(perm.begin() + m, perm.begin() + m + k);
      std::sort(M.begin(), M.end());
      std::sort(T.begin(), T.end());
      const Vector l = P * s.gaussian(rank, 1);
      Vector x = Vector::Zero(n);
      for (Index i : M) x(i) = -l(i);
      for (Index i : T) x(i) = (s.uniform() < 0.5 ? -1.0 : 1.0) * s.uniform(s_min, 2.0 * s_min);
      const Vector y = l + x;
      const Vector yt = y - Phat * (Phat.transpose() * y);
      const Vector proj_err = l - Phat * (Phat.transpose() * l);
      const double ric = ric_bound(Phat, m + 2 * k, seed).upper;
      worst_ric = std::max(worst_ric, ric);
      if (ric > 0.15 || proj_err.norm() > xi) continue;
      ++verified;
      const CsResult cs = solve_modcs(Phat, yt, M, xi);
      const IndexSet est = threshold_support(cs.x, s_min / 2.0, M);
      IndexSet truth = M;
      truth.insert(truth.end(), T.begin(), T.end());
      std::sort(truth.begin(), truth.end());
      score.add(est, M, T);
      exact += est == truth;
      worst_err = std::max(worst_err, (cs.x - x).norm());
    }
    r.metric_pass = verified == 100 && exact == 100 && worst_err <= 7.0 * xi;
    r.measured = "verified " + std::to_string(verified) + "/100, precision " + fmt(score.precision()) +
                 ", recall " + fmt(score.recall()) + ", max error " + fmt(worst_err) + " (7 xi = " +
                 fmt(7.0 * xi) + ")";
    r.threshold = "precision = recall = 1 and error <= 7 xi on 100 columns";
    r.details = {{"max_ric_upper", worst_ric}};
  });
}

// 5. Noiseless federated power method against the centralized oracles.
inline CriterionResult criterion_fedpm_noiseless() {
  using namespace acceptance_detail;
  return guarded(5, "fedpm-noiseless", 30.0, [](CriterionResult& r) {
    const Index n = 50, rank = 4, d = 120, L = 100;
    double worst_final = 0.0, worst_iter = 0.0;
    for (Index K : {1, 4}) {
      for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Stream s(seed, "acceptance-fedpm-noiseless");
        Vector lam(n);
        for (Index i = 0; i < n; ++i) lam(i) = 10.0 / static_cast<double>(i + 1);
        const Matrix Uf = random_basis(n, n, s);
        const Matrix Z = Uf * lam.cwiseSqrt().asDiagonal() * random_basis(d, n, s).transpose();
        const Matrix U0 = s.gaussian(n, rank);
        Channel ch(0.0, seed);
        PmConfig cfg;
        cfg.r = rank;
        cfg.L = L;
        cfg.init = U0;
        cfg.keep_iterates = true;
        const PmResult res = fedoa_pm(shard_columns(Z, partition_columns(d, K)), cfg, ch);
        const oracle::EigenPairs ref = oracle::jacobi_left_svd(Z, rank);
        worst_final = std::max(worst_final, oracle::jacobi_proj_dist(res.U, ref.vectors));
        Matrix Q, R;
        oracle::gram_schmidt(U0, Q, R);
        for (Index l = 0; l <= L; ++l) {
          if (l > 0) oracle::gram_schmidt(Matrix(Z * (Z.transpose() * Q)), Q, R);
          worst_iter = std::max(worst_iter,
                                (res.iterates[static_cast<std::size_t>(l)] - Q).cwiseAbs().maxCoeff());
        }
      }
    }
    r.metric_pass = worst_final <= 1e-8 && worst_iter <= 1e-10;
    r.measured = "final dist " + fmt(worst_final) + ", max iterate deviation " + fmt(worst_iter);
    r.threshold = "final <= 1e-08, iterates <= 1e-10 (K = 1, 4)";
  });
}

namespace acceptance_detail {

// n = 100, r = 5, eigenvalues 2..1 on the top block and 0.9..0.1 below,
// so R = 0.9; sigma_c = eps sigma_r / (5 sqrt(n)).
struct NoisyPmRun {
  double dist = 0.0;
  double sigma1_hat = 0.0;
  Index L = 0;
};

inline NoisyPmRun noisy_pm_run(std::uint64_t seed, double eps) {
  const Index n = 100, rank = 5, d = 200;
  Vector lam(n);
  for (Index i = 0; i < rank; ++i) lam(i) = 2.0 - static_cast<double>(i) / static_cast<double>(rank - 1);
  for (Index i = rank; i < n; ++i)
    lam(i) = 0.9 - 0.8 * static_cast<double>(i - rank) / static_cast<double>(n - rank - 1);
  Stream s(seed, "acceptance-noisy-pm");
  const Matrix Uf = random_basis(n, n, s);
  const Matrix Z = Uf * lam.cwiseSqrt().asDiagonal() * random_basis(d, n, s).transpose();
  const double sigma_c = eps * 1.0 / (5.0 * std::sqrt(static_cast<double>(n)));
  Channel ch(sigma_c, seed);
  const Matrix U = Uf.leftCols(rank);
  PmConfig cfg;
  cfg.r = rank;
  cfg.L = required_iterations(0.9, eps, n, rank);
  cfg.init_seed = seed;
  cfg.truth = &U;
  const PmResult res = fedoa_pm(shard_columns(Z, partition_columns(d, 4)), cfg, ch);
  return {res.trace.back().dist, res.sigma1_hat, cfg.L};
}

}  // namespace acceptance_detail

// 6 and 7. Noisy convergence and the eigenvalue sandwich on the successes.
inline std::vector<CriterionResult> criteria_fedpm_noisy() {
  using namespace acceptance_detail;
  constexpr double kEps = 0.05;
  std::vector<acceptance_detail::NoisyPmRun> runs(100);
  CriterionResult c6 = guarded(6, "fedpm-noisy", 120.0, [&](CriterionResult& r) {
    parallel_for(runs.size(), [&](std::size_t i) {
      runs[i] = noisy_pm_run(5000 + static_cast<std::uint64_t>(i), kEps);
    });
    int ok = 0;
    double worst = 0.0;
    for (const auto& run : runs) {
      ok += run.dist <= kEps;
      worst = std::max(worst, run.dist);
    }
    r.metric_pass = ok >= 90;
    r.measured = std::to_string(ok) + "/100 trials with dist <= 0.05 (L = " +
                 std::to_string(runs.front().L) + ", max dist " + fmt(worst) + ")";
    r.threshold = ">= 90 of 100";
  });
  CriterionResult c7 = guarded(7, "eigenvalue-sandwich", 0.0, [&](CriterionResult& r) {
    if (!c6.error.empty()) throw ConfigError("criterion 6 did not run: " + c6.error);
    const Sandwich b = eigenvalue_sandwich(2.0, 1.0, 0.9, kEps, 100, kEps / (5.0 * std::sqrt(100.0)));
    int checked = 0, inside = 0;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& run : runs) {
      if (run.dist > kEps) continue;
      ++checked;
      inside += run.sigma1_hat >= b.lower && run.sigma1_hat <= b.upper;
      lo = std::min(lo, run.sigma1_hat);
      hi = std::max(hi, run.sigma1_hat);
    }
    r.metric_pass = checked > 0 && inside == checked;
    r.measured = std::to_string(inside) + "/" + std::to_string(checked) + " inside, sigma1_hat in [" +
                 fmt(lo) + ", " + fmt(hi) + "]";
    r.threshold = "all successes within [" + fmt(b.lower) + ", " + fmt(b.upper) + "]";
  });
  return {c6, c7};
}

namespace acceptance_detail {

struct PmCurve {
  std::vector<double> dist;  // dist[l], l = 0..L
  Index eta = 1;
  PmSpectrum spec;
};

// Spiked operator with eigenvalue `top` on a random r-dimensional subspace
// and 1 elsewhere; n = 1000, r = 30.
inline PmCurve spiked_run(std::uint64_t seed, double top, Index eta, double sigma_c, Index L) {
  const Index n = 1000, rank = 30;
  Stream s(seed, "acceptance-spiked");
  const Matrix U = random_basis(n, rank, s);
  const Matrix U0 = qr_orthonormalize(s.gaussian(n, rank)).Q;
  const SpikedOperator A{U, Vector::Constant(rank, top), 1.0};
  Channel ch(sigma_c, seed);
  PmConfig cfg;
  cfg.r = rank;
  cfg.L = L;
  cfg.eta = eta;
  cfg.init = U0;
  cfg.truth = &U;
  const PmResult res = fedoa_pm(std::function<Matrix(const Matrix&)>(A), n, cfg, ch);
  PmCurve c;
  c.eta = eta;
  c.spec = {top, 1.0, sigma_c};
  c.dist.push_back(dist(U, U0));
  for (const PmIterate& it : res.trace) c.dist.push_back(it.dist);
  return c;
}

inline Index first_below(const std::vector<double>& d, double level) {
  for (std::size_t l = 0; l < d.size(); ++l)
    if (d[l] <= level) return static_cast<Index>(l);
  return std::numeric_limits<Index>::max();
}

}  // namespace acceptance_detail

// 8, 9 and 12. Normalization period, eigen-gap and the per-block descent
// bound on the spiked operator.
inline std::vector<CriterionResult> criteria_fedpm_appendix() {
  using namespace acceptance_detail;
  constexpr Index kL = 400;
  constexpr double kR033Top = 1.0 / 0.33;
  std::vector<PmCurve> c8_runs, c9_runs;
  CriterionResult c8 = guarded(8, "eta-robustness", 120.0, [&](CriterionResult& r) {
    const std::vector<std::uint64_t> sd = {1, 2, 3};
    struct Triple {
      PmCurve a, b, c;
    };
    std::vector<Triple> t(sd.size());
    parallel_for(sd.size(), [&](std::size_t i) {
      t[i].a = spiked_run(sd[i], 1.1, 10, 1e-4, kL);
      t[i].b = spiked_run(sd[i], 1.1, 1, 1e-8, kL);
      t[i].c = spiked_run(sd[i], 1.1, 1, 1e-4, kL);
    });
    double a = 0.0, b = 0.0, c = 0.0;
    for (const Triple& x : t) {
      a += x.a.dist.back() / static_cast<double>(t.size());
      b += x.b.dist.back() / static_cast<double>(t.size());
      c += x.c.dist.back() / static_cast<double>(t.size());
      c8_runs.insert(c8_runs.end(), {x.a, x.b, x.c});
    }
    r.metric_pass = a <= 10.0 * b && 100.0 * a <= c;
    r.measured = "final dist (eta=10, 1e-4) " + fmt(a) + ", (eta=1, 1e-8) " + fmt(b) +
                 ", (eta=1, 1e-4) " + fmt(c) + "; ratios " + fmt(a / b) + " and " + fmt(c / a);
    r.threshold = "first <= 10 x second and first <= third / 100";
    r.details = {{"eta10_sc1e-4", a}, {"eta1_sc1e-8", b}, {"eta1_sc1e-4", c}};
  });
  CriterionResult c9 = guarded(9, "eigen-gap", 60.0, [&](CriterionResult& r) {
    std::vector<std::pair<PmCurve, PmCurve>> runs(10);
    parallel_for(runs.size(), [&](std::size_t i) {
      const std::uint64_t seed = 100 + static_cast<std::uint64_t>(i);
      runs[i] = {spiked_run(seed, kR033Top, 1, 1e-8, kL), spiked_run(seed, 1.1, 1, 1e-8, kL)};
    });
    int faster = 0;
    nlohmann::json per_seed = nlohmann::json::array();
    Index worst_fast = 0, best_slow = std::numeric_limits<Index>::max();
    for (const auto& [fast, slow] : runs) {
      const Index a = first_below(fast.dist, 1e-6), b = first_below(slow.dist, 1e-6);
      faster += a < b;
      worst_fast = std::max(worst_fast, a);
      best_slow = std::min(best_slow, b);
      per_seed.push_back({{"R033", a == std::numeric_limits<Index>::max() ? -1 : a},
                          {"R091", b == std::numeric_limits<Index>::max() ? -1 : b}});
      c9_runs.push_back(fast);
      c9_runs.push_back(slow);
    }
    auto show = [](Index v) { return v == std::numeric_limits<Index>::max() ? std::string("never") : std::to_string(v); };
    r.metric_pass = faster == static_cast<int>(runs.size());
    r.measured = "R=0.33 faster in " + std::to_string(faster) + "/10 (slowest R=0.33: " +
                 show(worst_fast) + " iterations, fastest R=0.91: " + show(best_slow) + ")";
    r.threshold = "strictly fewer iterations to dist <= 1e-06 in every seed";
    r.details = {{"iterations", per_seed}};
  });
  CriterionResult c12 = guarded(12, "descent-bound", 0.0, [&](CriterionResult& r) {
    if (!c8.error.empty() || !c9.error.empty()) throw ConfigError("criteria 8-9 did not run");
    Index total = 0, good = 0, infeasible = 0;
    double worst = 0.0;
    for (const auto* set : {&c8_runs, &c9_runs}) {
      for (const PmCurve& c : *set) {
        for (std::size_t l = static_cast<std::size_t>(c.eta); l < c.dist.size();
             l += static_cast<std::size_t>(c.eta)) {
          const DescentBound b = descent_bound(c.dist[l - static_cast<std::size_t>(c.eta)], c.eta, c.spec, 1000, 30);
          if (!b.feasible) {
            ++infeasible;
            continue;
          }
          ++total;
          good += c.dist[l] <= b.value;
          worst = std::max(worst, c.dist[l] / b.value);
        }
      }
    }
    const double frac = total > 0 ? static_cast<double>(good) / static_cast<double>(total) : 0.0;
    r.metric_pass = total > 0 && frac >= 0.95;
    r.measured = std::to_string(good) + "/" + std::to_string(total) + " blocks within the bound (" +
                 std::to_string(infeasible) + " blocks outside its domain, max ratio " + fmt(worst) + ")";
    r.threshold = ">= 95% of blocks";
  });
  return {c8, c9, c12};
}

// 10. Federated tracking noise floor on the rotation configuration.
inline CriterionResult criterion_fed_noise_floor(const VerifyOptions& opt = {}) {
  using namespace acceptance_detail;
  return guarded(10, "fed-noise-floor", 300.0, [&](CriterionResult& r) {
    const double sigma_c = 1e-3;  // variance 1e-6
    const std::vector<std::uint64_t> sd =
        opt.dataset ? std::vector<std::uint64_t>{0} : seeds(0, 3);
    struct Out {
      double plateau = 0, floor = 0, early = 0, late = 0;
    };
    std::vector<Out> out(sd.size());
    parallel_for(sd.size(), [&](std::size_t i) {
      const Dataset ds =
          opt.dataset ? dataset_with_truth(*opt.dataset) : generate_dataset(rotation_model(), sd[i]);
      ExperimentSpec spec = builtin_spec("fig3");
      spec.sigma_c = sigma_c;
      const FedRstTracker tr = fed_track_dataset(ds, harness_detail::fed_config(spec, ds, sd[i]));
      const auto& h = tr.history();
      const std::size_t third = h.size() / 3, start = h.size() - third, mid = start + third / 2;
      for (std::size_t k = start; k < h.size(); ++k) {
        out[i].plateau += h[k].dist / static_cast<double>(third);
        out[i].floor += predicted_noise_floor(ds.config.n, sigma_c, h[k].sigma_r_op) / static_cast<double>(third);
        (k < mid ? out[i].early : out[i].late) += h[k].dist;
      }
      out[i].early /= static_cast<double>(mid - start);
      out[i].late /= static_cast<double>(h.size() - mid);
    });
    bool ok = true;
    double worst_ratio = 1.0, worst_improve = 0.0;
    nlohmann::json per_seed = nlohmann::json::array();
    for (std::size_t i = 0; i < sd.size(); ++i) {
      const double ratio = out[i].plateau / out[i].floor, improve = out[i].early / out[i].late;
      ok = ok && ratio <= 10.0 && ratio >= 0.1 && improve <= 2.0;
      if (std::abs(std::log(ratio)) > std::abs(std::log(worst_ratio))) worst_ratio = ratio;
      worst_improve = std::max(worst_improve, improve);
      per_seed.push_back({{"seed", sd[i]}, {"plateau", out[i].plateau}, {"floor", out[i].floor},
                          {"improvement", improve}});
    }
    r.metric_pass = ok;
    r.measured = "plateau/floor " + fmt(worst_ratio) + " (worst seed), final-third improvement " +
                 fmt(worst_improve) + "x";
    r.threshold = "plateau within 10x of floor; improvement <= 2x";
    r.details = {{"seeds", per_seed}};
  });
}

// 11. Federated robust tracking from an oracle init.
inline CriterionResult criterion_fed_robust(const VerifyOptions& opt = {}) {
  using namespace acceptance_detail;
  return guarded(11, "fed-robust", 300.0, [&](CriterionResult& r) {
    const std::vector<std::uint64_t> sd = seeds(opt.trials, 20);
    struct Out {
      double max_ratio = 0.0;
      double precision = 1.0, recall = 1.0;
    };
    std::vector<Out> out(sd.size());
    parallel_for(sd.size(), [&](std::size_t i) {
      const ModelConfig c = harness_detail::robust_model();
      const Dataset ds = generate_dataset(c, sd[i]);
      FedRstConfig fc;
      fc.K = 4;
      fc.seed = sd[i];
      fc.eps_init = 0.1;
      fc.cs = CsConfig::from_smin(ds.stats.s_min);
      fc.eps_nolev = ds.stats.noise_level;
      fc.delta_tv = ds.stats.delta_tv;
      fc.sigma_c = std::max(ds.stats.noise_level, 1e-3) * c.coef.lambda_minus /
                   (10.0 * std::sqrt(static_cast<double>(c.n)));
      const FedRstTracker tr = fed_track_dataset(ds, fc);
      for (const FedRecord& rec : tr.history()) {
        out[i].max_ratio = std::max(out[i].max_ratio, rec.dist / rec.bound);
        if (std::isfinite(rec.support_precision)) {
          out[i].precision = std::min(out[i].precision, rec.support_precision);
          out[i].recall = std::min(out[i].recall, rec.support_recall);
        }
      }
    });
    int ok = 0;
    double worst = 0.0, precision = 1.0, recall = 1.0;
    for (const Out& o : out) {
      ok += o.max_ratio <= 3.0;
      worst = std::max(worst, o.max_ratio);
      precision = std::min(precision, o.precision);
      recall = std::min(recall, o.recall);
    }
    const double frac = static_cast<double>(ok) / static_cast<double>(sd.size());
    r.metric_pass = frac >= 0.95;
    r.measured = "decay held in " + std::to_string(ok) + "/" + std::to_string(sd.size()) +
                 " seeds (max dist/bound " + fmt(worst) + "; min support precision " + fmt(precision) +
                 ", recall " + fmt(recall) + ")";
    r.threshold = "dist <= 3 x bound for all t in >= 95% of seeds";
  });
}

// 13. Random-init quality at gamma = 10 with the calibrated constant.
inline CriterionResult criterion_random_init() {
  using namespace acceptance_detail;
  return guarded(13, "random-init", 30.0, [](CriterionResult& r) {
    const InitQuality q = random_init_quality_check(50, 3, 10.0, 1000, 2026);
    r.metric_pass = q.success_rate >= 0.9;
    r.measured = "success rate " + fmt(q.success_rate) + " with c0 = " + fmt(q.c0);
    r.threshold = ">= 0.9 over 1000 trials";
  });
}

inline std::vector<std::string> suite_names() {
  return {"linalg-oracles", "decay-bound", "detection",       "modcs-support",
          "fedpm-noiseless", "fedpm-noisy", "fedpm-appendix", "fed-noise-floor",
          "fed-robust",      "random-init", "all"};
}

// Runs a named suite. Unknown suites yield a single ConfigError entry.
inline AcceptanceReport verify(const std::string& suite, const VerifyOptions& opt = {}) {
  AcceptanceReport rep;
  rep.suite = suite;
  auto add = [&](std::vector<CriterionResult> v) {
    rep.results.insert(rep.results.end(), v.begin(), v.end());
  };
  const bool all = suite == "all";
  bool known = all;
  if (all || suite == "linalg-oracles") known = true, add({criterion_linalg_oracles()});
  if (all || suite == "decay-bound") known = true, add({criterion_decay_bound(opt)});
  if (all || suite == "detection") known = true, add({criterion_detection(opt)});
  if (all || suite == "modcs-support") known = true, add({criterion_modcs_support()});
  if (all || suite == "fedpm-noiseless") known = true, add({criterion_fedpm_noiseless()});
  if (all || suite == "fedpm-noisy") known = true, add(criteria_fedpm_noisy());
  if (all || suite == "fedpm-appendix") known = true, add(criteria_fedpm_appendix());
  if (all || suite == "fed-noise-floor") known = true, add({criterion_fed_noise_floor(opt)});
  if (all || suite == "fed-robust") known = true, add({criterion_fed_robust(opt)});
  if (all || suite == "random-init") known = true, add({criterion_random_init()});
  if (!known) {
    CriterionResult r;
    r.name = suite;
    r.error = ConfigError("unknown acceptance suite '" + suite + "'").what();
    rep.results.push_back(r);
  }
  std::sort(rep.results.begin(), rep.results.end(),
            [](const CriterionResult& a, const CriterionResult& b) { return a.id < b.id; });
  return rep;
}

inline std::string format_line(const CriterionResult& r) {
  std::string s = std::string(r.pass() ? "PASS" : "FAIL") + " criterion " + std::to_string(r.id) +
                  " [" + r.name + "]: ";
  if (!r.error.empty()) {
    s += "error: " + r.error;
  } else {
    s += r.measured + " | threshold: " + r.threshold;
  }
  char buf[96];
  if (r.limit_s > 0.0)
    std::snprintf(buf, sizeof buf, " | %.1f s (limit %.0f s%s)", r.elapsed_s, r.limit_s,
                  r.runtime_pass ? "" : ", exceeded");
  else
    std::snprintf(buf, sizeof buf, " | shares runs");
  return s + buf;
}

}  // namespace subtrack

#endif  // SUBTRACK_ACCEPTANCE_HPP_
