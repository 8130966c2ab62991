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


// Dataset directories: manifest.json plus raw little-endian binaries.
//   Y.f64, Ltilde.f64, A.f64, V.f64   column-major doubles
//   subspaces.f64                      J stacked n x r column-major blocks
//   missing.u64, outlier_support.u64   offsets[d+1] followed by indices
//   outlier_values.f64                 values aligned with outlier_support

#ifndef SUBTRACK_DATASET_IO_HPP_
#define SUBTRACK_DATASET_IO_HPP_

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "subtrack/error.hpp"
#include "subtrack/synth.hpp"

namespace subtrack {

namespace io_detail {

static_assert(std::endian::native == std::endian::little,
              "dataset files are little-endian; add byte swapping for this target");

template <typename T>
void write_raw(const std::filesystem::path& path, const T* data, std::size_t count) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
  if (!out) throw IoError("short write to " + path.string());
}

template <typename T>
std::vector<T> read_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open " + path.string());
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes % sizeof(T) != 0) throw IoError("truncated file " + path.string());
  std::vector<T> out(bytes / sizeof(T));
  in.seekg(0);
  in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
  return out;
}

inline void write_matrix(const std::filesystem::path& path, const Matrix& M) {
  write_raw(path, M.data(), static_cast<std::size_t>(M.size()));
}

inline Matrix read_matrix(const std::filesystem::path& path, Index rows, Index cols) {
  const auto raw = read_raw<double>(path);
  if (raw.size() != static_cast<std::size_t>(rows * cols))
    throw IoError("unexpected size of " + path.string());
  return Eigen::Map<const Matrix>(raw.data(), rows, cols);
}

inline void write_index_lists(const std::filesystem::path& path,
                              const std::vector<IndexSet>& lists) {
  std::vector<std::uint64_t> flat;
  flat.reserve(lists.size() + 1);
  std::uint64_t offset = 0;
  flat.push_back(0);
  for (const auto& l : lists) flat.push_back(offset += l.size());
  for (const auto& l : lists)
    for (Index i : l) flat.push_back(static_cast<std::uint64_t>(i));
  write_raw(path, flat.data(), flat.size());
}

inline std::vector<IndexSet> read_index_lists(const std::filesystem::path& path, Index d) {
  const auto flat = read_raw<std::uint64_t>(path);
  const auto nd = static_cast<std::size_t>(d);
  if (flat.size() < nd + 1 || flat.size() != nd + 1 + flat[nd])
    throw IoError("malformed index list file " + path.string());
  std::vector<IndexSet> out(nd);
  for (std::size_t t = 0; t < nd; ++t)
    for (std::uint64_t k = flat[t]; k < flat[t + 1]; ++k)
      out[t].push_back(static_cast<Index>(flat[nd + 1 + k]));
  return out;
}

}  // namespace io_detail

inline nlohmann::json model_to_json(const ModelConfig& c) {
  nlohmann::json j;
  j["n"] = c.n;
  j["d"] = c.d;
  j["r"] = c.r;
  j["alpha"] = c.alpha;
  j["model"] = c.kind == ChangeKind::kRotation ? "rotation" : "piecewise";
  j["delta"] = c.delta;
  j["skew"] = c.skew == SkewScale::kUnit ? "unit" : "gaussian";
  j["change_batches"] = c.change_batches;
  j["j_star"] = c.j_star;
  j["lambda_minus"] = c.coef.lambda_minus;
  j["lambda_plus"] = c.coef.lambda_plus;
  j["lambda_v_plus"] = c.coef.lambda_v_plus;
  j["r_v"] = c.coef.r_v;
  j["mask"] = {{"mode", c.mask.mode == MaskMode::kBernoulli ? "bernoulli" : "bounded"},
               {"rho", c.mask.rho},
               {"col_frac", c.mask.col_frac},
               {"row_frac", c.mask.row_frac}};
  j["outliers"] = {{"col_frac", c.outlier.col_frac},
                   {"row_frac", c.outlier.row_frac},
                   {"s_min", c.outlier.s_min},
                   {"s_max", c.outlier.s_max},
                   {"clean_first_batch", c.outlier.clean_first_batch}};
  return j;
}

inline ModelConfig model_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.n = j.value("n", c.n);
    c.d = j.value("d", c.d);
    c.r = j.value("r", c.r);
    c.alpha = j.value("alpha", c.alpha);
    const std::string model = j.value("model", std::string("rotation"));
    if (model != "rotation" && model != "piecewise") throw ConfigError("unknown model " + model);
    c.kind = model == "rotation" ? ChangeKind::kRotation : ChangeKind::kPiecewise;
    c.delta = j.value("delta", c.delta);
    const std::string skew = j.value("skew", std::string("unit"));
    if (skew != "unit" && skew != "gaussian") throw ConfigError("unknown skew scale " + skew);
    c.skew = skew == "unit" ? SkewScale::kUnit : SkewScale::kGaussian;
    c.change_batches = j.value("change_batches", c.change_batches);
    c.j_star = j.value("j_star", c.j_star);
    c.coef.lambda_minus = j.value("lambda_minus", c.coef.lambda_minus);
    c.coef.lambda_plus = j.value("lambda_plus", c.coef.lambda_plus);
    c.coef.lambda_v_plus = j.value("lambda_v_plus", c.coef.lambda_v_plus);
    c.coef.r_v = j.value("r_v", c.coef.r_v);
    if (j.contains("mask")) {
      const auto& m = j["mask"];
      const std::string mode = m.value("mode", std::string("bernoulli"));
      if (mode != "bernoulli" && mode != "bounded") throw ConfigError("unknown mask mode " + mode);
      c.mask.mode = mode == "bernoulli" ? MaskMode::kBernoulli : MaskMode::kBounded;
      c.mask.rho = m.value("rho", c.mask.rho);
      c.mask.col_frac = m.value("col_frac", c.mask.col_frac);
      c.mask.row_frac = m.value("row_frac", c.mask.row_frac);
    }
    if (j.contains("outliers")) {
      const auto& o = j["outliers"];
      c.outlier.col_frac = o.value("col_frac", c.outlier.col_frac);
      c.outlier.row_frac = o.value("row_frac", c.outlier.row_frac);
      c.outlier.s_min = o.value("s_min", c.outlier.s_min);
      c.outlier.s_max = o.value("s_max", c.outlier.s_max);
      c.outlier.clean_first_batch = o.value("clean_first_batch", c.outlier.clean_first_batch);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(e.what());
  }
  c.mask.alpha = c.alpha;
  c.outlier.alpha = c.alpha;
  return c;
}

inline nlohmann::json stats_to_json(const DatasetStats& s) {
  return {{"lambda_plus", s.lambda_plus},     {"lambda_minus", s.lambda_minus},
          {"f", s.f},                         {"lambda_v_plus", s.lambda_v_plus},
          {"noise_level", s.noise_level},     {"delta_tv", s.delta_tv},
          {"delta_large", s.delta_large},     {"missing_frac", s.missing_frac},
          {"max_miss_col_frac", s.max_miss_col_frac},
          {"max_miss_row_frac", s.max_miss_row_frac},
          {"max_out_col_frac", s.max_out_col_frac},
          {"max_out_row_frac", s.max_out_row_frac},
          {"s_min", s.s_min},                 {"max_coef_norm2", s.max_coef_norm2},
          {"max_resid_norm2", s.max_resid_norm2},
          {"audit_pass", s.audit_pass},       {"audit_notes", s.audit_notes}};
}

inline DatasetStats stats_from_json(const nlohmann::json& j) {
  DatasetStats s;
  s.lambda_plus = j.at("lambda_plus");
  s.lambda_minus = j.at("lambda_minus");
  s.f = j.at("f");
  s.lambda_v_plus = j.at("lambda_v_plus");
  s.noise_level = j.at("noise_level");
  s.delta_tv = j.at("delta_tv");
  s.delta_large = j.at("delta_large");
  s.missing_frac = j.at("missing_frac");
  s.max_miss_col_frac = j.at("max_miss_col_frac");
  s.max_miss_row_frac = j.at("max_miss_row_frac");
  s.max_out_col_frac = j.at("max_out_col_frac");
  s.max_out_row_frac = j.at("max_out_row_frac");
  s.s_min = j.at("s_min");
  s.max_coef_norm2 = j.at("max_coef_norm2");
  s.max_resid_norm2 = j.at("max_resid_norm2");
  s.audit_pass = j.at("audit_pass");
  s.audit_notes = j.at("audit_notes").get<std::vector<std::string>>();
  return s;
}

inline void export_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  using namespace io_detail;
  fs::create_directories(dir);
  const ModelConfig& c = ds.config;
  nlohmann::json manifest;
  manifest["schema"] = "subtrack-dataset/1";
  manifest["seed"] = ds.seed;
  manifest["model"] = model_to_json(c);
  manifest["stats"] = stats_to_json(ds.stats);
  manifest["num_batches"] = ds.P.size();
  manifest["files"] = {"Y.f64", "Ltilde.f64", "A.f64", "V.f64", "subspaces.f64",
                       "missing.u64", "outlier_support.u64", "outlier_values.f64"};
  write_matrix(dir / "Y.f64", ds.Y);
  write_matrix(dir / "Ltilde.f64", ds.Ltilde);
  write_matrix(dir / "A.f64", ds.A);
  write_matrix(dir / "V.f64", ds.V);
  std::vector<double> subs;
  subs.reserve(ds.P.size() * static_cast<std::size_t>(c.n * c.r));
  for (const Matrix& P : ds.P) subs.insert(subs.end(), P.data(), P.data() + P.size());
  write_raw(dir / "subspaces.f64", subs.data(), subs.size());
  write_index_lists(dir / "missing.u64", ds.missing);
  write_index_lists(dir / "outlier_support.u64", ds.outliers.support);
  std::vector<double> vals;
  for (const Vector& v : ds.outliers.values) vals.insert(vals.end(), v.data(), v.data() + v.size());
  write_raw(dir / "outlier_values.f64", vals.data(), vals.size());
  const fs::path tmp = dir / "manifest.json.tmp";
  {
    std::ofstream out(tmp);
    out << manifest.dump(2) << "\n";
  }
  fs::rename(tmp, dir / "manifest.json");
}

inline Dataset import_dataset(const std::filesystem::path& dir) {
  using namespace io_detail;
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("missing manifest in " + dir.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad manifest: ") + e.what());
  }
  if (manifest.value("schema", std::string()) != "subtrack-dataset/1")
    throw SchemaError("unsupported dataset schema");
  Dataset ds;
  ds.config = model_from_json(manifest.at("model"));
  ds.seed = manifest.at("seed").get<std::uint64_t>();
  ds.stats = stats_from_json(manifest.at("stats"));
  const ModelConfig& c = ds.config;
  ds.Y = read_matrix(dir / "Y.f64", c.n, c.d);
  ds.Ltilde = read_matrix(dir / "Ltilde.f64", c.n, c.d);
  ds.A = read_matrix(dir / "A.f64", c.r, c.d);
  ds.V = read_matrix(dir / "V.f64", c.n, c.d);
  const auto J = manifest.at("num_batches").get<std::size_t>();
  const auto subs = read_raw<double>(dir / "subspaces.f64");
  const auto block = static_cast<std::size_t>(c.n * c.r);
  if (subs.size() != J * block) throw IoError("unexpected size of subspaces.f64");
  for (std::size_t j = 0; j < J; ++j)
    ds.P.push_back(Eigen::Map<const Matrix>(subs.data() + j * block, c.n, c.r));
  ds.missing = read_index_lists(dir / "missing.u64", c.d);
  ds.outliers.support = read_index_lists(dir / "outlier_support.u64", c.d);
  const auto vals = read_raw<double>(dir / "outlier_values.f64");
  std::size_t pos = 0;
  for (const IndexSet& s : ds.outliers.support) {
    if (pos + s.size() > vals.size()) throw IoError("outlier values truncated");
    ds.outliers.values.push_back(
        Eigen::Map<const Vector>(vals.data() + pos, static_cast<Index>(s.size())));
    pos += s.size();
  }
  return ds;
}

}  // namespace subtrack

#endif  // SUBTRACK_DATASET_IO_HPP_
