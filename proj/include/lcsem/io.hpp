#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lcsem/model.hpp"

namespace lcsem {

/// One row per line, comma separated, "%.17g" so values round-trip exactly.
inline std::string matrix_to_csv(const Matrix& m) {
  std::string out;
  char buf[64];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      if (j > 0) out += ',';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

inline void write_matrix_csv(const std::string& path, const Matrix& m) {
  std::ofstream f(path, std::ios::binary);
  require(f.good(), "write_matrix_csv: cannot open " + path);
  f << matrix_to_csv(m);
  require(f.good(), "write_matrix_csv: write failed for " + path);
}

inline Matrix read_matrix_csv(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), "read_matrix_csv: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t comma = line.find(',', pos);
      std::string cell = line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      require(end != cell.c_str(), "read_matrix_csv: unreadable value '" + cell + "' in " + path);
      row.push_back(v);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (!rows.empty())
      require(row.size() == rows.front().size(), "read_matrix_csv: ragged rows in " + path);
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), "read_matrix_csv: empty file " + path);
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

/// Plain-text descriptor of an experiment system (and optionally of the block
/// sizes / seed of a dataset sampled under it). Indices are 0-based.
inline nlohmann::json system_to_json(const ExperimentSystem& sys,
                                     const std::vector<long>& block_sizes = {},
                                     std::uint64_t seed = 0) {
  nlohmann::json j;
  j["p"] = sys.p;
  j["E"] = sys.size();
  nlohmann::json exps = nlohmann::json::array();
  for (const Experiment& e : sys.experiments) exps.push_back(e.intervened());
  j["experiments"] = exps;
  if (!block_sizes.empty()) j["n_e"] = block_sizes;
  if (seed != 0) j["seed"] = seed;
  return j;
}

inline ExperimentSystem system_from_json(const nlohmann::json& j) {
  require(j.contains("p") && j.contains("experiments"), "system descriptor: missing p/experiments");
  ExperimentSystem sys;
  sys.p = j.at("p").get<int>();
  for (const auto& e : j.at("experiments"))
    sys.experiments.emplace_back(sys.p, e.get<std::vector<int>>());
  sys.check();
  if (j.contains("E"))
    require(j.at("E").get<int>() == sys.size(), "system descriptor: E does not match experiment list");
  return sys;
}

inline void write_system_json(const std::string& path, const ExperimentSystem& sys,
                              const std::vector<long>& block_sizes = {}, std::uint64_t seed = 0) {
  std::ofstream f(path, std::ios::binary);
  require(f.good(), "write_system_json: cannot open " + path);
  f << system_to_json(sys, block_sizes, seed).dump(2) << '\n';
}

inline ExperimentSystem read_system_json(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), "read_system_json: cannot open " + path);
  nlohmann::json j;
  f >> j;
  return system_from_json(j);
}

/// Dataset directory layout: system.json plus one CSV per experiment block,
/// samples_<e>.csv (n_e x p samples) when samples are available, otherwise
/// cov_<e>.csv (p x p empirical covariance).
inline void write_dataset_dir(const std::string& dir, const DatasetBundle& bundle) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_system_json(dir + "/system.json", bundle.system, bundle.block_sizes, bundle.seed);
  for (int e = 0; e < bundle.system.size(); ++e) {
    if (bundle.has_samples())
      write_matrix_csv(dir + "/samples_" + std::to_string(e) + ".csv",
                       bundle.samples[static_cast<std::size_t>(e)]);
    else
      write_matrix_csv(dir + "/cov_" + std::to_string(e) + ".csv",
                       bundle.covariances[static_cast<std::size_t>(e)]);
  }
}

inline DatasetBundle read_dataset_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  require(fs::exists(dir + "/system.json"), "read_dataset_dir: missing " + dir + "/system.json");

  std::ifstream f(dir + "/system.json");
  nlohmann::json j;
  f >> j;
  DatasetBundle bundle;
  bundle.system = system_from_json(j);
  if (j.contains("seed")) bundle.seed = j.at("seed").get<std::uint64_t>();

  const int num_e = bundle.system.size();
  const bool has_samples = fs::exists(dir + "/samples_0.csv");
  for (int e = 0; e < num_e; ++e) {
    if (has_samples) {
      Matrix x = read_matrix_csv(dir + "/samples_" + std::to_string(e) + ".csv");
      require(x.cols() == bundle.system.p, "read_dataset_dir: sample block has wrong width");
      bundle.block_sizes.push_back(x.rows());
      bundle.covariances.push_back(outer_gram(x.transpose()) / static_cast<double>(x.rows()));
      bundle.samples.push_back(std::move(x));
    } else {
      Matrix s = read_matrix_csv(dir + "/cov_" + std::to_string(e) + ".csv");
      require(s.rows() == bundle.system.p && s.cols() == bundle.system.p,
              "read_dataset_dir: covariance has wrong shape");
      bundle.covariances.push_back(symmetrize(s));
      bundle.block_sizes.push_back(0);
    }
  }
  if (j.contains("n_e") && !has_samples) {
    auto ns = j.at("n_e").get<std::vector<long>>();
    if (static_cast<int>(ns.size()) == num_e) bundle.block_sizes = ns;
  }
  bundle.check();
  return bundle;
}

}  // namespace lcsem
