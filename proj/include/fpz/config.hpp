#pragma once
// Experiment configuration: one JSON document describing the drift system,
// the training run, the Monte Carlo baseline, quadrature resolution, and
// analysis settings. Parsing is strict — unknown keys anywhere in the tree
// are rejected so typos fail loudly instead of silently keeping defaults.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fpz/systems.hpp"
#include "fpz/trainer.hpp"

namespace fpz::cfg {

// system block: selects the drift field and its parameters.
struct SystemConfig {
  std::string name;                 // ring | lorenz63 | thomas | hypersphere
  int dim = 0;                      // 0 → per-family default (ring 2, lorenz63/thomas 3, hypersphere 10)
  std::optional<double> diffusion;  // default 1.0, except lorenz63 where it is 50.0
  std::optional<std::vector<double>> domain_lo;  // interest-box override, length dim
  std::optional<std::vector<double>> domain_hi;
  std::optional<double> b;                 // thomas only
  std::optional<double> alpha, beta, rho;  // lorenz63 only
};

struct McConfig {
  std::int64_t particles = 1'000'000;
  double h = 0.01;
  std::int64_t steps = 1000;  // final time = steps · h
  int bins = 100;             // histogram bins per axis
};

struct QuadConfig {
  int subintervals = 60;  // composite subintervals per axis
  int points = 8;         // Gauss–Legendre nodes per subinterval
};

struct AnalysisConfig {
  int sup_bins = 200;      // per-axis resolution of sup-distance scans
  int density_bins = 100;  // per-axis resolution of exported density tables
  std::int64_t eval_every = 1000;  // checkpoint cadence for loss/distance correlation
  std::optional<std::pair<int, int>> slice_axes;  // 2D slice axes when dim > 3
};

struct ExperimentConfig {
  SystemConfig system;
  train::TrainConfig train;  // seed/out_dir/arch.input_dim filled from the top level
  McConfig mc;
  QuadConfig quadrature;
  AnalysisConfig analysis;
  std::string out_dir = "out";
  std::uint64_t seed = 1;
};

// Parse a JSON document; `source` names the file in diagnostics. Throws
// std::runtime_error with a message naming the offending field for unknown
// keys, wrong types, missing required fields, and out-of-range values.
ExperimentConfig parse_config(const std::string& json_text,
                              const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

// Materialize the drift system the config describes: family defaults,
// parameter overrides, interest-box override.
sys::DriftSystem build_system(const SystemConfig& sc);

// A commented example document stating every key and its default.
std::string schema_text();

}  // namespace fpz::cfg
