#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ngd/data_gen.hpp"
#include "ngd/diagnostics.hpp"
#include "ngd/model_kind.hpp"
#include "ngd/ngd_engine.hpp"
#include "ngd/spectral.hpp"

namespace ngd::experiment {

enum class TopologyKind { central_client, circle, fixed_degree };

std::string to_string(TopologyKind kind);
TopologyKind topology_kind_from_string(const std::string& s);

struct ExperimentConfig {
  ModelKind model = ModelKind::linear;
  std::int64_t n_total = 10000;
  int m_clients = 200;
  TopologyKind topology = TopologyKind::circle;
  int degree = 1;
  std::vector<double> alpha_list;
  datagen::Pattern pattern = datagen::Pattern::heterogeneous;
  int replicates = 100;
  std::int64_t iterations = 0;  // 0 => per-model default
  std::uint64_t base_seed = 42;
  std::int64_t record_every = 10;
  int p_override = 0;     // linear only; switches to the i.i.d. generator
  double noise_sd = 1.0;  // linear only

  void validate() const;
  std::int64_t effective_iterations() const;
  // Fixed key order; the digest input and the config.txt payload.
  std::string canonical_text() const;
  std::string digest() const;
};

// Flat key = value text, '#' comments. Unknown keys are errors.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

// The learning rates §3.4 fixes per model for the degree sweep.
double sweep_alpha_for(ModelKind model);
std::int64_t sweep_iterations_for(ModelKind model);

struct ReplicateAlphaOutcome {
  engine::Trajectory trajectory;  // empty rows when diverged
  bool diverged = false;
  std::int64_t diverged_at = -1;
};

struct ReplicateOutcome {
  int replicate = 0;
  std::uint64_t seed = 0;
  double global_log_mse = 0.0;  // ln ||theta_ge - theta0||^2
  std::string topology_hash;
  std::vector<ReplicateAlphaOutcome> per_alpha;
};

struct AlphaMeta {
  double alpha = 0.0;
  double max_stable_lr = 0.0;
  engine::SpectralEstimate radius;
  diagnostics::HeterogeneityStats heterogeneity;
  std::optional<diagnostics::ErrorBoundReport> bound;  // replicate 0, when it completed
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<ReplicateOutcome> replicates;
  std::vector<AlphaMeta> alpha_meta;
  topology::BalanceStats balance;  // replicate 0 topology
  bool strongly_connected = false;

  // Median over completed replicates of the final-snapshot log MSE.
  double final_median_log_mse(std::size_t alpha_index) const;
  double final_median_discrepancy(std::size_t alpha_index) const;
  double median_global_log_mse() const;
};

ExperimentResult run_experiment(const ExperimentConfig& config, int workers);

// Writes config.txt, meta.json, aggregate.csv, finals.csv and the
// per-replicate trajectory files under `outdir`.
void write_experiment(const ExperimentResult& result, const std::filesystem::path& outdir);

struct SweepEntry {
  int degree = 0;
  ExperimentResult result;
};

struct SweepResult {
  ExperimentConfig base;
  std::vector<SweepEntry> per_degree;
};

SweepResult run_sweep_degree(const ExperimentConfig& config, const std::vector<int>& degrees,
                             int workers);
void write_sweep(const SweepResult& sweep, const std::filesystem::path& outdir);

// Instance-level diagnostics on the replicate-0 data without running NGD.
std::string diagnose_json(const ExperimentConfig& config);

// Writes dataset.txt / partition.txt; returns the dataset content digest.
std::string write_gen_data(const ExperimentConfig& config, const std::filesystem::path& outdir);

// Merges run and sweep outputs into per-figure tables (curves.csv,
// degree_table.csv). Throws SchemaError on version mismatches.
void write_report(const std::vector<std::filesystem::path>& inputs,
                  const std::filesystem::path& outdir);

}  // namespace ngd::experiment
