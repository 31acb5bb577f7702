#include "ngd/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ngd/errors.hpp"
#include "ngd/util.hpp"

namespace ngd::experiment {

namespace {

// sub-stream tags so one replicate seed never reuses a raw stream
constexpr std::uint64_t kDataTag = 1;
constexpr std::uint64_t kPartitionTag = 2;
constexpr std::uint64_t kPlacementTag = 3;
constexpr std::uint64_t kTopologyTag = 4;

constexpr const char* kTrajectorySchema = "ngd.trajectory.v1";
constexpr const char* kFinalsSchema = "ngd.finals.v1";
constexpr const char* kAggregateSchema = "ngd.aggregate.v1";
constexpr const char* kMetaSchema = "ngd.run-meta.v1";
constexpr const char* kSweepSchema = "ngd.degree-sweep.v1";
constexpr const char* kCurvesSchema = "ngd.report-curves.v1";
constexpr const char* kDiagnoseSchema = "ngd.diagnose.v1";

std::string fmt(double v) { return util::format_double(v); }

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw IoError("write failed: " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string schema_header(const std::string& schema, const std::string& digest) {
  return "# schema=" + schema + " config=" + digest + "\n";
}

void check_schema_line(const std::string& line, const std::string& expected,
                       const std::filesystem::path& path) {
  std::string prefix = "# schema=" + expected + " ";
  if (line.rfind(prefix, 0) != 0) {
    std::string found = line.substr(0, line.find(' ', 9));
    if (line.rfind("# schema=", 0) == 0) found = line.substr(9, line.find(' ', 9) - 9);
    throw SchemaError(expected, found + " (" + path.string() + ")");
  }
}

}  // namespace

std::string to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::central_client: return "central_client";
    case TopologyKind::circle: return "circle";
    case TopologyKind::fixed_degree: return "fixed_degree";
  }
  throw InvalidArgumentError("unknown topology kind");
}

TopologyKind topology_kind_from_string(const std::string& s) {
  if (s == "central_client") return TopologyKind::central_client;
  if (s == "circle") return TopologyKind::circle;
  if (s == "fixed_degree") return TopologyKind::fixed_degree;
  throw ConfigError("unknown topology: '" + s + "'");
}

void ExperimentConfig::validate() const {
  if (m_clients < 2) throw ConfigError("m_clients must be >= 2");
  if (n_total < 1) throw ConfigError("n_total must be >= 1");
  if (n_total % m_clients != 0) throw ConfigError("m_clients must divide n_total");
  if (alpha_list.empty()) throw ConfigError("alpha_list must not be empty");
  for (double a : alpha_list)
    if (!(a > 0.0)) throw ConfigError("all learning rates must be > 0");
  if (replicates < 1) throw ConfigError("replicates must be >= 1");
  if (record_every < 1) throw ConfigError("record_every must be >= 1");
  if (iterations < 0) throw ConfigError("iterations must be >= 0");
  if (topology != TopologyKind::central_client && (degree < 1 || degree > m_clients - 1))
    throw ConfigError("degree must satisfy 1 <= D <= M-1");
  if (p_override < 0) throw ConfigError("p_override must be >= 0");
  if (p_override > 0 && model != ModelKind::linear)
    throw ConfigError("p_override is only supported for the linear model");
  if (noise_sd < 0.0) throw ConfigError("noise_sd must be >= 0");
}

std::int64_t ExperimentConfig::effective_iterations() const {
  if (iterations > 0) return iterations;
  switch (model) {
    case ModelKind::linear: return 8000;
    case ModelKind::logistic: return 4000;
    case ModelKind::poisson: return 8000;
  }
  return 8000;
}

std::string ExperimentConfig::canonical_text() const {
  std::ostringstream out;
  out << "model = " << ngd::to_string(model) << "\n";
  out << "n_total = " << n_total << "\n";
  out << "m_clients = " << m_clients << "\n";
  out << "topology = " << experiment::to_string(topology) << "\n";
  out << "degree = " << degree << "\n";
  out << "alpha_list = ";
  for (std::size_t i = 0; i < alpha_list.size(); ++i) out << (i ? "," : "") << fmt(alpha_list[i]);
  out << "\n";
  out << "pattern = " << datagen::to_string(pattern) << "\n";
  out << "replicates = " << replicates << "\n";
  out << "iterations = " << effective_iterations() << "\n";
  out << "base_seed = " << base_seed << "\n";
  out << "record_every = " << record_every << "\n";
  out << "p_override = " << p_override << "\n";
  out << "noise_sd = " << fmt(noise_sd) << "\n";
  return out.str();
}

std::string ExperimentConfig::digest() const { return util::hex64(util::fnv1a(canonical_text())); }

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<double> parse_double_list(const std::string& value) {
  std::vector<double> out;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = std::stod(item, &used);
    if (used != item.size()) throw ConfigError("malformed number in list: '" + item + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig config;
  bool saw_model = false, saw_alpha = false;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    try {
      if (key == "model") {
        config.model = model_kind_from_string(value);
        saw_model = true;
      } else if (key == "n_total") {
        config.n_total = std::stoll(value);
      } else if (key == "m_clients") {
        config.m_clients = std::stoi(value);
      } else if (key == "topology") {
        config.topology = topology_kind_from_string(value);
      } else if (key == "degree") {
        config.degree = std::stoi(value);
      } else if (key == "alpha_list") {
        config.alpha_list = parse_double_list(value);
        saw_alpha = true;
      } else if (key == "pattern") {
        config.pattern = datagen::pattern_from_string(value);
      } else if (key == "replicates") {
        config.replicates = std::stoi(value);
      } else if (key == "iterations") {
        config.iterations = std::stoll(value);
      } else if (key == "base_seed") {
        config.base_seed = std::stoull(value);
      } else if (key == "record_every") {
        config.record_every = std::stoll(value);
      } else if (key == "p_override") {
        config.p_override = std::stoi(value);
      } else if (key == "noise_sd") {
        config.noise_sd = std::stod(value);
      } else {
        throw ConfigError("unknown config key '" + key + "'");
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const InvalidArgumentError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const std::exception&) {
      throw ConfigError("line " + std::to_string(line_no) + ": malformed value for '" + key + "'");
    }
  }
  if (!saw_model) throw ConfigError("config is missing 'model'");
  if (!saw_alpha) throw ConfigError("config is missing 'alpha_list'");
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config_text(read_file(path));
}

double sweep_alpha_for(ModelKind model) {
  switch (model) {
    case ModelKind::linear: return 2e-3;
    case ModelKind::logistic: return 2e-2;
    case ModelKind::poisson: return 2e-4;
  }
  throw InvalidArgumentError("unknown model kind");
}

std::int64_t sweep_iterations_for(ModelKind model) {
  switch (model) {
    case ModelKind::linear: return 12000;
    case ModelKind::logistic: return 4000;
    case ModelKind::poisson: return 8000;
  }
  throw InvalidArgumentError("unknown model kind");
}

namespace {

datagen::Dataset generate_dataset(const ExperimentConfig& config, std::uint64_t data_seed) {
  if (config.p_override > 0)
    return datagen::gen_linear_iid(config.n_total, config.p_override, data_seed, config.noise_sd);
  switch (config.model) {
    case ModelKind::linear: return datagen::gen_linear(config.n_total, data_seed, config.noise_sd);
    case ModelKind::logistic: return datagen::gen_logistic(config.n_total, data_seed);
    case ModelKind::poisson: return datagen::gen_poisson(config.n_total, data_seed);
  }
  throw InvalidArgumentError("unknown model kind");
}

datagen::Partition make_partition(const ExperimentConfig& config, const datagen::Dataset& dataset,
                                  std::uint64_t replicate_seed) {
  if (config.pattern == datagen::Pattern::homogeneous)
    return datagen::partition_homogeneous(dataset, config.m_clients,
                                          util::derive_seed(replicate_seed, kPartitionTag));
  return datagen::partition_heterogeneous(dataset, config.m_clients);
}

topology::AdjacencyMatrix build_topology(const ExperimentConfig& config,
                                         std::uint64_t replicate_seed) {
  switch (config.topology) {
    case TopologyKind::central_client: return topology::build_central_client(config.m_clients);
    case TopologyKind::circle: return topology::build_circle(config.m_clients, config.degree);
    case TopologyKind::fixed_degree:
      return topology::build_fixed_degree(config.m_clients, config.degree,
                                          util::derive_seed(replicate_seed, kTopologyTag));
  }
  throw InvalidArgumentError("unknown topology kind");
}

// Shards are placed onto clients through a seeded permutation so the
// heterogeneous sorted blocks are not laid out along the topology's index
// order (which would couple the data profile to the graph's slow modes).
std::vector<loss::Shard> placed_shards(const datagen::Dataset& dataset,
                                       const datagen::Partition& partition,
                                       std::uint64_t replicate_seed) {
  std::vector<loss::Shard> shards = loss::make_shards(dataset, partition);
  std::vector<std::size_t> order(shards.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  util::Rng rng(util::derive_seed(replicate_seed, kPlacementTag));
  rng.shuffle(order);
  std::vector<loss::Shard> placed;
  placed.reserve(shards.size());
  for (std::size_t i = 0; i < order.size(); ++i) placed.push_back(std::move(shards[order[i]]));
  return placed;
}

struct ReplicateInstance {
  datagen::Dataset dataset;
  loss::LossModel model;
  topology::AdjacencyMatrix adjacency;
  topology::WeightMatrix weights;
  loss::GlobalEstimate global;
};

ReplicateInstance build_instance(const ExperimentConfig& config, std::uint64_t replicate_seed) {
  datagen::Dataset dataset =
      generate_dataset(config, util::derive_seed(replicate_seed, kDataTag));
  datagen::Partition partition = make_partition(config, dataset, replicate_seed);
  loss::LossModel model(dataset.kind, placed_shards(dataset, partition, replicate_seed));
  topology::AdjacencyMatrix adjacency = build_topology(config, replicate_seed);
  topology::WeightMatrix weights = topology::to_weight_matrix(adjacency);
  loss::GlobalEstimate global = loss::global_estimator(dataset.kind, dataset);
  return ReplicateInstance{std::move(dataset), std::move(model), std::move(adjacency),
                           std::move(weights), std::move(global)};
}

}  // namespace

double ExperimentResult::final_median_log_mse(std::size_t alpha_index) const {
  std::vector<double> finals;
  for (const auto& rep : replicates) {
    const auto& outcome = rep.per_alpha[alpha_index];
    if (!outcome.diverged && !outcome.trajectory.rows.empty())
      finals.push_back(outcome.trajectory.rows.back().log_mse);
  }
  return util::median(finals);
}

double ExperimentResult::final_median_discrepancy(std::size_t alpha_index) const {
  std::vector<double> finals;
  for (const auto& rep : replicates) {
    const auto& outcome = rep.per_alpha[alpha_index];
    if (!outcome.diverged && !outcome.trajectory.rows.empty())
      finals.push_back(outcome.trajectory.rows.back().discrepancy_to_global);
  }
  return util::median(finals);
}

double ExperimentResult::median_global_log_mse() const {
  std::vector<double> values;
  for (const auto& rep : replicates) values.push_back(rep.global_log_mse);
  return util::median(values);
}

ExperimentResult run_experiment(const ExperimentConfig& config, int workers) {
  config.validate();
  ExperimentResult result;
  result.config = config;
  result.replicates.resize(static_cast<std::size_t>(config.replicates));

  std::int64_t iterations = config.effective_iterations();

  util::parallel_for(config.replicates, workers, [&](std::int64_t r) {
    std::uint64_t replicate_seed = config.base_seed + static_cast<std::uint64_t>(r);
    ReplicateInstance instance = build_instance(config, replicate_seed);

    ReplicateOutcome outcome;
    outcome.replicate = static_cast<int>(r);
    outcome.seed = replicate_seed;
    outcome.global_log_mse =
        std::log((instance.global.theta - instance.dataset.theta0).squaredNorm());
    outcome.topology_hash =
        util::hex64(util::fnv1a(topology::edge_list_string(instance.adjacency)));

    engine::RunRefs refs;
    refs.theta0 = instance.dataset.theta0;
    refs.theta_ge = instance.global.theta;

    for (double alpha : config.alpha_list) {
      engine::RunConfig run_config;
      run_config.alpha = alpha;
      run_config.max_iterations = iterations;
      run_config.record_every = config.record_every;
      ReplicateAlphaOutcome per_alpha;
      try {
        per_alpha.trajectory = engine::run(instance.model, instance.weights, run_config, refs);
      } catch (const DivergedError& e) {
        per_alpha.diverged = true;
        per_alpha.diverged_at = e.iteration();
      }
      outcome.per_alpha.push_back(std::move(per_alpha));
    }
    result.replicates[static_cast<std::size_t>(r)] = std::move(outcome);
  });

  // replicate-0 instance metadata (deterministic rebuild, main thread)
  ReplicateInstance instance = build_instance(config, config.base_seed);
  result.balance = topology::balance_stats(instance.weights);
  result.strongly_connected = topology::is_strongly_connected(instance.adjacency);
  std::vector<Eigen::MatrixXd> curvatures =
      loss::local_curvatures(instance.model, instance.global.theta);
  double stable_lr = loss::max_stable_lr(curvatures);
  for (std::size_t a = 0; a < config.alpha_list.size(); ++a) {
    AlphaMeta meta;
    meta.alpha = config.alpha_list[a];
    meta.max_stable_lr = stable_lr;
    meta.radius =
        engine::contraction_radius_detailed(curvatures, instance.weights, meta.alpha);
    meta.heterogeneity = diagnostics::heterogeneity(instance.model, instance.dataset.theta0);
    const auto& rep0 = result.replicates.front().per_alpha[a];
    if (!rep0.diverged)
      meta.bound = diagnostics::bound_report(instance.model, instance.weights, meta.alpha,
                                             rep0.trajectory, instance.global.theta,
                                             instance.dataset.theta0);
    result.alpha_meta.push_back(std::move(meta));
  }
  return result;
}

namespace {

std::string trajectory_csv(const engine::Trajectory& trajectory, const std::string& digest,
                           bool diverged, std::int64_t diverged_at) {
  std::ostringstream out;
  out << schema_header(kTrajectorySchema, digest);
  out << "iteration,mse,log_mse,discrepancy_to_global,consensus_spread\n";
  if (diverged) out << "# diverged_at=" << diverged_at << "\n";
  for (const auto& row : trajectory.rows)
    out << row.iteration << "," << fmt(row.mse) << "," << fmt(row.log_mse) << ","
        << fmt(row.discrepancy_to_global) << "," << fmt(row.consensus_spread) << "\n";
  return out.str();
}

std::string finals_csv(const ExperimentResult& result) {
  std::ostringstream out;
  out << schema_header(kFinalsSchema, result.config.digest());
  out << "alpha,replicate,seed,final_iteration,final_log_mse,final_discrepancy_to_global,"
         "global_log_mse,diverged,diverged_at\n";
  for (std::size_t a = 0; a < result.config.alpha_list.size(); ++a) {
    for (const auto& rep : result.replicates) {
      const auto& outcome = rep.per_alpha[a];
      out << fmt(result.config.alpha_list[a]) << "," << rep.replicate << "," << rep.seed << ",";
      if (outcome.diverged) {
        out << "nan,nan,nan," << fmt(rep.global_log_mse) << ",1," << outcome.diverged_at << "\n";
      } else {
        const auto& last = outcome.trajectory.rows.back();
        out << last.iteration << "," << fmt(last.log_mse) << ","
            << fmt(last.discrepancy_to_global) << "," << fmt(rep.global_log_mse) << ",0,-1\n";
      }
    }
  }
  return out.str();
}

std::string aggregate_csv(const ExperimentResult& result) {
  std::ostringstream out;
  out << schema_header(kAggregateSchema, result.config.digest());
  out << "alpha,iteration,median_log_mse,median_discrepancy_to_global,median_global_log_mse,"
         "completed,diverged\n";
  for (std::size_t a = 0; a < result.config.alpha_list.size(); ++a) {
    // completed replicates share one snapshot grid (fixed budgets)
    const engine::Trajectory* grid = nullptr;
    int completed = 0, diverged = 0;
    for (const auto& rep : result.replicates) {
      if (rep.per_alpha[a].diverged) {
        ++diverged;
      } else {
        ++completed;
        if (!grid) grid = &rep.per_alpha[a].trajectory;
      }
    }
    if (!grid) continue;
    std::vector<double> global_values;
    for (const auto& rep : result.replicates)
      if (!rep.per_alpha[a].diverged) global_values.push_back(rep.global_log_mse);
    double median_global = util::median(global_values);
    for (std::size_t s = 0; s < grid->rows.size(); ++s) {
      std::vector<double> log_mses, discrepancies;
      for (const auto& rep : result.replicates) {
        const auto& outcome = rep.per_alpha[a];
        if (outcome.diverged) continue;
        log_mses.push_back(outcome.trajectory.rows[s].log_mse);
        discrepancies.push_back(outcome.trajectory.rows[s].discrepancy_to_global);
      }
      out << fmt(result.config.alpha_list[a]) << "," << grid->rows[s].iteration << ","
          << fmt(util::median(log_mses)) << "," << fmt(util::median(discrepancies)) << ","
          << fmt(median_global) << "," << completed << "," << diverged << "\n";
    }
  }
  return out.str();
}

nlohmann::json balance_json(const topology::BalanceStats& balance) {
  return nlohmann::json{{"se2_w", balance.se2_w},
                        {"sigma_max_w", balance.sigma_max_w},
                        {"sigma_min_I_minus_w", balance.sigma_min_I_minus_w},
                        {"rho", balance.rho}};
}

nlohmann::json hetero_json(const diagnostics::HeterogeneityStats& h) {
  return nlohmann::json{{"se_sxx", h.se_sxx}, {"se_sxy", h.se_sxy}, {"se_grad0", h.se_grad0}};
}

nlohmann::json config_json(const ExperimentConfig& config) {
  return nlohmann::json{{"model", ngd::to_string(config.model)},
                        {"n_total", config.n_total},
                        {"m_clients", config.m_clients},
                        {"topology", to_string(config.topology)},
                        {"degree", config.degree},
                        {"alpha_list", config.alpha_list},
                        {"pattern", datagen::to_string(config.pattern)},
                        {"replicates", config.replicates},
                        {"iterations", config.effective_iterations()},
                        {"base_seed", config.base_seed},
                        {"record_every", config.record_every},
                        {"p_override", config.p_override},
                        {"noise_sd", config.noise_sd}};
}

std::string meta_json(const ExperimentResult& result) {
  nlohmann::json j;
  j["schema"] = kMetaSchema;
  j["config_digest"] = result.config.digest();
  j["config"] = config_json(result.config);
  j["prng"] = util::kPrngId;
  j["balance"] = balance_json(result.balance);
  j["strongly_connected"] = result.strongly_connected;
  std::vector<std::uint64_t> seeds;
  for (const auto& rep : result.replicates) seeds.push_back(rep.seed);
  j["seeds"] = seeds;
  if (result.config.topology == TopologyKind::fixed_degree) {
    j["topology_redrawn_per_replicate"] = true;
    std::vector<std::string> hashes;
    for (const auto& rep : result.replicates) hashes.push_back(rep.topology_hash);
    j["topology_hashes"] = hashes;
  } else {
    j["topology_redrawn_per_replicate"] = false;
    j["topology_hash"] = result.replicates.front().topology_hash;
  }
  nlohmann::json alphas = nlohmann::json::array();
  for (const auto& meta : result.alpha_meta) {
    nlohmann::json a;
    a["alpha"] = meta.alpha;
    a["max_stable_lr"] = meta.max_stable_lr;
    a["spectral_radius"] = nlohmann::json{{"value", meta.radius.radius},
                                          {"method", meta.radius.method},
                                          {"converged", meta.radius.converged}};
    a["heterogeneity"] = hetero_json(meta.heterogeneity);
    if (meta.bound)
      a["bound_report"] = nlohmann::json::parse(diagnostics::bound_report_json(*meta.bound));
    alphas.push_back(a);
  }
  j["alphas"] = alphas;
  return j.dump(2) + "\n";
}

std::string alpha_dir_name(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "alpha_%03zu", index);
  return buf;
}

std::string rep_file_name(int replicate) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "rep_%04d.csv", replicate);
  return buf;
}

}  // namespace

void write_experiment(const ExperimentResult& result, const std::filesystem::path& outdir) {
  std::error_code ec;
  std::filesystem::create_directories(outdir, ec);
  if (ec) throw IoError("cannot create output directory " + outdir.string());
  std::string digest = result.config.digest();

  write_file(outdir / "config.txt", result.config.canonical_text());
  write_file(outdir / "meta.json", meta_json(result));
  write_file(outdir / "aggregate.csv", aggregate_csv(result));
  write_file(outdir / "finals.csv", finals_csv(result));

  for (std::size_t a = 0; a < result.config.alpha_list.size(); ++a) {
    std::filesystem::path adir = outdir / "replicates" / alpha_dir_name(a);
    std::filesystem::create_directories(adir, ec);
    if (ec) throw IoError("cannot create output directory " + adir.string());
    for (const auto& rep : result.replicates) {
      const auto& outcome = rep.per_alpha[a];
      write_file(adir / rep_file_name(rep.replicate),
                 trajectory_csv(outcome.trajectory, digest, outcome.diverged,
                                outcome.diverged_at));
    }
  }
}

SweepResult run_sweep_degree(const ExperimentConfig& config, const std::vector<int>& degrees,
                             int workers) {
  if (degrees.empty()) throw ConfigError("degree sweep needs at least one degree");
  SweepResult sweep;
  sweep.base = config;
  for (int degree : degrees) {
    if (degree < 1 || degree > config.m_clients - 1)
      throw ConfigError("sweep degree must satisfy 1 <= D <= M-1");
    ExperimentConfig per_degree = config;
    per_degree.topology = TopologyKind::fixed_degree;
    per_degree.degree = degree;
    per_degree.alpha_list = {sweep_alpha_for(config.model)};
    if (per_degree.iterations == 0) per_degree.iterations = sweep_iterations_for(config.model);
    sweep.per_degree.push_back(SweepEntry{degree, run_experiment(per_degree, workers)});
  }
  return sweep;
}

namespace {

std::string sweep_summary_csv(const SweepResult& sweep) {
  std::ostringstream out;
  out << schema_header(kSweepSchema, sweep.base.digest());
  out << "model,degree,alpha,replicates,min,q1,median,q3,max,"
         "global_min,global_q1,global_median,global_q3,global_max\n";
  for (const auto& entry : sweep.per_degree) {
    std::vector<double> finals, globals;
    for (const auto& rep : entry.result.replicates) {
      if (!rep.per_alpha[0].diverged && !rep.per_alpha[0].trajectory.rows.empty())
        finals.push_back(rep.per_alpha[0].trajectory.rows.back().log_mse);
      globals.push_back(rep.global_log_mse);
    }
    util::Quantiles fq = util::quantiles5(finals);
    util::Quantiles gq = util::quantiles5(globals);
    out << ngd::to_string(sweep.base.model) << "," << entry.degree << ","
        << fmt(entry.result.config.alpha_list[0]) << "," << entry.result.config.replicates << ","
        << fmt(fq.min) << "," << fmt(fq.q1) << "," << fmt(fq.median) << "," << fmt(fq.q3) << ","
        << fmt(fq.max) << "," << fmt(gq.min) << "," << fmt(gq.q1) << "," << fmt(gq.median) << ","
        << fmt(gq.q3) << "," << fmt(gq.max) << "\n";
  }
  return out.str();
}

std::string degree_dir_name(int degree) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "degree_%02d", degree);
  return buf;
}

}  // namespace

void write_sweep(const SweepResult& sweep, const std::filesystem::path& outdir) {
  std::error_code ec;
  std::filesystem::create_directories(outdir, ec);
  if (ec) throw IoError("cannot create output directory " + outdir.string());
  write_file(outdir / "degree_summary.csv", sweep_summary_csv(sweep));
  for (const auto& entry : sweep.per_degree)
    write_experiment(entry.result, outdir / degree_dir_name(entry.degree));
}

std::string diagnose_json(const ExperimentConfig& config) {
  config.validate();
  ReplicateInstance instance = build_instance(config, config.base_seed);

  nlohmann::json j;
  j["schema"] = kDiagnoseSchema;
  j["config_digest"] = config.digest();
  j["config"] = config_json(config);
  j["prng"] = util::kPrngId;

  topology::SeW se = topology::se_w(instance.weights);
  topology::BalanceStats balance = topology::balance_stats(instance.weights);
  j["topology"] = nlohmann::json{
      {"kind", to_string(config.topology)},
      {"degree", config.degree},
      {"se2_w", se.se2},
      {"se_w", se.se},
      {"balance", balance_json(balance)},
      {"strongly_connected", topology::is_strongly_connected(instance.adjacency)},
      {"hash", util::hex64(util::fnv1a(topology::edge_list_string(instance.adjacency)))}};

  std::vector<Eigen::MatrixXd> curvatures =
      loss::local_curvatures(instance.model, instance.global.theta);
  j["max_stable_lr"] = loss::max_stable_lr(curvatures);
  j["heterogeneity"] =
      hetero_json(diagnostics::heterogeneity(instance.model, instance.dataset.theta0));
  j["global_estimator"] = nlohmann::json{
      {"grad_norm", instance.global.grad_norm_at_solution},
      {"iterations_used", instance.global.iterations_used},
      {"log_mse", std::log((instance.global.theta - instance.dataset.theta0).squaredNorm())}};

  int p = instance.model.p();
  Eigen::MatrixXd global_xx = Eigen::MatrixXd::Zero(p, p);
  for (const auto& s : instance.model.stats()) global_xx += s.sigma_xx;
  global_xx /= instance.model.m_clients();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_global(global_xx);
  double kappa1 = es_global.eigenvalues().minCoeff();
  double kappa2 = 0.0, kappa3 = std::numeric_limits<double>::infinity(), kappa4 = 0.0;
  for (int m = 0; m < instance.model.m_clients(); ++m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_xx(
        instance.model.stats()[static_cast<std::size_t>(m)].sigma_xx);
    kappa2 = std::max(kappa2, es_xx.eigenvalues().maxCoeff());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_h(curvatures[static_cast<std::size_t>(m)]);
    kappa3 = std::min(kappa3, es_h.eigenvalues().minCoeff());
    kappa4 = std::max(kappa4, es_h.eigenvalues().maxCoeff());
  }
  j["kappa"] = nlohmann::json{
      {"kappa1", kappa1}, {"kappa2", kappa2}, {"kappa3", kappa3}, {"kappa4", kappa4}};

  nlohmann::json alphas = nlohmann::json::array();
  for (double alpha : config.alpha_list) {
    nlohmann::json a;
    a["alpha"] = alpha;
    engine::SpectralEstimate radius =
        engine::contraction_radius_detailed(curvatures, instance.weights, alpha);
    a["contraction_radius"] = nlohmann::json{
        {"value", radius.radius}, {"method", radius.method}, {"converged", radius.converged}};
    if (!radius.converged) a["note"] = "iterative spectral estimate did not settle";
    a["theorem2_condition"] =
        alpha * kappa2 * balance.sigma_max_w + se.se <
        kappa1 / kappa2 * balance.sigma_min_I_minus_w / (4.0 * balance.sigma_max_w);
    a["theorem3_condition"] =
        balance.rho < 1.0 && kappa3 > 0.0 &&
        alpha * balance.sigma_max_w * kappa4 + se.se < 0.5 / kappa4 * kappa3 * (1.0 - balance.rho);
    std::int64_t shard_size = instance.dataset.n_total() / config.m_clients;
    if (shard_size < p) {
      engine::OverparamReport report =
          engine::overparam_check(instance.model.stats(), instance.weights, alpha);
      nlohmann::json o;
      o["radius"] = report.radius;
      o["converges"] = report.converges;
      o["method"] = report.method;
      if (report.leading_term_radius) {
        o["leading_term_kind"] = report.leading_term_kind;
        o["leading_term_radius"] = *report.leading_term_radius;
      }
      if (report.central_alpha_threshold)
        o["central_alpha_threshold"] = *report.central_alpha_threshold;
      a["overparam"] = o;
    }
    alphas.push_back(a);
  }
  j["alphas"] = alphas;
  return j.dump(2) + "\n";
}

std::string write_gen_data(const ExperimentConfig& config, const std::filesystem::path& outdir) {
  config.validate();
  std::error_code ec;
  std::filesystem::create_directories(outdir, ec);
  if (ec) throw IoError("cannot create output directory " + outdir.string());

  datagen::Dataset dataset =
      generate_dataset(config, util::derive_seed(config.base_seed, kDataTag));
  datagen::Partition partition = make_partition(config, dataset, config.base_seed);

  std::ostringstream data_out;
  datagen::save_dataset(dataset, data_out, config.digest());
  std::string payload = data_out.str();
  write_file(outdir / "dataset.txt", payload);

  std::ostringstream part_out;
  datagen::save_partition(partition, part_out, config.digest());
  write_file(outdir / "partition.txt", part_out.str());

  return util::hex64(util::fnv1a(payload));
}

namespace {

struct CsvTable {
  std::vector<std::string> header;  // column names
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::filesystem::path& path, const std::string& expected_schema) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty file: " + path.string());
  check_schema_line(line, expected_schema, path);
  CsvTable table;
  if (!std::getline(in, line)) throw IoError("missing header: " + path.string());
  std::istringstream header(line);
  std::string cell;
  while (std::getline(header, cell, ',')) table.header.push_back(cell);
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> row;
    std::istringstream cells(line);
    while (std::getline(cells, cell, ',')) row.push_back(cell);
    if (row.size() != table.header.size())
      throw IoError("ragged csv row in " + path.string());
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace

void write_report(const std::vector<std::filesystem::path>& inputs,
                  const std::filesystem::path& outdir) {
  if (inputs.empty()) throw ConfigError("report needs at least one input directory");
  std::error_code ec;
  std::filesystem::create_directories(outdir, ec);
  if (ec) throw IoError("cannot create output directory " + outdir.string());

  std::ostringstream curves;
  std::ostringstream degrees;
  bool have_curves = false, have_degrees = false;
  std::string combined_digest;

  for (const auto& input : inputs) {
    std::filesystem::path aggregate_path = input / "aggregate.csv";
    std::filesystem::path sweep_path = input / "degree_summary.csv";
    if (std::filesystem::exists(aggregate_path)) {
      nlohmann::json meta;
      try {
        meta = nlohmann::json::parse(read_file(input / "meta.json"));
      } catch (const nlohmann::json::parse_error& e) {
        throw IoError("malformed meta.json in " + input.string() + ": " + e.what());
      }
      if (meta.value("schema", "") != kMetaSchema)
        throw SchemaError(kMetaSchema, meta.value("schema", "<missing>"));
      std::string digest = meta.value("config_digest", "");
      combined_digest += digest;
      const auto& config = meta.at("config");
      CsvTable table = read_csv(aggregate_path, kAggregateSchema);
      for (const auto& row : table.rows) {
        curves << config.at("model").get<std::string>() << ","
               << config.at("topology").get<std::string>() << "," << config.at("degree")
               << "," << config.at("pattern").get<std::string>() << ",";
        for (std::size_t c = 0; c < 5 && c < row.size(); ++c)
          curves << (c ? "," : "") << row[c];
        curves << "\n";
      }
      have_curves = true;
    } else if (std::filesystem::exists(sweep_path)) {
      CsvTable table = read_csv(sweep_path, kSweepSchema);
      for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) degrees << (c ? "," : "") << row[c];
        degrees << "\n";
      }
      combined_digest += "sweep";
      have_degrees = true;
    } else {
      throw IoError("no aggregate.csv or degree_summary.csv under " + input.string());
    }
  }

  std::string digest = util::hex64(util::fnv1a(combined_digest));
  if (have_curves) {
    std::string header =
        schema_header(kCurvesSchema, digest) +
        "model,topology,degree,pattern,alpha,iteration,median_log_mse,"
        "median_discrepancy_to_global,median_global_log_mse\n";
    write_file(outdir / "curves.csv", header + curves.str());
  }
  if (have_degrees) {
    std::string header = schema_header(kSweepSchema, digest) +
                         "model,degree,alpha,replicates,min,q1,median,q3,max,"
                         "global_min,global_q1,global_median,global_q3,global_max\n";
    write_file(outdir / "degree_table.csv", header + degrees.str());
  }
}

}  // namespace ngd::experiment
