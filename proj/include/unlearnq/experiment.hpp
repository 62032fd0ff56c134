#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "unlearnq/config.hpp"
#include "unlearnq/data.hpp"
#include "unlearnq/metrics.hpp"
#include "unlearnq/unlearner.hpp"

namespace unlearnq::exp {

inline constexpr const char* kArtifactVersion = "0.1.0";

// Resolved, typed view of a KvConfig. The raw KvConfig rides along for
// per-method overrides and report embedding.
struct ExperimentConfig {
  data::Kind kind = data::Kind::blobs;
  int classes = 8;
  std::size_t train_n = 800;
  std::size_t test_n = 400;
  double noise = 0.5;
  std::string data_file;

  data::Scenario scenario = data::Scenario::random;
  double ratio = 0.1;
  int class_id = 0;

  std::vector<int> hidden;

  bool quant_enabled = true;
  int bits = 4;
  bool quant_weights = true;
  bool quant_activations = true;

  unlearn::TrainConfig train;
  unlearn::TrainConfig retrain_cfg;

  std::uint64_t seed = 1;
  std::filesystem::path out = "runs";

  cfg::KvConfig kv = cfg::KvConfig::defaults();
  std::string hash;  // identity; excludes seed and out

  static ExperimentConfig resolve(const cfg::KvConfig& kv);
};

// Unlearning settings for one method run. Baselines may carry their own
// epochs/lr/batch via <method>.* keys, falling back to unlearn.*.
unlearn::UnlearnConfig unlearn_config_for(const ExperimentConfig& ec, unlearn::Method method,
                                          std::uint64_t seed);

struct Prepared {
  data::Split split;                 // forget/retain/test, test attached
  data::LabeledSet nonmember_probe;  // half of test: attacker non-members
  data::LabeledSet fresh_test;       // other half: symmetry checks only
  data::LabeledSet member_probe;     // retain slice: attacker members
  net::NetConfig net_template;       // widths + quant flags, scales uncalibrated
};

// Deterministic in (config identity, seed): dataset, split and probes all
// derive from the seed so multi-seed aggregates vary the whole pipeline.
Prepared prepare(const ExperimentConfig& ec, std::uint64_t seed);

struct TrainedModel {
  net::ParameterSet params;
  net::NetConfig cfg;
  double train_accuracy = 0.0;
  double wall_ms = 0.0;
};

// Thread-safe in-memory get-or-compute keyed by string; used to share
// Retrain references across methods and sweeps.
class ModelCache {
 public:
  TrainedModel get_or_compute(const std::string& key,
                              const std::function<TrainedModel()>& compute);

 private:
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<TrainedModel>> done_;
  std::map<std::string, std::shared_ptr<std::mutex>> building_;
};

// Cache keys: dataset content hash + net spec + optimizer spec.
std::string original_cache_key(const ExperimentConfig& ec, const Prepared& prep);
std::string retrain_cache_key(const ExperimentConfig& ec, const Prepared& prep);

// The exact training run behind the cached original: forget + retain
// concatenated, seed salted per role. The train command uses this directly
// so its checkpoint is bit-identical to what the pipeline would compute.
unlearn::TrainResult train_original_full(const ExperimentConfig& ec, const Prepared& prep,
                                         std::uint64_t seed);

// Disk-backed variants used by the CLI (out/cache/*.ckpt). Compute and
// persist when missing.
TrainedModel obtain_original(const ExperimentConfig& ec, const Prepared& prep, std::uint64_t seed,
                             ModelCache& cache, bool allow_compute, bool persist);
TrainedModel obtain_retrain(const ExperimentConfig& ec, const Prepared& prep, std::uint64_t seed,
                            ModelCache& cache, bool persist);
std::filesystem::path original_checkpoint_path(const ExperimentConfig& ec, const Prepared& prep);
std::filesystem::path retrain_checkpoint_path(const ExperimentConfig& ec, const Prepared& prep);

struct Evaluation {
  metrics::RawMetrics raw;
  metrics::MiaResult mia;
};

Evaluation evaluate_model(const net::ParameterSet& params, const net::NetConfig& cfg,
                          const Prepared& prep);

struct MethodOutcome {
  unlearn::Method method = unlearn::Method::oeu;
  std::string method_label;  // display override (evaluate command); empty = method name
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;

  metrics::RawMetrics raw;
  metrics::MiaResult mia;
  metrics::MetricsReport report;  // gaps vs the Retrain reference
  double pre_ra = 0.0;            // original model's retain accuracy
  double initial_forget_entropy = 0.0;
  double final_forget_entropy = 0.0;
  double wall_ms = 0.0;
  unlearn::RunTrace trace;
};

// Full pipeline for one (method, seed): prepare, obtain original + retrain,
// run the method, evaluate. retrain itself is a valid method (AG = 0 path
// exercised against its own reference). With allow_train_original = false a
// missing original checkpoint is an error instead of a training trigger.
MethodOutcome run_method(const ExperimentConfig& ec, unlearn::Method method, std::uint64_t seed,
                         ModelCache& cache, bool persist_models,
                         bool allow_train_original = true);

}  // namespace unlearnq::exp
