#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "unlearnq/data.hpp"
#include "unlearnq/gop.hpp"
#include "unlearnq/net.hpp"

namespace unlearnq::unlearn {

enum class Method { oeu, ft, ga, rl, retrain, oeu_no_gop, oeu_no_egu, oeu_global };

Method method_from_string(const std::string& s);
std::string to_string(Method m);
bool is_baseline(Method m);  // ft, ga, rl
bool is_ablation(Method m);  // oeu_no_gop, oeu_no_egu, oeu_global

// Original-model and Retrain training loop settings. When quantization is
// enabled the loop runs `epochs` at full precision, calibrates the scales,
// then fine-tunes for `qat_epochs` with fake quantization active.
struct TrainConfig {
  int epochs = 40;
  int qat_epochs = 20;
  double lr = 0.1;
  bool cosine = true;
  int batch = 32;
  void validate() const;
};

struct UnlearnConfig {
  Method method = Method::oeu;
  int epochs = 10;
  double lr = 0.05;
  bool cosine = false;
  int batch = 16;
  double beta = 1.0;  // retain-loss weight; scales g_r before projection and update
  gop::ProjectionConfig projection;
  // Full-batch mode uses the whole forget and retain sets each step (one step
  // per epoch); used for exact theorem checks.
  bool full_batch = false;
  std::uint64_t seed = 1;
  void validate() const;
};

struct StepRecord {
  int epoch = 0;
  int step = 0;  // global step index
  double lr = 0.0;
  double loss_forget = 0.0;
  double loss_retain = 0.0;
  double mean_batch_entropy = 0.0;  // prediction entropy on the step's forget batch
  // Conflict summary (projection methods; zero elsewhere).
  double cosine = 0.0;                  // flattened cos(g_f, g_r) before projection
  double max_unit_inner_after = 0.0;    // max_l |<g_hat^(l), g_r^(l)>| after projection
  bool projection_degenerate = false;
  double wall_ms = 0.0;
};

struct RunTrace {
  std::vector<StepRecord> steps;
  double initial_forget_entropy = 0.0;  // full forget set, before the first step
  double final_forget_entropy = 0.0;
  double wall_ms = 0.0;
};

// Non-finite loss or gradient aborts the run; the partial trace rides along.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& msg, RunTrace trace)
      : std::runtime_error(msg), trace(std::move(trace)) {}
  RunTrace trace;
};

struct TrainResult {
  net::ParameterSet params;
  net::NetConfig cfg;  // quant scales calibrated when quantization is on
  RunTrace trace;
  double train_accuracy = 0.0;
};

TrainResult train_original(const data::LabeledSet& full, net::NetConfig cfg,
                           const TrainConfig& tc, std::uint64_t seed);

// Gold standard: fresh initialization, trained on the retain set only.
TrainResult retrain(const data::LabeledSet& retain_set, net::NetConfig cfg, const TrainConfig& tc,
                    std::uint64_t seed);

struct UnlearnResult {
  net::ParameterSet params;
  RunTrace trace;
};

// Orthogonal entropy unlearning: per step, forgetting gradient from the
// entropy loss, retain gradient from cross-entropy scaled by beta, layer-wise
// projection, update theta <- theta - lr (g_hat_f + g_r).
UnlearnResult run_oeu(const net::ParameterSet& theta0, const data::LabeledSet& forget,
                      const data::LabeledSet& retain, const net::NetConfig& net_cfg,
                      const UnlearnConfig& cfg);

// ft: SGD on retain cross-entropy only. ga: gradient ascent on forget
// cross-entropy. rl: fresh uniformly random wrong labels on the forget set
// each epoch, descent on CE over relabeled forget plus CE over retain.
UnlearnResult run_baseline(const net::ParameterSet& theta0, const data::LabeledSet& forget,
                           const data::LabeledSet& retain, const net::NetConfig& net_cfg,
                           const UnlearnConfig& cfg);

// oeu_no_gop: alpha forced to 0. oeu_no_egu: forgetting gradient from
// RL-style CE instead of entropy. oeu_global: global instead of layer-wise
// projection.
UnlearnResult run_ablation(const net::ParameterSet& theta0, const data::LabeledSet& forget,
                           const data::LabeledSet& retain, const net::NetConfig& net_cfg,
                           const UnlearnConfig& cfg);

// Dispatch by cfg.method (not valid for retrain).
UnlearnResult run_unlearn_method(const net::ParameterSet& theta0, const data::LabeledSet& forget,
                                 const data::LabeledSet& retain, const net::NetConfig& net_cfg,
                                 const UnlearnConfig& cfg);

}  // namespace unlearnq::unlearn
