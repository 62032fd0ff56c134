#include "unlearnq/unlearner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "unlearnq/losses.hpp"
#include "unlearnq/metrics.hpp"

namespace unlearnq::unlearn {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Distinct seed streams per role so adding a consumer never shifts another.
constexpr std::uint64_t kShuffleSalt = 0x9e3779b97f4a7c15ull;
constexpr std::uint64_t kRetainSalt = 0xc2b2ae3d27d4eb4full;
constexpr std::uint64_t kRelabelSalt = 0x165667b19e3779f9ull;

double step_lr(double base, bool cosine, int step, int total_steps) {
  if (!cosine || total_steps <= 1) return base;
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * step / total_steps));
}

net::Batch gather_batch(const data::LabeledSet& s, std::span<const std::size_t> idx,
                        const std::vector<int>* label_override, bool with_labels) {
  net::Batch b;
  b.x = Matrix(idx.size(), s.features.cols());
  if (with_labels) b.labels.resize(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto src = s.features.row(idx[i]);
    std::copy(src.begin(), src.end(), b.x.row(i).begin());
    if (with_labels) b.labels[i] = label_override ? (*label_override)[idx[i]] : s.labels[idx[i]];
  }
  return b;
}

// Cyclic seeded sampler over the retain set; reshuffles on exhaustion.
class CyclicSampler {
 public:
  CyclicSampler(std::size_t n, std::uint64_t seed) : order_(n), rng_(seed) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::shuffle(order_.begin(), order_.end(), rng_);
  }
  std::vector<std::size_t> draw(std::size_t n) {
    std::vector<std::size_t> out;
    out.reserve(n);
    while (out.size() < n) {
      if (pos_ == order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  std::mt19937_64 rng_;
};

void check_step_finite(double loss, const net::GradientSet& g, const char* what, RunTrace& trace) {
  if (!std::isfinite(loss) || !net::all_finite(g))
    throw DivergenceError(std::string("non-finite ") + what + " gradient; aborting run", trace);
}

// One SGD phase of the training drivers (original / retrain).
void sgd_phase(net::ParameterSet& params, const data::LabeledSet& ds, const net::NetConfig& cfg,
               int epochs, double lr, bool cosine, int batch, std::mt19937_64& shuffle_rng,
               RunTrace& trace) {
  const std::size_t n = ds.size();
  const int steps_per_epoch = static_cast<int>((n + batch - 1) / batch);
  const int total_steps = epochs * steps_per_epoch;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  int global_step = static_cast<int>(trace.steps.size());
  int phase_step = 0;  // cosine schedule restarts per phase
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (int s = 0; s < steps_per_epoch; ++s) {
      const auto t0 = Clock::now();
      const std::size_t lo = static_cast<std::size_t>(s) * batch;
      const std::size_t hi = std::min(lo + batch, n);
      std::span<const std::size_t> idx(order.data() + lo, hi - lo);
      net::Batch b = gather_batch(ds, idx, nullptr, true);
      net::GradResult g;
      try {
        g = net::grad(params, b, net::LossKind::retain_ce, cfg);
      } catch (const std::invalid_argument& e) {
        // inputs were validated up front, so this is numerical blow-up
        throw DivergenceError(std::string("training diverged: ") + e.what(), trace);
      }
      check_step_finite(g.loss, g.grads, "training", trace);
      const double lr_t = step_lr(lr, cosine, phase_step++, total_steps);
      net::axpy_params(params, g.grads, -lr_t);
      if (!net::all_finite(params))
        throw DivergenceError("training diverged: non-finite parameters", trace);

      StepRecord rec;
      rec.epoch = epoch;
      rec.step = global_step++;
      rec.lr = lr_t;
      rec.loss_retain = g.loss;
      rec.wall_ms = ms_since(t0);
      trace.steps.push_back(rec);
    }
  }
}

TrainResult train_impl(const data::LabeledSet& ds, net::NetConfig cfg, const TrainConfig& tc,
                       std::uint64_t seed) {
  tc.validate();
  ds.validate();
  if (cfg.widths.front() != static_cast<int>(ds.features.cols()))
    throw std::invalid_argument("train: widths[0] does not match the feature dimension");
  if (cfg.widths.back() != ds.class_count)
    throw std::invalid_argument("train: widths back does not match the class count");

  const auto t0 = Clock::now();
  net::ParameterSet params = net::init_params(cfg, seed);
  std::mt19937_64 shuffle_rng(seed ^ kShuffleSalt);

  TrainResult result;
  // Phase 1: full precision.
  net::NetConfig fp_cfg = cfg;
  fp_cfg.quant = net::QuantPolicy{};
  sgd_phase(params, ds, fp_cfg, tc.epochs, tc.lr, tc.cosine, tc.batch, shuffle_rng, result.trace);

  if (cfg.quant.enabled()) {
    // Calibrate from the trained weights and a calibration batch, then
    // fine-tune with fake quantization active.
    const std::size_t calib_n = std::min<std::size_t>(256, ds.size());
    std::vector<std::size_t> idx(calib_n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    net::Batch calib = gather_batch(ds, idx, nullptr, false);
    net::calibrate_quant(cfg, params, calib.x);
    sgd_phase(params, ds, cfg, tc.qat_epochs, tc.lr, tc.cosine, tc.batch, shuffle_rng,
              result.trace);
  }

  result.params = std::move(params);
  result.cfg = std::move(cfg);
  result.trace.wall_ms = ms_since(t0);
  result.train_accuracy = metrics::accuracy(result.params, ds, result.cfg);
  return result;
}

struct MethodPlan {
  bool uses_forget_gradient = false;
  bool uses_retain_gradient = false;
  bool entropy_forget = false;  // forget gradient from the entropy loss
  bool relabel = false;         // forget gradient from RL-style CE on wrong labels
  bool ascent = false;          // ga
  bool project = false;
  gop::Mode mode = gop::Mode::layerwise;
  bool force_alpha_zero = false;
  bool apply_beta = false;
};

MethodPlan plan_for(Method m) {
  MethodPlan p;
  switch (m) {
    case Method::ft:
      p.uses_retain_gradient = true;
      break;
    case Method::ga:
      p.uses_forget_gradient = true;
      p.ascent = true;
      break;
    case Method::rl:
      p.uses_forget_gradient = p.uses_retain_gradient = true;
      p.relabel = true;
      break;
    case Method::oeu:
      p.uses_forget_gradient = p.uses_retain_gradient = true;
      p.entropy_forget = p.project = p.apply_beta = true;
      break;
    case Method::oeu_no_gop:
      p.uses_forget_gradient = p.uses_retain_gradient = true;
      p.entropy_forget = p.project = p.apply_beta = true;
      p.force_alpha_zero = true;
      break;
    case Method::oeu_no_egu:
      p.uses_forget_gradient = p.uses_retain_gradient = true;
      p.relabel = p.project = p.apply_beta = true;
      break;
    case Method::oeu_global:
      p.uses_forget_gradient = p.uses_retain_gradient = true;
      p.entropy_forget = p.project = p.apply_beta = true;
      p.mode = gop::Mode::global;
      break;
    case Method::retrain:
      throw std::invalid_argument("retrain is a training driver, not an unlearning method");
  }
  return p;
}

UnlearnResult run_impl(const net::ParameterSet& theta0, const data::LabeledSet& forget,
                       const data::LabeledSet& retain, const net::NetConfig& net_cfg,
                       const UnlearnConfig& cfg) {
  cfg.validate();
  net_cfg.validate();
  forget.validate();
  retain.validate();
  if (net_cfg.class_count() != forget.class_count ||
      net_cfg.class_count() != retain.class_count)
    throw std::invalid_argument("run: class count does not match the network head");
  const MethodPlan plan = plan_for(cfg.method);

  const auto t0 = Clock::now();
  UnlearnResult result;
  result.params = theta0;
  result.trace.initial_forget_entropy =
      losses::mean_prediction_entropy(result.params, forget.features, net_cfg);

  const std::size_t n_f = forget.size();
  const std::size_t batch = cfg.full_batch ? n_f : static_cast<std::size_t>(cfg.batch);
  const int steps_per_epoch = static_cast<int>((n_f + batch - 1) / batch);
  const int total_steps = cfg.epochs * steps_per_epoch;

  std::mt19937_64 shuffle_rng(cfg.seed ^ kShuffleSalt);
  std::mt19937_64 relabel_rng(cfg.seed ^ kRelabelSalt);
  CyclicSampler retain_sampler(retain.size(), cfg.seed ^ kRetainSalt);

  gop::ProjectionConfig pcfg = cfg.projection;
  pcfg.mode = plan.mode;
  if (plan.force_alpha_zero) pcfg.alpha = 0.0;

  std::vector<std::size_t> forget_order(n_f);
  std::iota(forget_order.begin(), forget_order.end(), std::size_t{0});
  std::vector<int> rl_labels(n_f, 0);
  const int k_classes = net_cfg.class_count();

  int global_step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (plan.relabel) {
      // Fresh uniformly random wrong label for every forget sample each epoch.
      std::uniform_int_distribution<int> pick(0, k_classes - 2);
      for (std::size_t i = 0; i < n_f; ++i) {
        int wrong = pick(relabel_rng);
        if (wrong >= forget.labels[i]) ++wrong;
        rl_labels[i] = wrong;
      }
    }
    std::shuffle(forget_order.begin(), forget_order.end(), shuffle_rng);

    for (int s = 0; s < steps_per_epoch; ++s) {
      const auto ts = Clock::now();
      StepRecord rec;
      rec.epoch = epoch;
      rec.step = global_step;
      rec.lr = step_lr(cfg.lr, cfg.cosine, global_step, total_steps);

      const std::size_t lo = static_cast<std::size_t>(s) * batch;
      const std::size_t hi = std::min(lo + batch, n_f);
      std::span<const std::size_t> fidx(forget_order.data() + lo, hi - lo);
      std::vector<std::size_t> ridx;
      if (cfg.full_batch) {
        ridx.resize(retain.size());
        std::iota(ridx.begin(), ridx.end(), std::size_t{0});
      } else {
        ridx = retain_sampler.draw(fidx.size());
      }

      net::Batch fbatch = gather_batch(forget, fidx, plan.relabel ? &rl_labels : nullptr,
                                       plan.relabel || plan.ascent);
      try {
      rec.mean_batch_entropy =
          losses::mean_prediction_entropy(result.params, fbatch.x, net_cfg);

      if (cfg.method == Method::ft) {
        net::Batch rbatch = gather_batch(retain, ridx, nullptr, true);
        auto gr = net::grad(result.params, rbatch, net::LossKind::retain_ce, net_cfg);
        check_step_finite(gr.loss, gr.grads, "retain", result.trace);
        rec.loss_retain = gr.loss;
        net::axpy_params(result.params, gr.grads, -rec.lr);
      } else if (cfg.method == Method::ga) {
        auto gf = net::grad(result.params, fbatch, net::LossKind::retain_ce, net_cfg);
        check_step_finite(gf.loss, gf.grads, "forget", result.trace);
        rec.loss_forget = gf.loss;
        // ascent on the forget CE, implemented as descent on its negation
        net::scale_grads(gf.grads, -1.0);
        net::axpy_params(result.params, gf.grads, -rec.lr);
      } else if (cfg.method == Method::rl) {
        auto gf = net::grad(result.params, fbatch, net::LossKind::retain_ce, net_cfg);
        net::Batch rbatch = gather_batch(retain, ridx, nullptr, true);
        auto gr = net::grad(result.params, rbatch, net::LossKind::retain_ce, net_cfg);
        check_step_finite(gf.loss, gf.grads, "forget", result.trace);
        check_step_finite(gr.loss, gr.grads, "retain", result.trace);
        rec.loss_forget = gf.loss;
        rec.loss_retain = gr.loss;
        net::axpy_grads(gf.grads, gr.grads, 1.0);
        net::axpy_params(result.params, gf.grads, -rec.lr);
      } else {
        // OEU family
        auto gf = net::grad(result.params, fbatch,
                            plan.entropy_forget ? net::LossKind::forget_entropy
                                                : net::LossKind::retain_ce,
                            net_cfg);
        net::Batch rbatch = gather_batch(retain, ridx, nullptr, true);
        auto gr = net::grad(result.params, rbatch, net::LossKind::retain_ce, net_cfg);
        check_step_finite(gf.loss, gf.grads, "forget", result.trace);
        check_step_finite(gr.loss, gr.grads, "retain", result.trace);
        rec.loss_forget = gf.loss;
        rec.loss_retain = gr.loss;
        if (plan.apply_beta && cfg.beta != 1.0) net::scale_grads(gr.grads, cfg.beta);

        auto diag = gop::diagnostics(gf.grads, gr.grads);
        rec.cosine = diag.cosine;
        auto proj = gop::project(gf.grads, gr.grads, pcfg);
        rec.projection_degenerate = proj.degenerate();
        auto pu = gop::units(proj.grads);
        auto ru = gop::units(gr.grads);
        for (std::size_t u = 0; u < pu.size(); ++u)
          rec.max_unit_inner_after =
              std::max(rec.max_unit_inner_after, std::abs(dot(pu[u].v, ru[u].v)));

        net::axpy_grads(proj.grads, gr.grads, 1.0);  // g_hat_f + g_r
        net::axpy_params(result.params, proj.grads, -rec.lr);
      }
      } catch (const std::invalid_argument& e) {
        // inputs were validated before the loop; mid-run invalid values mean
        // the optimization blew up
        throw DivergenceError(std::string("unlearning diverged: ") + e.what(),
                              result.trace);
      }
      if (!net::all_finite(result.params))
        throw DivergenceError("unlearning diverged: non-finite parameters", result.trace);

      rec.wall_ms = ms_since(ts);
      result.trace.steps.push_back(rec);
      ++global_step;
    }
  }

  try {
    result.trace.final_forget_entropy =
        losses::mean_prediction_entropy(result.params, forget.features, net_cfg);
  } catch (const std::invalid_argument& e) {
    throw DivergenceError(std::string("unlearning diverged: ") + e.what(), result.trace);
  }
  result.trace.wall_ms = ms_since(t0);
  return result;
}

}  // namespace

Method method_from_string(const std::string& s) {
  if (s == "oeu") return Method::oeu;
  if (s == "ft") return Method::ft;
  if (s == "ga") return Method::ga;
  if (s == "rl") return Method::rl;
  if (s == "retrain") return Method::retrain;
  if (s == "oeu_no_gop") return Method::oeu_no_gop;
  if (s == "oeu_no_egu") return Method::oeu_no_egu;
  if (s == "oeu_global") return Method::oeu_global;
  throw std::invalid_argument(
      "unknown method '" + s +
      "' (expected oeu|ft|ga|rl|retrain|oeu_no_gop|oeu_no_egu|oeu_global)");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::oeu: return "oeu";
    case Method::ft: return "ft";
    case Method::ga: return "ga";
    case Method::rl: return "rl";
    case Method::retrain: return "retrain";
    case Method::oeu_no_gop: return "oeu_no_gop";
    case Method::oeu_no_egu: return "oeu_no_egu";
    case Method::oeu_global: return "oeu_global";
  }
  return "?";
}

bool is_baseline(Method m) { return m == Method::ft || m == Method::ga || m == Method::rl; }

bool is_ablation(Method m) {
  return m == Method::oeu_no_gop || m == Method::oeu_no_egu || m == Method::oeu_global;
}

void TrainConfig::validate() const {
  if (epochs < 0 || qat_epochs < 0) throw std::invalid_argument("TrainConfig: negative epochs");
  if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be positive");
  if (batch < 1) throw std::invalid_argument("TrainConfig: batch must be >= 1");
}

void UnlearnConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("UnlearnConfig: negative epochs");
  // lr = 0 is allowed: a zero-rate run is a defined no-op
  if (lr < 0.0 || !std::isfinite(lr)) throw std::invalid_argument("UnlearnConfig: bad lr");
  if (batch < 1) throw std::invalid_argument("UnlearnConfig: batch must be >= 1");
  if (beta < 0.0) throw std::invalid_argument("UnlearnConfig: beta must be >= 0");
  projection.validate();
}

TrainResult train_original(const data::LabeledSet& full, net::NetConfig cfg, const TrainConfig& tc,
                           std::uint64_t seed) {
  return train_impl(full, std::move(cfg), tc, seed);
}

TrainResult retrain(const data::LabeledSet& retain_set, net::NetConfig cfg, const TrainConfig& tc,
                    std::uint64_t seed) {
  return train_impl(retain_set, std::move(cfg), tc, seed);
}

UnlearnResult run_oeu(const net::ParameterSet& theta0, const data::LabeledSet& forget,
                      const data::LabeledSet& retain, const net::NetConfig& net_cfg,
                      const UnlearnConfig& cfg) {
  if (cfg.method != Method::oeu)
    throw std::invalid_argument("run_oeu expects method = oeu, got " + to_string(cfg.method));
  return run_impl(theta0, forget, retain, net_cfg, cfg);
}

UnlearnResult run_baseline(const net::ParameterSet& theta0, const data::LabeledSet& forget,
                           const data::LabeledSet& retain, const net::NetConfig& net_cfg,
                           const UnlearnConfig& cfg) {
  if (!is_baseline(cfg.method))
    throw std::invalid_argument("run_baseline expects ft|ga|rl, got " + to_string(cfg.method));
  return run_impl(theta0, forget, retain, net_cfg, cfg);
}

UnlearnResult run_ablation(const net::ParameterSet& theta0, const data::LabeledSet& forget,
                           const data::LabeledSet& retain, const net::NetConfig& net_cfg,
                           const UnlearnConfig& cfg) {
  if (!is_ablation(cfg.method))
    throw std::invalid_argument("run_ablation expects an oeu_* variant, got " +
                                to_string(cfg.method));
  return run_impl(theta0, forget, retain, net_cfg, cfg);
}

UnlearnResult run_unlearn_method(const net::ParameterSet& theta0, const data::LabeledSet& forget,
                                 const data::LabeledSet& retain, const net::NetConfig& net_cfg,
                                 const UnlearnConfig& cfg) {
  return run_impl(theta0, forget, retain, net_cfg, cfg);
}

}  // namespace unlearnq::unlearn
