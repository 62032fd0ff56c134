// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// fails. Heavy comparative runs use frozen seeds and are deterministic.
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "unlearnq/cli.hpp"
#include "unlearnq/experiment.hpp"
#include "unlearnq/gop.hpp"
#include "unlearnq/losses.hpp"
#include "unlearnq/metrics.hpp"
#include "unlearnq/quant.hpp"
#include "unlearnq/unlearner.hpp"

using namespace unlearnq;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

// Random shape-congruent gradient pairs; unit norms kept in [0.5, 2] so the
// relative tolerances of the lemmas are meaningful.
struct PairGen {
  std::mt19937_64 rng{20240901};
  std::pair<net::GradientSet, net::GradientSet> next() {
    std::uniform_int_distribution<int> n_layers(1, 4), dim(1, 8);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> scale(0.5, 2.0);
    const int count = n_layers(rng);
    std::vector<std::pair<int, int>> shapes;
    for (int l = 0; l < count; ++l) shapes.emplace_back(dim(rng), dim(rng));
    auto make = [&] {
      net::GradientSet g;
      for (std::size_t l = 0; l < shapes.size(); ++l) {
        net::Layer layer;
        layer.name = "layer" + std::to_string(l);
        layer.weights = Matrix(shapes[l].first, shapes[l].second);
        for (double& v : layer.weights.values()) v = gauss(rng);
        layer.bias.resize(shapes[l].first);
        for (double& v : layer.bias) v = gauss(rng);
        g.layers.push_back(std::move(layer));
      }
      for (auto unit : gop::units(g)) {
        const double n = l2_norm(unit.v);
        if (n == 0.0) continue;
        const double target = scale(rng);
        for (double& v : unit.v) v *= target / n;
      }
      return g;
    };
    return {make(), make()};
  }
};

// ---------------------------------------------------------------------------
// Criterion 1: orthogonality of layer-wise and global projection at alpha = 1
// over 1,000 random gradient pairs; runtime < 5 s.
Outcome criterion1() {
  const auto t0 = Clock::now();
  PairGen gen;
  gop::ProjectionConfig cfg;
  cfg.alpha = 1.0;
  double worst_unit = 0.0, worst_global = 0.0;
  for (int t = 0; t < 1000; ++t) {
    auto [gf, gr] = gen.next();
    auto lw = gop::project_layerwise(gf, gr, cfg);
    auto fu = gop::units(gf);
    auto ru = gop::units(gr);
    auto ou = gop::units(lw.grads);
    for (std::size_t u = 0; u < fu.size(); ++u) {
      const double nf = l2_norm(fu[u].v);
      const double nr = l2_norm(ru[u].v);
      if (nr <= 10 * cfg.epsilon) continue;
      const double inner = std::abs(dot(ou[u].v, ru[u].v));
      worst_unit = std::max(worst_unit, inner / (nf * nr));
    }
    auto gl = gop::project_global(gf, gr, 1.0);
    const auto ff = net::flatten(gf);
    const auto rr = net::flatten(gr);
    const double inner = std::abs(dot(net::flatten(gl.grads), rr));
    worst_global = std::max(worst_global, inner / (l2_norm(ff) * l2_norm(rr)));
  }
  const double secs = seconds_since(t0);
  const bool pass = worst_unit <= 1e-10 && worst_global <= 1e-10 && secs < 5.0;
  return {pass, fmt("worst |<g_hat,g_r>|/(|g_f||g_r|): layerwise %.2e, global %.2e; %.2f s",
                    worst_unit, worst_global, secs)};
}

// Criterion 2: Theorem-4 identity <g_f, g_f_perp> == ||g_f||^2 sin^2(phi).
Outcome criterion2() {
  PairGen gen;
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    auto [gf, gr] = gen.next();
    auto d = gop::diagnostics(gf, gr);
    if (d.degenerate) continue;
    worst = std::max(worst,
                     std::abs(d.forget_alignment - d.sin2_identity) / (d.norm_f * d.norm_f));
  }
  return {worst <= 1e-9, fmt("worst relative identity error %.2e (tol 1e-9)", worst)};
}

// Criterion 3: first-order retain preservation; quadratic vs linear scaling
// of a projected vs unprojected step, medians over 20 conflicted trials.
Outcome criterion3() {
  std::vector<double> ratio_proj, ratio_unproj;
  int tried = 0;
  for (std::uint64_t seed = 1; ratio_proj.size() < 20 && tried < 60; ++seed, ++tried) {
    auto ds = data::gen_synthetic(data::Kind::blobs, 4, 240, 0.5, seed * 11 + 1);
    net::NetConfig cfg;
    cfg.widths = {2, 16, 4};  // two affine layers, full precision
    unlearn::TrainConfig tc;
    tc.epochs = 40;
    auto orig = unlearn::train_original(ds, cfg, tc, seed * 13 + 2);

    std::vector<std::size_t> c0;
    for (std::size_t i = 0; i < ds.size(); ++i)
      if (ds.labels[i] == 0) c0.push_back(i);
    if (c0.size() < 40) continue;
    auto gather = [&](std::span<const std::size_t> idx, bool labels) {
      net::Batch b;
      b.x = Matrix(idx.size(), 2);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        auto row = ds.features.row(idx[i]);
        std::copy(row.begin(), row.end(), b.x.row(i).begin());
        if (labels) b.labels.push_back(ds.labels[idx[i]]);
      }
      return b;
    };
    auto fb = gather(std::span(c0).subspan(0, 20), false);
    auto rb = gather(std::span(c0).subspan(20, 20), true);
    auto gf = net::grad(orig.params, fb, net::LossKind::forget_entropy, orig.cfg);
    auto gr = net::grad(orig.params, rb, net::LossKind::retain_ce, orig.cfg);
    if (gop::diagnostics(gf.grads, gr.grads).cosine >= -0.1) continue;

    const double l0 = losses::retain_loss(orig.params, rb, orig.cfg).value;
    auto delta = [&](const net::GradientSet& dir, double eta) {
      net::ParameterSet p = orig.params;
      net::axpy_params(p, dir, -eta);
      return std::abs(losses::retain_loss(p, rb, orig.cfg).value - l0);
    };
    auto proj = gop::project_global(gf.grads, gr.grads, 1.0);
    const double p2 = delta(proj.grads, 5e-4);
    const double u2 = delta(gf.grads, 5e-4);
    if (p2 <= 0.0 || u2 <= 0.0) continue;
    ratio_proj.push_back(delta(proj.grads, 1e-3) / p2);
    ratio_unproj.push_back(delta(gf.grads, 1e-3) / u2);
  }
  if (ratio_proj.size() < 20)
    return {false, fmt("only %zu conflicted trials found", ratio_proj.size())};
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  const double mp = median(ratio_proj);
  const double mu = median(ratio_unproj);
  const bool pass = mp >= 3.0 && mp <= 5.0 && mu >= 1.7 && mu <= 2.3;
  return {pass, fmt("median |dL_r| shrink factors: projected %.3f (want [3,5]), "
                    "unprojected %.3f (want [1.7,2.3]), %zu trials",
                    mp, mu, ratio_proj.size())};
}

// Criterion 4: entropy facts and the entropy + KL duality.
Outcome criterion4() {
  double worst = 0.0;
  for (int k : {2, 10, 100}) {
    std::vector<double> uniform(k, 1.0 / k), onehot(k, 0.0);
    onehot[0] = 1.0;
    worst = std::max(worst, std::abs(losses::entropy(uniform) - std::log(double(k))));
    worst = std::max(worst, std::abs(losses::kl_to_uniform(onehot) - std::log(double(k))));
  }
  std::mt19937_64 rng(424242);
  std::gamma_distribution<double> gamma(0.6, 1.0);
  double worst_dual = 0.0;
  for (int t = 0; t < 10000; ++t) {
    const int k = 2 + static_cast<int>(rng() % 99);
    std::vector<double> p(k);
    double sum = 0.0;
    for (double& v : p) {
      v = gamma(rng);
      sum += v;
    }
    for (double& v : p) v /= sum;
    worst_dual = std::max(
        worst_dual, std::abs(losses::entropy(p) + losses::kl_to_uniform(p) - std::log(double(k))));
  }
  const bool pass = worst <= 1e-12 && worst_dual <= 1e-12;
  return {pass, fmt("closed-form error %.2e, duality error %.2e (tol 1e-12)", worst, worst_dual)};
}

// Criterion 5: Monte Carlo expected Random-Label target vs log(K/(K-1)).
Outcome criterion5() {
  const int k = 10, y = 4, draws = 100000;
  std::mt19937_64 rng(777);
  std::uniform_int_distribution<int> pick(0, k - 2);
  std::vector<double> mean(k, 0.0);
  for (int t = 0; t < draws; ++t) {
    int wrong = pick(rng);
    if (wrong >= y) ++wrong;
    mean[wrong] += 1.0 / draws;
  }
  const double kl = losses::kl_to_uniform(mean);
  const double expect = std::log(10.0 / 9.0);
  const double err = std::abs(kl - expect);
  return {err <= 2e-3, fmt("KL(p_bar||U) = %.6f vs log(10/9) = %.6f, |err| %.2e (tol 2e-3)",
                           kl, expect, err)};
}

// Criterion 6: finite-difference gradient check through the full net for both
// losses, quantization off and on (STE oracle); 200 coordinates each.
Outcome criterion6() {
  const auto t0 = Clock::now();
  net::NetConfig fp_cfg;
  fp_cfg.widths = {3, 10, 8, 5};
  net::NetConfig q_cfg = fp_cfg;
  q_cfg.quant.weights = true;
  q_cfg.quant.bits = 6;
  q_cfg.quant.weight_scales = {0.02, 0.02, 0.02};

  std::mt19937_64 rng(1234);
  std::normal_distribution<double> gauss(0.0, 1.0);
  net::Batch batch;
  batch.x = Matrix(12, 3);
  for (double& v : batch.x.values()) v = gauss(rng);
  std::uniform_int_distribution<int> lab(0, 4);
  batch.labels.resize(12);
  for (int& yy : batch.labels) yy = lab(rng);

  double worst = 0.0;
  for (bool quantized : {false, true}) {
    auto params = net::init_params(fp_cfg, quantized ? 99 : 7);
    if (quantized) {
      // snap the latent weights onto the grid: the quantized forward then
      // equals the identity forward and STE gradients must match finite
      // differences of the loss with quantize replaced by identity
      for (std::size_t l = 0; l < params.layers.size(); ++l)
        for (double& w : params.layers[l].weights.values())
          w = quant::quantize_value(w, q_cfg.quant.weight_spec(l));
    }
    const net::NetConfig& grad_cfg = quantized ? q_cfg : fp_cfg;
    for (net::LossKind kind : {net::LossKind::retain_ce, net::LossKind::forget_entropy}) {
      auto g = net::grad(params, batch, kind, grad_cfg);
      std::uniform_int_distribution<std::size_t> layer_pick(0, params.layers.size() - 1);
      for (int t = 0; t < 200; ++t) {
        const std::size_t l = layer_pick(rng);
        const bool bias = !quantized && (t % 5 == 0);
        const std::size_t count =
            bias ? params.layers[l].bias.size() : params.layers[l].weights.size();
        std::uniform_int_distribution<std::size_t> idx_pick(0, count - 1);
        const std::size_t i = idx_pick(rng);
        const double analytic =
            bias ? g.grads.layers[l].bias[i] : g.grads.layers[l].weights.values()[i];
        net::ParameterSet probe = params;
        auto& target =
            bias ? probe.layers[l].bias[i] : probe.layers[l].weights.values()[i];
        const double keep = target;
        const double h = 1e-6;
        target = keep + h;
        const double up = net::grad(probe, batch, kind, fp_cfg).loss;
        target = keep - h;
        const double down = net::grad(probe, batch, kind, fp_cfg).loss;
        const double fd = (up - down) / (2 * h);
        worst = std::max(worst, std::abs(analytic - fd) / std::max(std::abs(fd), 1e-5));
      }
    }
  }
  const double secs = seconds_since(t0);
  const bool pass = worst <= 1e-4 && secs < 30.0;
  return {pass, fmt("worst relative gradient error %.2e (tol 1e-4); %.2f s", worst, secs)};
}

// Criterion 7: quantizer contract on 1e5 random values per (bits, scale).
Outcome criterion7() {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> wide(-60.0, 60.0);
  std::string detail;
  for (int bits : {2, 4, 8}) {
    for (double s : {0.1, 1.0}) {
      quant::QuantSpec spec{bits, s, true};
      std::vector<double> xs(100000);
      for (double& v : xs) v = wide(rng);
      auto q = quant::quantize(xs, spec);
      for (std::size_t i = 0; i < xs.size(); ++i) {
        const double level = q.values[i] / s;
        if (std::abs(level - std::round(level)) > 1e-9 || level < spec.level_min() - 1e-9 ||
            level > spec.level_max() + 1e-9)
          return {false, fmt("grid violation at bits=%d s=%.1f", bits, s)};
        if (q.mask[i] && std::abs(xs[i] - q.values[i]) > s * 0.5000000001)
          return {false, fmt("error bound violation at bits=%d s=%.1f", bits, s)};
      }
      auto q2 = quant::quantize(q.values, spec);
      if (q2.values != q.values) return {false, fmt("idempotence broken bits=%d s=%.1f", bits, s)};
      std::sort(xs.begin(), xs.end());
      auto qs = quant::quantize(xs, spec);
      for (std::size_t i = 1; i < xs.size(); ++i)
        if (qs.values[i - 1] > qs.values[i])
          return {false, fmt("monotonicity broken bits=%d s=%.1f", bits, s)};
    }
  }
  return {true, "idempotence, grid membership, monotonicity, |x-xq| <= s/2: 6e5 values"};
}

// Shared cell runner for criteria 8 and 9.
struct CellSpec {
  const char* label;
  const char* kind;
  int classes;
  const char* noise;
  double ratio;
  const char* hidden;
  const char* train_ep;
  const char* train_qat;
  const char* retrain_ep;
  const char* retrain_qat;
  const char* beta;
  const char* lr;
  const char* epochs;
  const char* batch;
};

cfg::KvConfig cell_config(const CellSpec& c) {
  auto kv = cfg::KvConfig::defaults();
  kv.set("data.kind", c.kind);
  kv.set("data.classes", std::to_string(c.classes));
  kv.set("data.train_n", "600");
  kv.set("data.test_n", "600");
  kv.set("data.noise", c.noise);
  kv.set("split.ratio", std::to_string(c.ratio));
  kv.set("net.hidden", c.hidden);
  kv.set("train.epochs", c.train_ep);
  kv.set("train.qat_epochs", c.train_qat);
  kv.set("retrain.epochs", c.retrain_ep);
  kv.set("retrain.qat_epochs", c.retrain_qat);
  kv.set("unlearn.batch", c.batch);
  kv.set("unlearn.lr", c.lr);
  kv.set("unlearn.epochs", c.epochs);
  kv.set("unlearn.beta", c.beta);
  kv.set("unlearn.cosine", "true");
  kv.set("ga.lr", "0.0005");
  kv.set("ga.epochs", "5");
  kv.set("rl.lr", "0.05");
  kv.set("rl.epochs", "10");
  return kv;
}

struct CellResult {
  std::string label;
  double ag_oeu = 0, ag_ga = 0, ag_rl = 0;
  double mean_entropy = 0, entropy_goal = 0;
  double mean_ra_drop = 0;
  double min_train_acc = 100;
  bool runs_ok = true;
};

CellResult run_cell(const CellSpec& c) {
  CellResult res;
  res.label = c.label;
  res.entropy_goal = 0.9 * std::log(double(c.classes));
  auto ec = exp::ExperimentConfig::resolve(cell_config(c));
  const int S = 5;
  exp::ModelCache cache;
  for (std::uint64_t seed = 1; seed <= S; ++seed) {
    auto prep = exp::prepare(ec, seed);
    auto orig = exp::obtain_original(ec, prep, seed, cache, true, false);
    res.min_train_acc = std::min(res.min_train_acc, orig.train_accuracy);
    auto o = exp::run_method(ec, unlearn::Method::oeu, seed, cache, false);
    auto g = exp::run_method(ec, unlearn::Method::ga, seed, cache, false);
    auto r = exp::run_method(ec, unlearn::Method::rl, seed, cache, false);
    if (!o.ok || !g.ok || !r.ok) res.runs_ok = false;
    res.ag_oeu += o.report.ag / S;
    res.ag_ga += g.report.ag / S;
    res.ag_rl += r.report.ag / S;
    res.mean_entropy += o.final_forget_entropy / S;
    res.mean_ra_drop += (o.pre_ra - o.raw.ra) / S;
  }
  return res;
}

// Criterion 8: comparative end-to-end. 4 cells x 5 seeds; OEU's mean AG must
// not exceed GA's and RL's in at least 3 cells; OEU mean forget entropy and
// mean RA drop gated per cell; total runtime < 5 minutes.
Outcome criterion8(std::string* extra) {
  const auto t0 = Clock::now();
  const std::vector<CellSpec> cells = {
      {"moons-10%", "moons", 2, "0.15", 0.1, "96,96", "160", "80", "110", "50",
       "0.07", "0.09", "1800", "60"},
      {"moons-30%", "moons", 2, "0.15", 0.3, "64,64", "220", "110", "110", "50",
       "0.10", "0.05", "900", "32"},
      {"blobs-10%", "blobs", 8, "0.6", 0.1, "128,128", "120", "60", "120", "60",
       "0.15", "0.05", "1400", "32"},
      {"blobs-30%", "blobs", 8, "0.6", 0.3, "48,48", "120", "60", "120", "60",
       "0.12", "0.075", "600", "32"},
  };
  std::vector<CellResult> results(cells.size());
  {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= cells.size()) return;
        results[i] = run_cell(cells[i]);
      }
    };
    const unsigned n = std::min<unsigned>(cli::thread_cap(), cells.size());
    std::vector<std::thread> pool;
    for (unsigned i = 0; i + 1 < n; ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
  }

  int ordering_ok = 0;
  bool gates_ok = true, runs_ok = true;
  for (const auto& r : results) {
    const bool order = r.ag_oeu <= r.ag_ga && r.ag_oeu <= r.ag_rl;
    ordering_ok += order;
    const bool entropy = r.mean_entropy >= r.entropy_goal;
    const bool ra = r.mean_ra_drop <= 3.0;
    gates_ok = gates_ok && entropy && ra;
    runs_ok = runs_ok && r.runs_ok;
    *extra += fmt("    %-10s AG oeu %.2f ga %.2f rl %.2f %s | entropy %.3f (goal %.3f) %s | "
                  "RA drop %.2f %s | min train acc %.1f\n",
                  r.label.c_str(), r.ag_oeu, r.ag_ga, r.ag_rl, order ? "ok" : "LOST",
                  r.mean_entropy, r.entropy_goal, entropy ? "ok" : "LOW", r.mean_ra_drop,
                  ra ? "ok" : "HIGH", r.min_train_acc);
  }
  const double secs = seconds_since(t0);
  const bool pass = runs_ok && ordering_ok >= 3 && gates_ok && secs < 300.0;
  return {pass, fmt("AG ordering holds in %d/4 cells (need 3), entropy+RA gates %s; %.0f s",
                    ordering_ok, gates_ok ? "ok" : "violated", secs)};
}

// Criterion 9: ablation direction on the conflicted blobs-30% cell, plus the
// bit-identity of alpha = 0 and the no-GOP variant.
Outcome criterion9(std::string* extra) {
  const CellSpec c = {"blobs-30%", "blobs", 8, "0.6", 0.3, "48,48", "120", "60", "120", "60",
                      "0.12", "0.075", "600", "32"};
  auto ec = exp::ExperimentConfig::resolve(cell_config(c));
  const int S = 5;
  exp::ModelCache cache;
  double ag_oeu = 0, ag_no_gop = 0, ag_no_egu = 0;
  bool runs_ok = true;
  for (std::uint64_t seed = 1; seed <= S; ++seed) {
    auto o = exp::run_method(ec, unlearn::Method::oeu, seed, cache, false);
    auto ng = exp::run_method(ec, unlearn::Method::oeu_no_gop, seed, cache, false);
    auto ne = exp::run_method(ec, unlearn::Method::oeu_no_egu, seed, cache, false);
    runs_ok = runs_ok && o.ok && ng.ok && ne.ok;
    ag_oeu += o.report.ag / S;
    ag_no_gop += ng.report.ag / S;
    ag_no_egu += ne.report.ag / S;
  }
  *extra += fmt("    AG oeu %.2f vs no_gop %.2f, no_egu %.2f\n", ag_oeu, ag_no_gop, ag_no_egu);

  // alpha = 0 must reproduce oeu_no_gop bit-exactly under a shared seed
  auto prep = exp::prepare(ec, 1);
  auto orig = exp::obtain_original(ec, prep, 1, cache, true, false);
  auto ucfg = exp::unlearn_config_for(ec, unlearn::Method::oeu, 1);
  ucfg.epochs = 40;
  ucfg.projection.alpha = 0.0;
  auto a = unlearn::run_unlearn_method(orig.params, prep.split.forget, prep.split.retain,
                                       orig.cfg, ucfg);
  auto ucfg2 = ucfg;
  ucfg2.method = unlearn::Method::oeu_no_gop;
  ucfg2.projection.alpha = 1.0;  // forced to zero by the method
  auto b = unlearn::run_unlearn_method(orig.params, prep.split.forget, prep.split.retain,
                                       orig.cfg, ucfg2);
  const bool bit_identical = net::flatten(net::GradientSet{a.params.layers}) ==
                             net::flatten(net::GradientSet{b.params.layers});

  const bool pass = runs_ok && ag_oeu <= ag_no_gop && ag_oeu <= ag_no_egu && bit_identical;
  return {pass, fmt("AG oeu %.2f <= no_gop %.2f and <= no_egu %.2f; alpha=0 bit-identical: %s",
                    ag_oeu, ag_no_gop, ag_no_egu, bit_identical ? "yes" : "NO")};
}

// Criterion 10: class-wise forgetting, blobs K=8 class 3.
Outcome criterion10(std::string* extra) {
  auto kv = cfg::KvConfig::defaults();
  kv.set("data.kind", "blobs");
  kv.set("data.classes", "8");
  kv.set("data.train_n", "600");
  kv.set("data.test_n", "600");
  kv.set("data.noise", "0.6");
  kv.set("split.scenario", "classwise");
  kv.set("split.class_id", "3");
  kv.set("net.hidden", "48,48");
  kv.set("train.epochs", "120");
  kv.set("train.qat_epochs", "60");
  kv.set("retrain.epochs", "120");
  kv.set("retrain.qat_epochs", "60");
  kv.set("unlearn.batch", "32");
  kv.set("unlearn.lr", "0.075");
  kv.set("unlearn.epochs", "600");
  kv.set("unlearn.beta", "1.0");
  kv.set("unlearn.cosine", "true");
  auto ec = exp::ExperimentConfig::resolve(kv);
  exp::ModelCache cache;
  double max_fa_gap = 0, max_ra_gap = 0;
  bool ok = true;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto o = exp::run_method(ec, unlearn::Method::oeu, seed, cache, false);
    ok = ok && o.ok;
    max_fa_gap = std::max(max_fa_gap, o.report.gap_fa);
    max_ra_gap = std::max(max_ra_gap, o.report.gap_ra);
    *extra += fmt("    seed %llu: FA gap %.2f RA gap %.2f\n",
                  static_cast<unsigned long long>(seed), o.report.gap_fa, o.report.gap_ra);
  }
  const bool pass = ok && max_fa_gap <= 5.0 && max_ra_gap <= 3.0;
  return {pass, fmt("max FA gap %.2f (tol 5), max RA gap %.2f (tol 3) over 3 seeds",
                    max_fa_gap, max_ra_gap)};
}

// Criterion 11: exhaustive-threshold oracle equality for every fitted
// attacker plus the retrained-model symmetry check.
Outcome criterion11(std::string* extra) {
  auto kv = cfg::KvConfig::defaults();
  kv.set("data.kind", "blobs");
  kv.set("data.classes", "8");
  kv.set("data.train_n", "1000");
  kv.set("data.test_n", "600");
  kv.set("data.noise", "0.6");
  kv.set("split.ratio", "0.3");
  kv.set("net.hidden", "48,48");
  kv.set("train.epochs", "120");
  kv.set("train.qat_epochs", "60");
  kv.set("retrain.epochs", "120");
  kv.set("retrain.qat_epochs", "60");
  kv.set("unlearn.epochs", "300");
  kv.set("unlearn.lr", "0.075");
  kv.set("unlearn.beta", "0.12");
  kv.set("unlearn.cosine", "true");
  auto ec = exp::ExperimentConfig::resolve(kv);

  auto oracle_best = [](std::span<const double> member, std::span<const double> nonmember) {
    std::vector<double> all(member.begin(), member.end());
    all.insert(all.end(), nonmember.begin(), nonmember.end());
    double best = -1.0;
    for (double thr : metrics::candidate_thresholds(all)) {
      std::size_t tp = 0, tn = 0;
      for (double cv : member)
        if (cv >= thr) ++tp;
      for (double cv : nonmember)
        if (cv < thr) ++tn;
      best = std::max(best, 0.5 * (double(tp) / member.size() + double(tn) / nonmember.size()));
    }
    return best;
  };

  exp::ModelCache cache;
  double worst_fit_gap = 0.0;
  double sym_sum = 0.0, sym_max = 0.0;
  int attackers = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto prep = exp::prepare(ec, seed);
    auto orig = exp::obtain_original(ec, prep, seed, cache, true, false);
    auto retr = exp::obtain_retrain(ec, prep, seed, cache, false);
    auto ucfg = exp::unlearn_config_for(ec, unlearn::Method::oeu, seed);
    auto unlearned = unlearn::run_unlearn_method(orig.params, prep.split.forget,
                                                 prep.split.retain, orig.cfg, ucfg);

    struct Model {
      const net::ParameterSet* p;
      const net::NetConfig* c;
    };
    for (auto m : {Model{&orig.params, &orig.cfg}, Model{&retr.params, &retr.cfg},
                   Model{&unlearned.params, &orig.cfg}}) {
      auto member = metrics::max_confidences(*m.p, prep.member_probe, *m.c);
      auto nonmember = metrics::max_confidences(*m.p, prep.nonmember_probe, *m.c);
      auto fit = metrics::fit_confidence_threshold(member, nonmember);
      const double oracle = oracle_best(member, nonmember);
      worst_fit_gap = std::max(worst_fit_gap, std::abs(fit.balanced_accuracy - oracle));
      ++attackers;
    }

    // symmetry: for the retrained model, D_f and a fresh test split are
    // exchangeable; the attacker's non-member rates must be close
    auto member = metrics::max_confidences(retr.params, prep.member_probe, retr.cfg);
    auto nonmember = metrics::max_confidences(retr.params, prep.nonmember_probe, retr.cfg);
    auto fit = metrics::fit_confidence_threshold(member, nonmember);
    auto rate_below = [&](const data::LabeledSet& s) {
      auto conf = metrics::max_confidences(retr.params, s, retr.cfg);
      std::size_t n = 0;
      for (double cv : conf)
        if (cv < fit.threshold) ++n;
      return 100.0 * double(n) / double(conf.size());
    };
    const double diff = std::abs(rate_below(prep.split.forget) - rate_below(prep.fresh_test));
    sym_sum += diff / 3.0;
    sym_max = std::max(sym_max, diff);
    *extra += fmt("    seed %llu: symmetry diff %.2f points\n",
                  static_cast<unsigned long long>(seed), diff);
  }
  const bool pass = worst_fit_gap <= 1e-12 && sym_sum <= 10.0;
  return {pass, fmt("fit == exhaustive oracle on %d attackers (max gap %.1e); mean symmetry "
                    "diff %.2f points (tol 10, max %.2f)",
                    attackers, worst_fit_gap, sym_sum, sym_max)};
}

}  // namespace

int main() {
  struct Entry {
    int id;
    const char* name;
    Outcome (*fn)();
    Outcome (*fn_extra)(std::string*);
  };
  const std::vector<Entry> entries = {
      {1, "orthogonality of layer-wise and global projection", criterion1, nullptr},
      {2, "Theorem-4 identity <g_f,g_f_perp> = ||g_f||^2 sin^2(phi)", criterion2, nullptr},
      {3, "first-order retain preservation (quadratic vs linear)", criterion3, nullptr},
      {4, "entropy and KL-to-uniform closed forms + duality", criterion4, nullptr},
      {5, "expected Random-Label target KL bias (Monte Carlo)", criterion5, nullptr},
      {6, "finite-difference gradient correctness incl. STE oracle", criterion6, nullptr},
      {7, "quantizer contract on random values", criterion7, nullptr},
      {8, "end-to-end comparative (AG ordering, entropy, RA drop)", nullptr, criterion8},
      {9, "ablation direction (no-GOP, no-EGU) + alpha-0 identity", nullptr, criterion9},
      {10, "class-wise forgetting gaps", nullptr, criterion10},
      {11, "MIA attacker oracle equality + retrain symmetry", nullptr, criterion11},
  };

  const auto t0 = Clock::now();
  int failures = 0;
  for (const auto& e : entries) {
    std::string extra;
    Outcome r = e.fn ? e.fn() : e.fn_extra(&extra);
    std::printf("[%s] criterion %2d: %s — %s\n", r.pass ? "PASS" : "FAIL", e.id, e.name,
                r.detail.c_str());
    if (!extra.empty()) std::fputs(extra.c_str(), stdout);
    std::fflush(stdout);
    if (!r.pass) ++failures;
  }
  std::printf("%d/11 criteria passed in %.0f s\n", 11 - failures,
              seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
