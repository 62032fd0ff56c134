#include "unlearnq/gop.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace unlearnq::gop {

namespace {

void check_congruent(const net::GradientSet& a, const net::GradientSet& b) {
  if (a.layers.size() != b.layers.size())
    throw std::invalid_argument("gop: gradient sets have different layer counts");
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    if (!a.layers[l].weights.same_shape(b.layers[l].weights) ||
        a.layers[l].bias.size() != b.layers[l].bias.size())
      throw std::invalid_argument("gop: gradient sets are not shape-congruent at layer " +
                                  std::to_string(l));
  }
}

}  // namespace

void ProjectionConfig::validate() const {
  if (alpha < 0.0 || alpha > 1.0)
    throw std::invalid_argument("ProjectionConfig: alpha must be in [0, 1]");
  if (!(epsilon > 0.0)) throw std::invalid_argument("ProjectionConfig: epsilon must be positive");
}

std::vector<ConstUnit> units(const net::GradientSet& g) {
  std::vector<ConstUnit> out;
  for (const net::Layer& layer : g.layers) {
    out.push_back({layer.name + ".weight", layer.weights.values()});
    out.push_back({layer.name + ".bias", layer.bias});
  }
  return out;
}

std::vector<MutUnit> units(net::GradientSet& g) {
  std::vector<MutUnit> out;
  for (net::Layer& layer : g.layers) {
    out.push_back({layer.name + ".weight", layer.weights.values()});
    out.push_back({layer.name + ".bias", layer.bias});
  }
  return out;
}

ProjectionResult project_global(const net::GradientSet& g_f, const net::GradientSet& g_r,
                                double alpha, double epsilon) {
  check_congruent(g_f, g_r);
  if (alpha < 0.0 || alpha > 1.0)
    throw std::invalid_argument("project_global: alpha must be in [0, 1]");

  ProjectionResult result;
  result.grads = g_f;

  std::vector<double> ff = net::flatten(g_f);
  std::vector<double> rr = net::flatten(g_r);
  const double nr = l2_norm(rr);
  if (nr <= epsilon) {
    result.passed_through.push_back("(global)");
    return result;
  }
  const double coeff = alpha * dot(ff, rr) / (nr * nr);
  for (std::size_t i = 0; i < ff.size(); ++i) ff[i] -= coeff * rr[i];
  result.grads = net::unflatten(ff, g_f);
  return result;
}

ProjectionResult project_layerwise(const net::GradientSet& g_f, const net::GradientSet& g_r,
                                   const ProjectionConfig& cfg) {
  check_congruent(g_f, g_r);
  cfg.validate();

  ProjectionResult result;
  result.grads = g_f;
  auto out_units = units(result.grads);
  auto f_units = units(g_f);
  auto r_units = units(g_r);

  for (std::size_t u = 0; u < f_units.size(); ++u) {
    auto f = f_units[u].v;
    auto r = r_units[u].v;
    auto o = out_units[u].v;
    if (f.empty()) continue;
    const double nf = l2_norm(f);
    const double nr = l2_norm(r);
    if (nr <= cfg.epsilon) {
      result.passed_through.push_back(f_units[u].name);
      continue;  // forgetting gradient passes through unchanged
    }
    const double inv_f = 1.0 / (nf + cfg.epsilon);
    const double inv_r = 1.0 / (nr + cfg.epsilon);
    // <g~_f, g~_r> on the normalized vectors
    double c = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) c += (f[i] * inv_f) * (r[i] * inv_r);
    for (std::size_t i = 0; i < f.size(); ++i)
      o[i] = (f[i] * inv_f - cfg.alpha * c * r[i] * inv_r) * nf;
  }
  return result;
}

ProjectionResult project(const net::GradientSet& g_f, const net::GradientSet& g_r,
                         const ProjectionConfig& cfg) {
  if (cfg.mode == Mode::global) return project_global(g_f, g_r, cfg.alpha, cfg.epsilon);
  return project_layerwise(g_f, g_r, cfg);
}

ConflictDiagnostics diagnostics(const net::GradientSet& g_f, const net::GradientSet& g_r) {
  check_congruent(g_f, g_r);
  ConflictDiagnostics d;

  auto f_units = units(g_f);
  auto r_units = units(g_r);
  for (std::size_t u = 0; u < f_units.size(); ++u) {
    UnitDiagnostics ud;
    ud.name = f_units[u].name;
    ud.inner = dot(f_units[u].v, r_units[u].v);
    ud.norm_f = l2_norm(f_units[u].v);
    ud.norm_r = l2_norm(r_units[u].v);
    if (ud.norm_f == 0.0 || ud.norm_r == 0.0) {
      ud.cosine = 0.0;
      ud.degenerate = true;
    } else {
      ud.cosine = std::clamp(ud.inner / (ud.norm_f * ud.norm_r), -1.0, 1.0);
    }
    d.units.push_back(std::move(ud));
  }

  std::vector<double> ff = net::flatten(g_f);
  std::vector<double> rr = net::flatten(g_r);
  d.inner = dot(ff, rr);
  d.norm_f = l2_norm(ff);
  d.norm_r = l2_norm(rr);
  if (d.norm_f == 0.0 || d.norm_r == 0.0) {
    d.cosine = 0.0;
    d.degenerate = true;
    d.angle = std::acos(0.0);
  } else {
    d.cosine = std::clamp(d.inner / (d.norm_f * d.norm_r), -1.0, 1.0);
    d.angle = std::acos(d.cosine);
  }

  // <g_f, g_f_perp> for the full global projection and its closed form
  // ||g_f||^2 sin^2(phi).
  if (d.norm_r > 0.0) {
    const double coeff = d.inner / (d.norm_r * d.norm_r);
    double acc = 0.0;
    for (std::size_t i = 0; i < ff.size(); ++i) acc += ff[i] * (ff[i] - coeff * rr[i]);
    d.forget_alignment = acc;
  } else {
    d.forget_alignment = d.norm_f * d.norm_f;
  }
  d.sin2_identity = d.norm_f * d.norm_f * (1.0 - d.cosine * d.cosine);
  return d;
}

}  // namespace unlearnq::gop
