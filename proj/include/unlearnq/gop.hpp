#pragma once

#include <span>
#include <string>
#include <vector>

#include "unlearnq/net.hpp"

namespace unlearnq::gop {

enum class Mode { global, layerwise };

struct ProjectionConfig {
  Mode mode = Mode::layerwise;
  double alpha = 1.0;      // 0 = no projection, 1 = full orthogonalization
  double epsilon = 1e-12;  // numerical stability floor for norms
  void validate() const;
};

// A projection unit: each named weight matrix and each bias vector projects
// independently.
struct ConstUnit {
  std::string name;
  std::span<const double> v;
};
struct MutUnit {
  std::string name;
  std::span<double> v;
};

std::vector<ConstUnit> units(const net::GradientSet& g);
std::vector<MutUnit> units(net::GradientSet& g);

struct ProjectionResult {
  net::GradientSet grads;
  // Units whose retain gradient norm was <= epsilon; the forgetting gradient
  // passes through unchanged there.
  std::vector<std::string> passed_through;
  bool degenerate() const { return !passed_through.empty(); }
};

// g_f - alpha * (<g_f,g_r>/||g_r||^2) g_r over the flattened parameter
// vector. With ||g_r|| <= epsilon the input is returned unchanged and the
// event flagged.
ProjectionResult project_global(const net::GradientSet& g_f, const net::GradientSet& g_r,
                                double alpha, double epsilon = 1e-12);

// Per unit: normalize both gradients by (norm + epsilon), remove alpha times
// the component along the normalized retain direction, rescale by the
// original forgetting-gradient norm.
ProjectionResult project_layerwise(const net::GradientSet& g_f, const net::GradientSet& g_r,
                                   const ProjectionConfig& cfg);

ProjectionResult project(const net::GradientSet& g_f, const net::GradientSet& g_r,
                         const ProjectionConfig& cfg);

struct UnitDiagnostics {
  std::string name;
  double cosine = 0.0;
  double inner = 0.0;
  double norm_f = 0.0;
  double norm_r = 0.0;
  bool degenerate = false;  // one of the vectors is zero
};

struct ConflictDiagnostics {
  std::vector<UnitDiagnostics> units;
  // Flattened quantities.
  double cosine = 0.0;
  double inner = 0.0;
  double norm_f = 0.0;
  double norm_r = 0.0;
  double angle = 0.0;             // phi = acos(cosine)
  double forget_alignment = 0.0;  // <g_f, g_f_perp> with full global projection
  double sin2_identity = 0.0;     // ||g_f||^2 sin^2 phi; equals forget_alignment
  bool degenerate = false;
};

ConflictDiagnostics diagnostics(const net::GradientSet& g_f, const net::GradientSet& g_r);

}  // namespace unlearnq::gop
