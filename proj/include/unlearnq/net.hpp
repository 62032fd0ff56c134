#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "unlearnq/linalg.hpp"
#include "unlearnq/quant.hpp"

namespace unlearnq::net {

// One affine layer. weights is [out x in]; bias has length out. Biases are
// kept at full precision; only weights and activations go through the fake
// quantizer.
struct Layer {
  std::string name;
  Matrix weights;
  std::vector<double> bias;
};

// Latent (full-precision shadow) parameters theta. The quantized view is
// produced on the fly during forward evaluation.
struct ParameterSet {
  std::vector<Layer> layers;
  void validate() const;
};

// Structure-matching per-layer arrays for gradients and projected variants.
struct GradientSet {
  std::vector<Layer> layers;
};

struct QuantPolicy {
  bool weights = false;
  bool activations = false;  // weight-only mode leaves this off
  int bits = 4;
  // Per-layer scales, fixed at calibration time. weight_scales[l] covers
  // layer l's weight matrix; act_scales[l] covers the input of layer l.
  std::vector<double> weight_scales;
  std::vector<double> act_scales;

  bool enabled() const { return weights || activations; }
  quant::QuantSpec weight_spec(std::size_t layer) const {
    return {bits, weight_scales.at(layer), true};
  }
  quant::QuantSpec act_spec(std::size_t layer) const { return {bits, act_scales.at(layer), true}; }
};

struct NetConfig {
  std::vector<int> widths;  // input dim, hidden widths..., class count K
  QuantPolicy quant;

  int class_count() const { return widths.back(); }
  std::size_t layer_count() const { return widths.size() - 1; }
  void validate() const;
};

// Glorot-uniform initialization: uniform(-a, a) with a = sqrt(6/(fan_in+fan_out)).
ParameterSet init_params(const NetConfig& cfg, std::uint64_t seed);

struct Batch {
  Matrix x;                 // [batch x features]
  std::vector<int> labels;  // empty for label-free losses
};

// Numerically stabilized by max-subtraction; rows are positive and sum to 1.
std::vector<double> softmax(std::span<const double> logits);
Matrix softmax_rows(const Matrix& logits);

// Forward pass to logits. When quantization is enabled every weight entering
// a matrix product lies on its QuantSpec grid.
Matrix forward(const ParameterSet& params, const Matrix& x, const NetConfig& cfg);

enum class LossKind { retain_ce, forget_entropy };

struct GradResult {
  double loss = 0.0;
  GradientSet grads;
};

// Loss value plus gradients w.r.t. the latent parameters. Gradients through
// quantize nodes follow the straight-through rule: pass inside the clamp
// range, zero outside.
GradResult grad(const ParameterSet& params, const Batch& batch, LossKind kind,
                const NetConfig& cfg);

// Fixes the quantization scales: weight scales from the trained weights,
// activation scales from one forward pass over calib_x (with weight
// quantization already applied, activations left full-precision).
void calibrate_quant(NetConfig& cfg, const ParameterSet& params, const Matrix& calib_x);

// Flatten order: layers in order, each weight matrix row-major, then its bias.
std::vector<double> flatten(const GradientSet& g);
GradientSet unflatten(std::span<const double> flat, const GradientSet& like);
std::size_t value_count(const ParameterSet& p);

GradientSet zeros_like(const ParameterSet& p);
// p += coeff * g
void axpy_params(ParameterSet& p, const GradientSet& g, double coeff);
// y += coeff * x
void axpy_grads(GradientSet& y, const GradientSet& x, double coeff);
void scale_grads(GradientSet& g, double coeff);

bool all_finite(const GradientSet& g);
bool all_finite(const ParameterSet& p);

}  // namespace unlearnq::net
