#include "unlearnq/net.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace unlearnq::net {

namespace {

void check_finite(const Matrix& m, const char* what) {
  if (!unlearnq::all_finite(m.values()))
    throw std::invalid_argument(std::string(what) + ": non-finite value");
}

Matrix quantize_matrix(const Matrix& m, const quant::QuantSpec& spec, quant::SteMask* mask) {
  auto q = quant::quantize(m.values(), spec);
  if (mask) *mask = std::move(q.mask);
  return Matrix(m.rows(), m.cols(), std::move(q.values));
}

// z = a * w^T + bias, a is [B x in], w is [out x in]
Matrix affine(const Matrix& a, const Matrix& w, const std::vector<double>& bias) {
  Matrix z(a.rows(), w.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ai = a.row(i);
    auto zi = z.row(i);
    for (std::size_t o = 0; o < w.rows(); ++o) zi[o] = bias[o] + dot(ai, w.row(o));
  }
  return z;
}

struct ForwardCache {
  std::vector<Matrix> act_in;                 // input to each affine, after optional act quant
  std::vector<quant::SteMask> act_mask;       // per layer, empty when act quant is off
  std::vector<Matrix> quant_weights;          // weights actually used in the products
  std::vector<quant::SteMask> weight_mask;    // per layer, empty when weight quant is off
  std::vector<Matrix> preact;                 // z per layer
};

Matrix run_forward(const ParameterSet& params, const Matrix& x, const NetConfig& cfg,
                   ForwardCache* cache) {
  const std::size_t layer_n = cfg.layer_count();
  if (params.layers.size() != layer_n)
    throw std::invalid_argument("forward: parameter layer count " +
                                std::to_string(params.layers.size()) + " does not match config " +
                                std::to_string(layer_n));
  if (x.cols() != static_cast<std::size_t>(cfg.widths.front()))
    throw std::invalid_argument("forward: feature dim " + std::to_string(x.cols()) +
                                " does not match widths[0] = " + std::to_string(cfg.widths.front()));
  check_finite(x, "forward input");

  Matrix h = x;
  for (std::size_t l = 0; l < layer_n; ++l) {
    const Layer& layer = params.layers[l];
    if (layer.weights.rows() != static_cast<std::size_t>(cfg.widths[l + 1]) ||
        layer.weights.cols() != static_cast<std::size_t>(cfg.widths[l]))
      throw std::invalid_argument("forward: layer " + std::to_string(l) + " shape mismatch");

    Matrix a = h;
    quant::SteMask amask;
    if (cfg.quant.activations) a = quantize_matrix(h, cfg.quant.act_spec(l), &amask);

    Matrix wq = layer.weights;
    quant::SteMask wmask;
    if (cfg.quant.weights) wq = quantize_matrix(layer.weights, cfg.quant.weight_spec(l), &wmask);

    Matrix z = affine(a, wq, layer.bias);
    if (cache) {
      cache->act_in.push_back(a);
      cache->act_mask.push_back(std::move(amask));
      cache->quant_weights.push_back(wq);
      cache->weight_mask.push_back(std::move(wmask));
      cache->preact.push_back(z);
    }

    if (l + 1 < layer_n) {
      h = std::move(z);
      for (double& v : h.values()) v = std::max(v, 0.0);  // ReLU
    } else {
      h = std::move(z);
    }
  }
  return h;
}

}  // namespace

void ParameterSet::validate() const {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Layer& layer = layers[l];
    if (layer.weights.rows() != layer.bias.size())
      throw std::invalid_argument("ParameterSet: layer " + std::to_string(l) +
                                  " bias length does not match weight rows");
    if (l + 1 < layers.size() && layers[l + 1].weights.cols() != layer.weights.rows())
      throw std::invalid_argument("ParameterSet: layer " + std::to_string(l + 1) +
                                  " in-dim does not compose with layer " + std::to_string(l));
    if (!unlearnq::all_finite(layer.weights.values()) || !unlearnq::all_finite(layer.bias))
      throw std::invalid_argument("ParameterSet: non-finite value in layer " + std::to_string(l));
  }
}

void NetConfig::validate() const {
  if (widths.size() < 2) throw std::invalid_argument("NetConfig: need at least one layer");
  for (int w : widths)
    if (w < 1) throw std::invalid_argument("NetConfig: widths must be positive");
  if (widths.back() < 2) throw std::invalid_argument("NetConfig: class count K must be >= 2");
  if (quant.enabled()) {
    if (quant.bits < 2) throw std::invalid_argument("NetConfig: quant bits must be >= 2");
    if (quant.weights && quant.weight_scales.size() != layer_count())
      throw std::invalid_argument("NetConfig: weight scales not calibrated");
    if (quant.activations && quant.act_scales.size() != layer_count())
      throw std::invalid_argument("NetConfig: activation scales not calibrated");
  }
}

ParameterSet init_params(const NetConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ParameterSet params;
  for (std::size_t l = 0; l + 1 < cfg.widths.size(); ++l) {
    const int fan_in = cfg.widths[l];
    const int fan_out = cfg.widths[l + 1];
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-a, a);
    Layer layer;
    layer.name = "layer" + std::to_string(l);
    layer.weights = Matrix(fan_out, fan_in);
    for (double& v : layer.weights.values()) v = dist(rng);
    layer.bias.assign(fan_out, 0.0);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("softmax: empty logits");
  double m = logits[0];
  for (double v : logits) {
    if (!std::isfinite(v)) throw std::invalid_argument("softmax: non-finite logit");
    m = std::max(m, v);
  }
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp(logits[k] - m);
    sum += p[k];
  }
  for (double& v : p) v /= sum;
  return p;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto pi = softmax(logits.row(i));
    std::copy(pi.begin(), pi.end(), p.row(i).begin());
  }
  return p;
}

Matrix forward(const ParameterSet& params, const Matrix& x, const NetConfig& cfg) {
  return run_forward(params, x, cfg, nullptr);
}

GradResult grad(const ParameterSet& params, const Batch& batch, LossKind kind,
                const NetConfig& cfg) {
  if (batch.x.rows() == 0) throw std::invalid_argument("grad: empty batch");
  const std::size_t bsz = batch.x.rows();
  const int k_classes = cfg.class_count();
  if (kind == LossKind::retain_ce) {
    if (batch.labels.size() != bsz)
      throw std::invalid_argument("grad: label count does not match batch size");
    for (int y : batch.labels)
      if (y < 0 || y >= k_classes)
        throw std::invalid_argument("grad: label " + std::to_string(y) + " outside [0, " +
                                    std::to_string(k_classes) + ")");
  }

  ForwardCache cache;
  Matrix logits = run_forward(params, batch.x, cfg, &cache);
  Matrix probs = softmax_rows(logits);

  // Loss and dL/dlogits, both already averaged over the batch.
  double loss = 0.0;
  Matrix dz(bsz, static_cast<std::size_t>(k_classes));
  const double inv_b = 1.0 / static_cast<double>(bsz);
  if (kind == LossKind::retain_ce) {
    for (std::size_t i = 0; i < bsz; ++i) {
      auto zi = logits.row(i);
      double m = *std::max_element(zi.begin(), zi.end());
      double lse = 0.0;
      for (double v : zi) lse += std::exp(v - m);
      lse = m + std::log(lse);
      loss += (lse - zi[batch.labels[i]]) * inv_b;
      for (int k = 0; k < k_classes; ++k)
        dz(i, k) = (probs(i, k) - (k == batch.labels[i] ? 1.0 : 0.0)) * inv_b;
    }
  } else {
    // mean over the batch of sum_k p log p (negative entropy)
    for (std::size_t i = 0; i < bsz; ++i) {
      double neg_h = 0.0;
      for (int k = 0; k < k_classes; ++k) {
        const double p = probs(i, k);
        if (p > 0.0) neg_h += p * std::log(p);
      }
      loss += neg_h * inv_b;
      for (int k = 0; k < k_classes; ++k) {
        const double p = probs(i, k);
        dz(i, k) = (p > 0.0) ? p * (std::log(p) - neg_h) * inv_b : 0.0;
      }
    }
  }

  GradientSet grads = zeros_like(params);
  const std::size_t layer_n = params.layers.size();
  for (std::size_t li = layer_n; li-- > 0;) {
    const Matrix& a = cache.act_in[li];
    const Matrix& wq = cache.quant_weights[li];
    Layer& g = grads.layers[li];

    // dW^q = dz^T * a; db = column sums of dz
    for (std::size_t i = 0; i < bsz; ++i) {
      auto dzi = dz.row(i);
      auto ai = a.row(i);
      for (std::size_t o = 0; o < wq.rows(); ++o) {
        const double d = dzi[o];
        if (d == 0.0) continue;
        g.bias[o] += d;
        auto grow = g.weights.row(o);
        for (std::size_t c = 0; c < ai.size(); ++c) grow[c] += d * ai[c];
      }
    }
    if (cfg.quant.weights) {
      // straight-through: latent weight gradient is the quantized-weight
      // gradient inside the clamp range, zero outside
      auto masked = quant::ste_backward(g.weights.values(), cache.weight_mask[li]);
      std::copy(masked.begin(), masked.end(), g.weights.values().begin());
    }

    if (li == 0) break;

    // da = dz * W^q, then back through activation quant and ReLU
    Matrix da(bsz, wq.cols());
    for (std::size_t i = 0; i < bsz; ++i) {
      auto dzi = dz.row(i);
      auto dai = da.row(i);
      for (std::size_t o = 0; o < wq.rows(); ++o) {
        const double d = dzi[o];
        if (d == 0.0) continue;
        auto wrow = wq.row(o);
        for (std::size_t c = 0; c < dai.size(); ++c) dai[c] += d * wrow[c];
      }
    }
    if (cfg.quant.activations) {
      auto masked = quant::ste_backward(da.values(), cache.act_mask[li]);
      std::copy(masked.begin(), masked.end(), da.values().begin());
    }
    const Matrix& zprev = cache.preact[li - 1];
    dz = Matrix(bsz, zprev.cols());
    for (std::size_t i = 0; i < dz.size(); ++i)
      dz.values()[i] = zprev.values()[i] > 0.0 ? da.values()[i] : 0.0;
  }

  return {loss, std::move(grads)};
}

void calibrate_quant(NetConfig& cfg, const ParameterSet& params, const Matrix& calib_x) {
  const std::size_t layer_n = cfg.layer_count();
  if (cfg.quant.weights) {
    cfg.quant.weight_scales.resize(layer_n);
    for (std::size_t l = 0; l < layer_n; ++l)
      cfg.quant.weight_scales[l] =
          quant::calibrate_scale(params.layers[l].weights.values(), cfg.quant.bits);
  }
  if (cfg.quant.activations) {
    if (calib_x.rows() == 0)
      throw std::invalid_argument("calibrate_quant: empty calibration batch");
    // One pass with weight quantization active, recording the input range of
    // every affine layer.
    NetConfig probe = cfg;
    probe.quant.activations = false;
    cfg.quant.act_scales.resize(layer_n);
    Matrix h = calib_x;
    for (std::size_t l = 0; l < layer_n; ++l) {
      cfg.quant.act_scales[l] = quant::calibrate_scale(h.values(), cfg.quant.bits);
      Matrix wq = params.layers[l].weights;
      if (probe.quant.weights) {
        auto q = quant::quantize(wq.values(), probe.quant.weight_spec(l));
        std::copy(q.values.begin(), q.values.end(), wq.values().begin());
      }
      Matrix z = affine(h, wq, params.layers[l].bias);
      if (l + 1 < layer_n)
        for (double& v : z.values()) v = std::max(v, 0.0);
      h = std::move(z);
    }
  }
}

std::vector<double> flatten(const GradientSet& g) {
  std::vector<double> flat;
  for (const Layer& layer : g.layers) {
    flat.insert(flat.end(), layer.weights.values().begin(), layer.weights.values().end());
    flat.insert(flat.end(), layer.bias.begin(), layer.bias.end());
  }
  return flat;
}

GradientSet unflatten(std::span<const double> flat, const GradientSet& like) {
  GradientSet out;
  std::size_t pos = 0;
  for (const Layer& layer : like.layers) {
    Layer l;
    l.name = layer.name;
    const std::size_t wn = layer.weights.size();
    if (pos + wn + layer.bias.size() > flat.size())
      throw std::invalid_argument("unflatten: flat vector too short");
    l.weights = Matrix(layer.weights.rows(), layer.weights.cols(),
                       std::vector<double>(flat.begin() + pos, flat.begin() + pos + wn));
    pos += wn;
    l.bias.assign(flat.begin() + pos, flat.begin() + pos + layer.bias.size());
    pos += layer.bias.size();
    out.layers.push_back(std::move(l));
  }
  if (pos != flat.size()) throw std::invalid_argument("unflatten: flat vector too long");
  return out;
}

std::size_t value_count(const ParameterSet& p) {
  std::size_t n = 0;
  for (const Layer& layer : p.layers) n += layer.weights.size() + layer.bias.size();
  return n;
}

GradientSet zeros_like(const ParameterSet& p) {
  GradientSet g;
  for (const Layer& layer : p.layers) {
    Layer l;
    l.name = layer.name;
    l.weights = Matrix(layer.weights.rows(), layer.weights.cols());
    l.bias.assign(layer.bias.size(), 0.0);
    g.layers.push_back(std::move(l));
  }
  return g;
}

void axpy_params(ParameterSet& p, const GradientSet& g, double coeff) {
  if (p.layers.size() != g.layers.size())
    throw std::invalid_argument("axpy_params: layer count mismatch");
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    axpy(p.layers[l].weights.values(), g.layers[l].weights.values(), coeff);
    axpy(p.layers[l].bias, g.layers[l].bias, coeff);
  }
}

void axpy_grads(GradientSet& y, const GradientSet& x, double coeff) {
  if (y.layers.size() != x.layers.size())
    throw std::invalid_argument("axpy_grads: layer count mismatch");
  for (std::size_t l = 0; l < y.layers.size(); ++l) {
    axpy(y.layers[l].weights.values(), x.layers[l].weights.values(), coeff);
    axpy(y.layers[l].bias, x.layers[l].bias, coeff);
  }
}

void scale_grads(GradientSet& g, double coeff) {
  for (Layer& layer : g.layers) {
    for (double& v : layer.weights.values()) v *= coeff;
    for (double& v : layer.bias) v *= coeff;
  }
}

bool all_finite(const GradientSet& g) {
  for (const Layer& layer : g.layers)
    if (!unlearnq::all_finite(layer.weights.values()) || !unlearnq::all_finite(layer.bias))
      return false;
  return true;
}

bool all_finite(const ParameterSet& p) {
  for (const Layer& layer : p.layers)
    if (!unlearnq::all_finite(layer.weights.values()) || !unlearnq::all_finite(layer.bias))
      return false;
  return true;
}

}  // namespace unlearnq::net
