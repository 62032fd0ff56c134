#include "unlearnq/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace unlearnq::losses {

void validate_prob_dist(std::span<const double> p) {
  if (p.empty()) throw std::invalid_argument("ProbDist: empty");
  double sum = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (!std::isfinite(p[k]) || p[k] < 0.0)
      throw std::invalid_argument("ProbDist: invalid component at index " + std::to_string(k));
    sum += p[k];
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw std::invalid_argument("ProbDist: sums to " + std::to_string(sum));
}

double entropy(std::span<const double> p) {
  validate_prob_dist(p);
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

double kl_to_uniform(std::span<const double> p) {
  validate_prob_dist(p);
  const double k = static_cast<double>(p.size());
  double d = 0.0;
  for (double v : p)
    if (v > 0.0) d += v * std::log(v * k);
  return d;
}

LossValue forget_loss(const net::ParameterSet& params, const net::Batch& forget_batch,
                      const net::NetConfig& cfg) {
  if (forget_batch.x.rows() == 0) throw std::invalid_argument("forget_loss: empty batch");
  Matrix probs = net::softmax_rows(net::forward(params, forget_batch.x, cfg));
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    for (double p : probs.row(i))
      if (p > 0.0) acc += p * std::log(p);
  }
  return {acc / static_cast<double>(probs.rows()), Kind::forget};
}

LossValue retain_loss(const net::ParameterSet& params, const net::Batch& retain_batch,
                      const net::NetConfig& cfg) {
  if (retain_batch.x.rows() == 0) throw std::invalid_argument("retain_loss: empty batch");
  if (retain_batch.labels.size() != retain_batch.x.rows())
    throw std::invalid_argument("retain_loss: label count mismatch");
  const int k_classes = cfg.class_count();
  for (int y : retain_batch.labels)
    if (y < 0 || y >= k_classes)
      throw std::invalid_argument("retain_loss: label " + std::to_string(y) + " outside [0, " +
                                  std::to_string(k_classes) + ")");
  Matrix logits = net::forward(params, retain_batch.x, cfg);
  double acc = 0.0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto zi = logits.row(i);
    double m = zi[0];
    for (double v : zi) m = std::max(m, v);
    double lse = 0.0;
    for (double v : zi) lse += std::exp(v - m);
    acc += m + std::log(lse) - zi[retain_batch.labels[i]];
  }
  return {acc / static_cast<double>(logits.rows()), Kind::retain};
}

double total_loss(double forget, double retain, double beta) {
  if (beta < 0.0) throw std::invalid_argument("total_loss: beta must be >= 0");
  return forget + beta * retain;
}

double mean_prediction_entropy(const net::ParameterSet& params, const Matrix& x,
                               const net::NetConfig& cfg) {
  if (x.rows() == 0) throw std::invalid_argument("mean_prediction_entropy: empty input");
  Matrix probs = net::softmax_rows(net::forward(params, x, cfg));
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.rows(); ++i) acc += entropy(probs.row(i));
  return acc / static_cast<double>(probs.rows());
}

}  // namespace unlearnq::losses
