#pragma once

#include <span>
#include <vector>

#include "unlearnq/net.hpp"

namespace unlearnq::losses {

// Length-K non-negative vector summing to 1.
using ProbDist = std::vector<double>;

// Throws std::invalid_argument when p is not a probability distribution
// (negative component or sum off by more than 1e-6).
void validate_prob_dist(std::span<const double> p);

enum class Kind { entropy, forget, retain, total };

struct LossValue {
  double value = 0.0;
  Kind kind = Kind::total;
};

// -sum p log p, natural log, 0 log 0 := 0. Result lies in [0, log K].
double entropy(std::span<const double> p);

// sum p log(p K), 0 log 0 := 0. Non-negative; entropy + kl_to_uniform == log K.
double kl_to_uniform(std::span<const double> p);

// Mean over the batch of sum_k p log p (negative entropy); in [-log K, 0].
LossValue forget_loss(const net::ParameterSet& params, const net::Batch& forget_batch,
                      const net::NetConfig& cfg);

// Mean cross-entropy -log p(y|x); non-negative.
LossValue retain_loss(const net::ParameterSet& params, const net::Batch& retain_batch,
                      const net::NetConfig& cfg);

// forget + beta * retain, beta >= 0.
double total_loss(double forget, double retain, double beta);

// Mean prediction entropy over a feature matrix; evaluation helper used by
// the unlearning drivers and reports.
double mean_prediction_entropy(const net::ParameterSet& params, const Matrix& x,
                               const net::NetConfig& cfg);

}  // namespace unlearnq::losses
