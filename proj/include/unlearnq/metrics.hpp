#pragma once

#include <span>
#include <string>
#include <vector>

#include "unlearnq/data.hpp"
#include "unlearnq/net.hpp"

namespace unlearnq::metrics {

struct RawMetrics {
  double fa = 0.0;
  double ra = 0.0;
  double ta = 0.0;
  double mia = 0.0;
};

struct MetricsReport {
  double fa = 0.0, ra = 0.0, ta = 0.0, mia = 0.0;
  double gap_fa = 0.0, gap_ra = 0.0, gap_ta = 0.0, gap_mia = 0.0;
  double ag = 0.0;  // mean of the four gaps
};

// 100 * argmax-correct / N; argmax ties break toward the lowest class index.
double accuracy(const net::ParameterSet& params, const data::LabeledSet& set,
                const net::NetConfig& cfg);

// argmax row labels under the model, same tie-break.
std::vector<int> predict(const net::ParameterSet& params, const Matrix& x,
                         const net::NetConfig& cfg);

// Max-softmax confidence per sample.
std::vector<double> max_confidences(const net::ParameterSet& params, const data::LabeledSet& set,
                                    const net::NetConfig& cfg);

struct ThresholdFit {
  double threshold = 0.0;
  double balanced_accuracy = 0.5;
  bool degenerate = false;  // all confidences identical
};

// Candidate thresholds: midpoints of adjacent distinct sorted confidences,
// plus one sentinel below the minimum and one above the maximum.
std::vector<double> candidate_thresholds(std::span<const double> confidences);

// Classify member iff confidence >= threshold; maximize balanced accuracy
// (mean of member and non-member recall) over all candidates. Ties pick the
// lowest threshold.
ThresholdFit fit_confidence_threshold(std::span<const double> member_conf,
                                      std::span<const double> nonmember_conf);

struct MiaResult {
  double score = 50.0;  // % of the forget set classified NON-member
  double threshold = 0.0;
  double balanced_accuracy = 0.5;
  bool degenerate = false;
};

// Confidence-threshold membership attacker (MIA-efficacy convention: higher
// score means the forget set looks forgotten). member_probe must never be
// used for attacker evaluation.
MiaResult mia_score(const net::ParameterSet& params, const data::LabeledSet& forget,
                    const data::LabeledSet& nonmember_probe, const data::LabeledSet& member_probe,
                    const net::NetConfig& cfg);

MetricsReport average_gap(const RawMetrics& method, const RawMetrics& retrain);

}  // namespace unlearnq::metrics
