#include "unlearnq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace unlearnq::metrics {

std::vector<int> predict(const net::ParameterSet& params, const Matrix& x,
                         const net::NetConfig& cfg) {
  Matrix logits = net::forward(params, x, cfg);
  std::vector<int> out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    // max_element returns the first maximum: lowest class index wins ties
    out[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

double accuracy(const net::ParameterSet& params, const data::LabeledSet& set,
                const net::NetConfig& cfg) {
  if (set.size() == 0) throw std::invalid_argument("accuracy: empty dataset");
  auto pred = predict(params, set.features, cfg);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (pred[i] == set.labels[i]) ++correct;
  return 100.0 * static_cast<double>(correct) / static_cast<double>(set.size());
}

std::vector<double> max_confidences(const net::ParameterSet& params, const data::LabeledSet& set,
                                    const net::NetConfig& cfg) {
  Matrix probs = net::softmax_rows(net::forward(params, set.features, cfg));
  std::vector<double> out(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    auto row = probs.row(i);
    out[i] = *std::max_element(row.begin(), row.end());
  }
  return out;
}

std::vector<double> candidate_thresholds(std::span<const double> confidences) {
  std::vector<double> sorted(confidences.begin(), confidences.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<double> out;
  if (sorted.empty()) return out;
  out.push_back(sorted.front() - 1.0);  // classify everything as member
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i)
    out.push_back(0.5 * (sorted[i] + sorted[i + 1]));
  out.push_back(sorted.back() + 1.0);  // classify everything as non-member
  return out;
}

ThresholdFit fit_confidence_threshold(std::span<const double> member_conf,
                                      std::span<const double> nonmember_conf) {
  if (member_conf.empty() || nonmember_conf.empty())
    throw std::invalid_argument("fit_confidence_threshold: empty probe set");

  std::vector<double> all(member_conf.begin(), member_conf.end());
  all.insert(all.end(), nonmember_conf.begin(), nonmember_conf.end());
  const auto [mn, mx] = std::minmax_element(all.begin(), all.end());
  if (*mn == *mx) return {*mn, 0.5, true};

  // Sorted copies let each candidate's recalls come from two binary searches.
  std::vector<double> ms(member_conf.begin(), member_conf.end());
  std::vector<double> ns(nonmember_conf.begin(), nonmember_conf.end());
  std::sort(ms.begin(), ms.end());
  std::sort(ns.begin(), ns.end());

  ThresholdFit best;
  best.balanced_accuracy = -1.0;
  for (double thr : candidate_thresholds(all)) {
    // member iff conf >= thr
    const auto m_hit = ms.end() - std::lower_bound(ms.begin(), ms.end(), thr);
    const auto n_hit = std::lower_bound(ns.begin(), ns.end(), thr) - ns.begin();
    const double tpr = static_cast<double>(m_hit) / static_cast<double>(ms.size());
    const double tnr = static_cast<double>(n_hit) / static_cast<double>(ns.size());
    const double bal = 0.5 * (tpr + tnr);
    if (bal > best.balanced_accuracy) {
      best.balanced_accuracy = bal;
      best.threshold = thr;
    }
  }
  return best;
}

MiaResult mia_score(const net::ParameterSet& params, const data::LabeledSet& forget,
                    const data::LabeledSet& nonmember_probe, const data::LabeledSet& member_probe,
                    const net::NetConfig& cfg) {
  if (forget.size() == 0 || nonmember_probe.size() == 0 || member_probe.size() == 0)
    throw std::invalid_argument("mia_score: all three sets must be nonempty");

  auto member_conf = max_confidences(params, member_probe, cfg);
  auto nonmember_conf = max_confidences(params, nonmember_probe, cfg);
  ThresholdFit fit = fit_confidence_threshold(member_conf, nonmember_conf);

  MiaResult r;
  r.threshold = fit.threshold;
  r.balanced_accuracy = fit.balanced_accuracy;
  r.degenerate = fit.degenerate;
  if (fit.degenerate) {
    r.score = 50.0;
    return r;
  }
  auto forget_conf = max_confidences(params, forget, cfg);
  std::size_t non_member = 0;
  for (double c : forget_conf)
    if (c < fit.threshold) ++non_member;
  r.score = 100.0 * static_cast<double>(non_member) / static_cast<double>(forget_conf.size());
  return r;
}

MetricsReport average_gap(const RawMetrics& method, const RawMetrics& retrain) {
  MetricsReport rep;
  rep.fa = method.fa;
  rep.ra = method.ra;
  rep.ta = method.ta;
  rep.mia = method.mia;
  rep.gap_fa = std::abs(method.fa - retrain.fa);
  rep.gap_ra = std::abs(method.ra - retrain.ra);
  rep.gap_ta = std::abs(method.ta - retrain.ta);
  rep.gap_mia = std::abs(method.mia - retrain.mia);
  rep.ag = (rep.gap_fa + rep.gap_ra + rep.gap_ta + rep.gap_mia) / 4.0;
  return rep;
}

}  // namespace unlearnq::metrics
