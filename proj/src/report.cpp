#include "unlearnq/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace unlearnq::report {

using nlohmann::json;

void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os << content;
    if (!os) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string report_json(const exp::ExperimentConfig& ec, const exp::MethodOutcome& o) {
  json j;
  j["artifact_version"] = exp::kArtifactVersion;
  j["config_hash"] = ec.hash;
  j["seed"] = o.seed;
  j["method"] = o.method_label.empty() ? unlearn::to_string(o.method) : o.method_label;
  j["ok"] = o.ok;
  if (!o.ok) j["error"] = o.error;
  j["metrics"] = {{"fa", o.raw.fa}, {"ra", o.raw.ra}, {"ta", o.raw.ta}, {"mia", o.raw.mia}};
  j["gaps"] = {{"fa", o.report.gap_fa},
               {"ra", o.report.gap_ra},
               {"ta", o.report.gap_ta},
               {"mia", o.report.gap_mia}};
  j["ag"] = o.report.ag;
  j["mia_convention"] = kMiaConvention;
  j["mia_threshold"] = o.mia.threshold;
  j["mia_balanced_accuracy"] = o.mia.balanced_accuracy;
  j["mia_degenerate"] = o.mia.degenerate;
  j["pre_unlearning_ra"] = o.pre_ra;
  j["initial_forget_entropy"] = o.initial_forget_entropy;
  j["final_forget_entropy"] = o.final_forget_entropy;
  j["wall_clock_ms"] = o.wall_ms;
  j["config"] = ec.kv.canonical_text();
  return j.dump(2) + "\n";
}

std::string csv_header() {
  return "config_hash,seed,method,fa,ra,ta,mia,gap_fa,gap_ra,gap_ta,gap_mia,ag,wall_clock_ms";
}

std::string csv_row(const exp::ExperimentConfig& ec, const exp::MethodOutcome& o) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%s,%llu,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.3f", ec.hash.c_str(),
                static_cast<unsigned long long>(o.seed),
                (o.method_label.empty() ? unlearn::to_string(o.method) : o.method_label).c_str(),
                o.raw.fa, o.raw.ra, o.raw.ta, o.raw.mia, o.report.gap_fa, o.report.gap_ra,
                o.report.gap_ta, o.report.gap_mia, o.report.ag, o.wall_ms);
  return buf;
}

std::string trace_jsonl(const unlearn::RunTrace& trace) {
  std::string out;
  for (const auto& s : trace.steps) {
    json j;
    j["epoch"] = s.epoch;
    j["step"] = s.step;
    j["lr"] = s.lr;
    j["loss_forget"] = s.loss_forget;
    j["loss_retain"] = s.loss_retain;
    j["mean_batch_entropy"] = s.mean_batch_entropy;
    j["cosine"] = s.cosine;
    j["max_unit_inner_after"] = s.max_unit_inner_after;
    j["projection_degenerate"] = s.projection_degenerate;
    j["wall_ms"] = s.wall_ms;
    out += j.dump();
    out += '\n';
  }
  json summary;
  summary["summary"] = true;
  summary["steps"] = trace.steps.size();
  summary["initial_forget_entropy"] = trace.initial_forget_entropy;
  summary["final_forget_entropy"] = trace.final_forget_entropy;
  summary["wall_ms"] = trace.wall_ms;
  out += summary.dump();
  out += '\n';
  return out;
}

std::vector<MethodSummary> summarize(const std::vector<exp::MethodOutcome>& outcomes) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const exp::MethodOutcome*>> by_method;
  for (const auto& o : outcomes) {
    const std::string name = o.method_label.empty() ? unlearn::to_string(o.method) : o.method_label;
    if (!by_method.count(name)) order.push_back(name);
    by_method[name].push_back(&o);
  }

  auto mean_std = [](const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var = xs.size() > 1 ? var / static_cast<double>(xs.size() - 1) : 0.0;
    return std::pair{mean, std::sqrt(var)};
  };

  std::vector<MethodSummary> rows;
  for (const std::string& name : order) {
    MethodSummary row;
    row.method = name;
    std::vector<double> fa, ra, ta, mia, ag;
    for (const auto* o : by_method[name]) {
      ++row.runs;
      if (!o->ok) {
        ++row.failures;
        continue;
      }
      fa.push_back(o->raw.fa);
      ra.push_back(o->raw.ra);
      ta.push_back(o->raw.ta);
      mia.push_back(o->raw.mia);
      ag.push_back(o->report.ag);
    }
    if (!ag.empty()) {
      std::tie(row.fa_mean, row.fa_std) = mean_std(fa);
      std::tie(row.ra_mean, row.ra_std) = mean_std(ra);
      std::tie(row.ta_mean, row.ta_std) = mean_std(ta);
      std::tie(row.mia_mean, row.mia_std) = mean_std(mia);
      std::tie(row.ag_mean, row.ag_std) = mean_std(ag);
    }
    rows.push_back(row);
  }

  // Mark the lowest mean AG among fully successful methods.
  const MethodSummary* best = nullptr;
  for (const auto& row : rows)
    if (row.failures == 0 && (!best || row.ag_mean < best->ag_mean)) best = &row;
  for (auto& row : rows) row.best_ag = (&row == best);
  return rows;
}

std::string summary_table(const std::vector<MethodSummary>& rows) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-12s %-16s %-16s %-16s %-16s %-16s %s\n", "method", "FA",
                "RA", "TA", "MIA", "AG", "");
  os << buf;
  for (const auto& r : rows) {
    if (r.failures == r.runs) {
      std::snprintf(buf, sizeof(buf), "%-12s FAILED (%d/%d runs failed)\n", r.method.c_str(),
                    r.failures, r.runs);
      os << buf;
      continue;
    }
    std::snprintf(buf, sizeof(buf),
                  "%-12s %7.2f +-%5.2f %7.2f +-%5.2f %7.2f +-%5.2f %7.2f +-%5.2f %7.2f +-%5.2f "
                  "%s%s\n",
                  r.method.c_str(), r.fa_mean, r.fa_std, r.ra_mean, r.ra_std, r.ta_mean, r.ta_std,
                  r.mia_mean, r.mia_std, r.ag_mean, r.ag_std, r.best_ag ? "* lowest AG" : "",
                  r.failures > 0 ? " [partial: failures flagged]" : "");
    os << buf;
  }
  return os.str();
}

std::string summary_csv(const std::vector<MethodSummary>& rows) {
  std::ostringstream os;
  os << "method,runs,failures,fa_mean,fa_std,ra_mean,ra_std,ta_mean,ta_std,mia_mean,mia_std,"
        "ag_mean,ag_std,best_ag\n";
  char buf[320];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf),
                  "%s,%d,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%d\n",
                  r.method.c_str(), r.runs, r.failures, r.fa_mean, r.fa_std, r.ra_mean, r.ra_std,
                  r.ta_mean, r.ta_std, r.mia_mean, r.mia_std, r.ag_mean, r.ag_std,
                  r.best_ag ? 1 : 0);
    os << buf;
  }
  return os.str();
}

}  // namespace unlearnq::report
