#include "unlearnq/cli.hpp"

#include <atomic>
#include <cctype>
#include <cstdlib>
#include <iostream>
#include <numeric>
#include <thread>

#include <CLI11.hpp>

#include "unlearnq/checkpoint.hpp"
#include "unlearnq/experiment.hpp"
#include "unlearnq/report.hpp"

namespace unlearnq::cli {

namespace {

namespace fs = std::filesystem;

fs::path run_dir(const exp::ExperimentConfig& ec) { return ec.out / ec.hash; }

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

int run_error(const std::string& msg) {
  std::cerr << "error: " << msg << "\n";
  return kRunError;
}

}  // namespace

unsigned thread_cap() {
  unsigned cap = std::thread::hardware_concurrency();
  if (cap == 0) cap = 1;
  if (const char* env = std::getenv("UNLEARNQ_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v >= 1) cap = std::min<long>(cap, v);
  }
  return cap;
}

int cmd_train(const cfg::KvConfig& kv, std::string* checkpoint_path_out) {
  auto ec = exp::ExperimentConfig::resolve(kv);
  try {
    exp::Prepared prep = exp::prepare(ec, ec.seed);
    auto result = exp::train_original_full(ec, prep, ec.seed);

    const fs::path ckpt = exp::original_checkpoint_path(ec, prep);
    fs::create_directories(ckpt.parent_path());
    auto tmp = ckpt;
    tmp += ".tmp";
    net::save_checkpoint(tmp, result.params, result.cfg);
    fs::rename(tmp, ckpt);

    const fs::path dir = run_dir(ec) / ("seed" + std::to_string(ec.seed));
    report::write_text_atomic(dir / "train_trace.jsonl", report::trace_jsonl(result.trace));
    char summary[256];
    std::snprintf(summary, sizeof(summary),
                  "{\"config_hash\":\"%s\",\"seed\":%llu,\"train_accuracy\":%.6f,"
                  "\"checkpoint\":\"%s\",\"wall_ms\":%.3f}\n",
                  ec.hash.c_str(), static_cast<unsigned long long>(ec.seed),
                  result.train_accuracy, ckpt.string().c_str(), result.trace.wall_ms);
    report::write_text_atomic(dir / "train_report.json", summary);

    std::cout << ckpt.string() << "\n";
    if (checkpoint_path_out) *checkpoint_path_out = ckpt.string();
    return kOk;
  } catch (const std::exception& e) {
    return run_error(e.what());
  }
}

int cmd_unlearn(const cfg::KvConfig& kv, const std::string& method_name,
                std::string* report_path_out) {
  auto ec = exp::ExperimentConfig::resolve(kv);
  unlearn::Method method;
  try {
    method = unlearn::method_from_string(method_name);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }
  exp::ModelCache cache;
  auto outcome = exp::run_method(ec, method, ec.seed, cache, /*persist_models=*/true,
                                 /*allow_train_original=*/false);

  const fs::path dir =
      run_dir(ec) / ("seed" + std::to_string(ec.seed)) / unlearn::to_string(method);
  report::write_text_atomic(dir / "report.json", report::report_json(ec, outcome));
  report::write_text_atomic(dir / "report.csv",
                            report::csv_header() + "\n" + report::csv_row(ec, outcome) + "\n");
  report::write_text_atomic(dir / "trace.jsonl", report::trace_jsonl(outcome.trace));

  if (report_path_out) *report_path_out = (dir / "report.json").string();
  if (!outcome.ok) return run_error(outcome.error);
  std::cout << (dir / "report.json").string() << "\n";
  return kOk;
}

int cmd_evaluate(const cfg::KvConfig& kv, const std::string& model_path,
                 std::string* report_path_out) {
  auto ec = exp::ExperimentConfig::resolve(kv);
  try {
    exp::Prepared prep = exp::prepare(ec, ec.seed);
    fs::path path = model_path.empty() ? exp::original_checkpoint_path(ec, prep)
                                       : fs::path(model_path);
    if (!fs::exists(path)) return run_error("model checkpoint missing: " + path.string());
    auto ck = net::load_checkpoint(path);

    exp::ModelCache cache;
    auto retr = exp::obtain_retrain(ec, prep, ec.seed, cache, /*persist=*/true);
    auto retr_ev = exp::evaluate_model(retr.params, retr.cfg, prep);
    auto ev = exp::evaluate_model(ck.params, ck.cfg, prep);

    exp::MethodOutcome outcome;
    outcome.method_label = "evaluate:" + path.stem().string();
    outcome.seed = ec.seed;
    outcome.ok = true;
    outcome.raw = ev.raw;
    outcome.mia = ev.mia;
    outcome.report = metrics::average_gap(ev.raw, retr_ev.raw);

    const fs::path dir = run_dir(ec) / ("seed" + std::to_string(ec.seed));
    const fs::path out = dir / ("evaluate_" + path.stem().string() + ".json");
    report::write_text_atomic(out, report::report_json(ec, outcome));
    std::cout << out.string() << "\n";
    if (report_path_out) *report_path_out = out.string();
    return kOk;
  } catch (const std::exception& e) {
    return run_error(e.what());
  }
}

int cmd_compare(const cfg::KvConfig& kv, const std::vector<std::string>& method_names,
                const std::vector<std::uint64_t>& seeds, std::string* table_out) {
  auto ec = exp::ExperimentConfig::resolve(kv);
  if (method_names.empty()) {
    std::cerr << "config error: compare needs at least one method\n";
    return kConfigError;
  }
  if (seeds.empty()) {
    std::cerr << "config error: compare needs at least one seed\n";
    return kConfigError;
  }
  std::vector<unlearn::Method> methods;
  try {
    for (const auto& name : method_names) methods.push_back(unlearn::method_from_string(name));
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }

  exp::ModelCache cache;
  std::vector<exp::MethodOutcome> outcomes(methods.size() * seeds.size());
  std::atomic<std::size_t> next_seed{0};
  auto worker = [&] {
    while (true) {
      const std::size_t si = next_seed.fetch_add(1);
      if (si >= seeds.size()) return;
      for (std::size_t mi = 0; mi < methods.size(); ++mi)
        outcomes[mi * seeds.size() + si] =
            exp::run_method(ec, methods[mi], seeds[si], cache, /*persist_models=*/true);
    }
  };
  const unsigned workers = std::min<unsigned>(thread_cap(), seeds.size());
  std::vector<std::thread> pool;
  for (unsigned i = 0; i + 1 < workers; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::string runs_csv = report::csv_header() + "\n";
  bool any_failure = false;
  for (const auto& o : outcomes) {
    runs_csv += report::csv_row(ec, o) + "\n";
    if (!o.ok) {
      any_failure = true;
      std::cerr << "run failed: method=" << unlearn::to_string(o.method) << " seed=" << o.seed
                << ": " << o.error << "\n";
    }
  }
  auto rows = report::summarize(outcomes);
  const std::string table = report::summary_table(rows);

  const fs::path dir = run_dir(ec);
  report::write_text_atomic(dir / "compare.csv", runs_csv);
  report::write_text_atomic(dir / "compare_summary.csv", report::summary_csv(rows));
  report::write_text_atomic(dir / "compare.txt", table);
  std::cout << table;
  std::cout << "written: " << (dir / "compare.csv").string() << "\n";
  if (table_out) *table_out = table;
  return any_failure ? kRunError : kOk;
}

int cmd_ablate(const cfg::KvConfig& kv, const std::vector<std::uint64_t>& seeds,
               std::string* table_out) {
  return cmd_compare(kv, {"oeu", "oeu_no_gop", "oeu_no_egu", "oeu_global"}, seeds, table_out);
}

int run(int argc, const char* const* argv) {
  CLI::App app{"quantization-aware machine unlearning experiments"};
  app.require_subcommand(1);

  std::string config_path, method, out_dir, seeds_csv, model_path;
  std::int64_t seed = -1;
  double alpha = -1.0, beta = -1.0;
  int bits = -1;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "experiment config file (key = value lines)");
    cmd->add_option("--seed", seed, "seed override");
    cmd->add_option("--out", out_dir, "output directory override");
    cmd->add_option("--alpha", alpha, "unlearn.alpha override");
    cmd->add_option("--beta", beta, "unlearn.beta override");
    cmd->add_option("--bits", bits, "quant.bits override");
  };

  CLI::App* train = app.add_subcommand("train", "train the original model");
  add_common(train);
  CLI::App* unlearn_cmd = app.add_subcommand("unlearn", "run one unlearning method + metrics");
  add_common(unlearn_cmd);
  unlearn_cmd->add_option("--method", method, "oeu|ft|ga|rl|retrain|oeu_no_gop|oeu_no_egu|oeu_global")
      ->required();
  CLI::App* evaluate = app.add_subcommand("evaluate", "metrics for an existing checkpoint");
  add_common(evaluate);
  evaluate->add_option("--model", model_path, "checkpoint path (default: the original model)");
  CLI::App* compare = app.add_subcommand("compare", "methods x seeds aggregate table");
  add_common(compare);
  compare->add_option("--method", method, "comma-separated method list")->required();
  compare->add_option("--seeds", seeds_csv, "comma-separated seed list");
  CLI::App* ablate = app.add_subcommand("ablate", "OEU ablation sweep (Table-2 style)");
  add_common(ablate);
  ablate->add_option("--seeds", seeds_csv, "comma-separated seed list");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigError;
  }

  cfg::KvConfig kv;
  try {
    kv = config_path.empty() ? cfg::KvConfig::defaults() : cfg::KvConfig::from_file(config_path);
    if (seed >= 0) kv.set("seed", std::to_string(seed));
    if (!out_dir.empty()) kv.set("out", out_dir);
    if (alpha >= 0.0) kv.set("unlearn.alpha", std::to_string(alpha));
    if (beta >= 0.0) kv.set("unlearn.beta", std::to_string(beta));
    if (bits >= 0) kv.set("quant.bits", std::to_string(bits));
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }

  std::vector<std::uint64_t> seeds;
  try {
    seeds = seeds_csv.empty() ? std::vector<std::uint64_t>{kv.uinteger("seed")}
                              : cfg::parse_seed_list(seeds_csv);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    if (train->parsed()) return cmd_train(kv);
    if (unlearn_cmd->parsed()) return cmd_unlearn(kv, method);
    if (evaluate->parsed()) return cmd_evaluate(kv, model_path);
    if (compare->parsed()) return cmd_compare(kv, split_csv(method), seeds);
    if (ablate->parsed()) return cmd_ablate(kv, seeds);
  } catch (const cfg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    return run_error(e.what());
  }
  return kConfigError;
}

}  // namespace unlearnq::cli
