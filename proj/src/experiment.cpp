#include "unlearnq/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>
#include <sstream>

#include "unlearnq/checkpoint.hpp"
#include "unlearnq/losses.hpp"

namespace unlearnq::exp {

namespace {

constexpr std::uint64_t kDataSalt = 0x6a09e667f3bcc908ull;
constexpr std::uint64_t kHoldoutSalt = 0xbb67ae8584caa73bull;
constexpr std::uint64_t kSplitSalt = 0x3c6ef372fe94f82bull;
constexpr std::uint64_t kProbeSalt = 0xa54ff53a5f1d36f1ull;
constexpr std::uint64_t kTrainSalt = 0x510e527fade682d1ull;
constexpr std::uint64_t kRetrainSalt = 0x9b05688c2b3e6c1full;

std::string train_spec_string(const unlearn::TrainConfig& tc) {
  std::ostringstream os;
  os << "epochs=" << tc.epochs << ";qat=" << tc.qat_epochs << ";lr=" << tc.lr
     << ";cosine=" << tc.cosine << ";batch=" << tc.batch;
  return os.str();
}

std::string net_spec_string(const net::NetConfig& cfg) {
  std::ostringstream os;
  os << "widths=";
  for (std::size_t i = 0; i < cfg.widths.size(); ++i) os << (i ? "," : "") << cfg.widths[i];
  os << ";qw=" << cfg.quant.weights << ";qa=" << cfg.quant.activations
     << ";bits=" << cfg.quant.bits;
  return os.str();
}

}  // namespace

ExperimentConfig ExperimentConfig::resolve(const cfg::KvConfig& kv) {
  ExperimentConfig ec;
  ec.kv = kv;
  ec.hash = kv.hash();

  ec.kind = data::kind_from_string(kv.str("data.kind"));
  ec.classes = kv.integer("data.classes");
  ec.train_n = static_cast<std::size_t>(kv.integer("data.train_n"));
  ec.test_n = static_cast<std::size_t>(kv.integer("data.test_n"));
  ec.noise = kv.real("data.noise");
  ec.data_file = kv.str("data.file");

  const std::string scenario = kv.str("split.scenario");
  if (scenario == "random")
    ec.scenario = data::Scenario::random;
  else if (scenario == "classwise")
    ec.scenario = data::Scenario::classwise;
  else
    throw cfg::ConfigError("split.scenario must be random or classwise, got '" + scenario + "'");
  ec.ratio = kv.real("split.ratio");
  ec.class_id = kv.integer("split.class_id");

  ec.hidden = kv.int_list("net.hidden");

  ec.quant_enabled = kv.boolean("quant.enabled");
  ec.bits = kv.integer("quant.bits");
  ec.quant_weights = kv.boolean("quant.weights");
  ec.quant_activations = kv.boolean("quant.activations");

  ec.train.epochs = kv.integer("train.epochs");
  ec.train.qat_epochs = kv.integer("train.qat_epochs");
  ec.train.lr = kv.real("train.lr");
  ec.train.cosine = kv.boolean("train.cosine");
  ec.train.batch = kv.integer("train.batch");
  ec.train.validate();

  ec.retrain_cfg = ec.train;
  ec.retrain_cfg.epochs = kv.integer("retrain.epochs");
  ec.retrain_cfg.qat_epochs = kv.integer("retrain.qat_epochs");
  ec.retrain_cfg.validate();

  ec.seed = kv.uinteger("seed");
  ec.out = kv.str("out");
  return ec;
}

unlearn::UnlearnConfig unlearn_config_for(const ExperimentConfig& ec, unlearn::Method method,
                                          std::uint64_t seed) {
  const cfg::KvConfig& kv = ec.kv;
  unlearn::UnlearnConfig u;
  u.method = method;
  u.seed = seed;

  const std::string name = unlearn::to_string(method);
  auto pick_int = [&](const char* field, int fallback) {
    const std::string key = name + "." + field;
    return kv.has(key) ? kv.integer(key) : fallback;
  };
  auto pick_real = [&](const char* field, double fallback) {
    const std::string key = name + "." + field;
    return kv.has(key) ? kv.real(key) : fallback;
  };

  u.epochs = kv.integer("unlearn.epochs");
  u.lr = kv.real("unlearn.lr");
  u.batch = kv.integer("unlearn.batch");
  if (unlearn::is_baseline(method)) {
    u.epochs = pick_int("epochs", u.epochs);
    u.lr = pick_real("lr", u.lr);
    u.batch = pick_int("batch", u.batch);
  }
  u.cosine = kv.boolean("unlearn.cosine");
  u.beta = kv.real("unlearn.beta");
  u.full_batch = kv.boolean("unlearn.full_batch");
  u.projection.alpha = kv.real("unlearn.alpha");
  u.projection.epsilon = kv.real("unlearn.epsilon");
  const std::string mode = kv.str("unlearn.mode");
  if (mode == "layerwise")
    u.projection.mode = gop::Mode::layerwise;
  else if (mode == "global")
    u.projection.mode = gop::Mode::global;
  else
    throw cfg::ConfigError("unlearn.mode must be layerwise or global, got '" + mode + "'");
  u.validate();
  return u;
}

Prepared prepare(const ExperimentConfig& ec, std::uint64_t seed) {
  Prepared prep;

  data::LabeledSet pool;
  std::size_t n_test = ec.test_n;
  if (!ec.data_file.empty()) {
    pool = data::load_dataset(ec.data_file);
    n_test = std::max<std::size_t>(1, pool.size() / 4);
  } else {
    pool = data::gen_synthetic(ec.kind, ec.classes, ec.train_n + ec.test_n, ec.noise,
                               seed ^ kDataSalt);
  }

  auto [train, test] = data::holdout_n(pool, n_test, seed ^ kHoldoutSalt);
  if (ec.scenario == data::Scenario::random)
    prep.split = data::split_random(train, ec.ratio, seed ^ kSplitSalt);
  else
    prep.split = data::split_classwise(train, ec.class_id, seed ^ kSplitSalt);
  prep.split.test = test;

  // MIA probes: one half of test fits the attacker as non-members, the other
  // half stays fresh for symmetry checks; members come from a retain slice.
  const std::size_t half = test.size() / 2;
  auto [fresh, probe] = data::holdout_n(test, std::max<std::size_t>(1, half), seed ^ kProbeSalt);
  prep.nonmember_probe = probe;
  prep.fresh_test = fresh;

  const std::size_t m = std::min(prep.split.retain.size(), prep.nonmember_probe.size());
  std::vector<std::size_t> order(prep.split.retain.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed ^ (kProbeSalt + 1));
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(std::max<std::size_t>(1, m));
  prep.member_probe =
      data::subset(prep.split.retain, order, prep.split.retain.provenance + "/member_probe");

  prep.net_template.widths.clear();
  prep.net_template.widths.push_back(static_cast<int>(pool.features.cols()));
  for (int h : ec.hidden) prep.net_template.widths.push_back(h);
  prep.net_template.widths.push_back(pool.class_count);
  prep.net_template.quant.bits = ec.bits;
  prep.net_template.quant.weights = ec.quant_enabled && ec.quant_weights;
  prep.net_template.quant.activations = ec.quant_enabled && ec.quant_activations;
  return prep;
}

TrainedModel ModelCache::get_or_compute(const std::string& key,
                                        const std::function<TrainedModel()>& compute) {
  std::shared_ptr<std::mutex> gate;
  {
    std::lock_guard lk(mu_);
    if (auto it = done_.find(key); it != done_.end()) return *it->second;
    auto [it, inserted] = building_.try_emplace(key, std::make_shared<std::mutex>());
    gate = it->second;
  }
  std::lock_guard build_lk(*gate);
  {
    std::lock_guard lk(mu_);
    if (auto it = done_.find(key); it != done_.end()) return *it->second;
  }
  auto model = std::make_shared<TrainedModel>(compute());
  {
    std::lock_guard lk(mu_);
    done_[key] = model;
  }
  return *model;
}

std::string original_cache_key(const ExperimentConfig& ec, const Prepared& prep) {
  // Training data = forget + retain; hash both parts so split identity counts.
  std::ostringstream os;
  os << "original;data=" << std::hex << data::content_hash(prep.split.forget) << ":"
     << data::content_hash(prep.split.retain) << std::dec << ";net="
     << net_spec_string(prep.net_template) << ";opt=" << train_spec_string(ec.train);
  return os.str();
}

std::string retrain_cache_key(const ExperimentConfig& ec, const Prepared& prep) {
  std::ostringstream os;
  os << "retrain;data=" << std::hex << data::content_hash(prep.split.retain) << std::dec
     << ";net=" << net_spec_string(prep.net_template) << ";opt="
     << train_spec_string(ec.retrain_cfg);
  return os.str();
}

std::filesystem::path original_checkpoint_path(const ExperimentConfig& ec, const Prepared& prep) {
  return ec.out / "cache" / ("original_" + cfg::fnv1a_hex(original_cache_key(ec, prep)) + ".ckpt");
}

std::filesystem::path retrain_checkpoint_path(const ExperimentConfig& ec, const Prepared& prep) {
  return ec.out / "cache" / ("retrain_" + cfg::fnv1a_hex(retrain_cache_key(ec, prep)) + ".ckpt");
}

namespace {

// Rebuild the full training set (forget + retain) for the original model.
data::LabeledSet concat_train(const data::Split& split) {
  const auto& a = split.forget;
  const auto& b = split.retain;
  data::LabeledSet out;
  out.class_count = a.class_count;
  out.provenance = a.provenance + "+" + b.provenance;
  out.features = Matrix(a.size() + b.size(), a.features.cols());
  out.labels.resize(a.size() + b.size());
  out.source_index.resize(a.size() + b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto src = a.features.row(i);
    std::copy(src.begin(), src.end(), out.features.row(i).begin());
    out.labels[i] = a.labels[i];
    out.source_index[i] = a.source_index.empty() ? -1 : a.source_index[i];
  }
  for (std::size_t i = 0; i < b.size(); ++i) {
    auto src = b.features.row(i);
    std::copy(src.begin(), src.end(), out.features.row(a.size() + i).begin());
    out.labels[a.size() + i] = b.labels[i];
    out.source_index[a.size() + i] = b.source_index.empty() ? -1 : b.source_index[i];
  }
  return out;
}

TrainedModel train_model(const data::LabeledSet& ds, const net::NetConfig& tmpl,
                         const unlearn::TrainConfig& tc, std::uint64_t seed,
                         const std::filesystem::path& persist_path, bool persist) {
  if (!persist_path.empty() && std::filesystem::exists(persist_path)) {
    auto ck = net::load_checkpoint(persist_path);
    TrainedModel m;
    m.params = std::move(ck.params);
    m.cfg = std::move(ck.cfg);
    m.train_accuracy = metrics::accuracy(m.params, ds, m.cfg);
    return m;
  }
  auto t0 = std::chrono::steady_clock::now();
  auto result = unlearn::train_original(ds, tmpl, tc, seed);
  TrainedModel m;
  m.params = std::move(result.params);
  m.cfg = std::move(result.cfg);
  m.train_accuracy = result.train_accuracy;
  m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                  .count();
  if (persist && !persist_path.empty()) {
    std::filesystem::create_directories(persist_path.parent_path());
    auto tmp = persist_path;
    tmp += ".tmp";
    net::save_checkpoint(tmp, m.params, m.cfg);
    std::filesystem::rename(tmp, persist_path);
  }
  return m;
}

}  // namespace

unlearn::TrainResult train_original_full(const ExperimentConfig& ec, const Prepared& prep,
                                         std::uint64_t seed) {
  return unlearn::train_original(concat_train(prep.split), prep.net_template, ec.train,
                                 seed ^ kTrainSalt);
}

TrainedModel obtain_original(const ExperimentConfig& ec, const Prepared& prep, std::uint64_t seed,
                             ModelCache& cache, bool allow_compute, bool persist) {
  const auto path = original_checkpoint_path(ec, prep);
  if (!allow_compute && !std::filesystem::exists(path))
    throw std::runtime_error("original checkpoint missing: " + path.string() +
                             " (run the train command first)");
  return cache.get_or_compute(original_cache_key(ec, prep), [&] {
    return train_model(concat_train(prep.split), prep.net_template, ec.train, seed ^ kTrainSalt,
                       path, persist);
  });
}

TrainedModel obtain_retrain(const ExperimentConfig& ec, const Prepared& prep, std::uint64_t seed,
                            ModelCache& cache, bool persist) {
  const auto path = retrain_checkpoint_path(ec, prep);
  return cache.get_or_compute(retrain_cache_key(ec, prep), [&] {
    return train_model(prep.split.retain, prep.net_template, ec.retrain_cfg,
                       seed ^ kRetrainSalt, path, persist);
  });
}

Evaluation evaluate_model(const net::ParameterSet& params, const net::NetConfig& cfg,
                          const Prepared& prep) {
  Evaluation ev;
  ev.raw.fa = metrics::accuracy(params, prep.split.forget, cfg);
  ev.raw.ra = metrics::accuracy(params, prep.split.retain, cfg);
  ev.raw.ta = metrics::accuracy(params, prep.split.test, cfg);
  ev.mia = metrics::mia_score(params, prep.split.forget, prep.nonmember_probe, prep.member_probe,
                              cfg);
  ev.raw.mia = ev.mia.score;
  return ev;
}

MethodOutcome run_method(const ExperimentConfig& ec, unlearn::Method method, std::uint64_t seed,
                         ModelCache& cache, bool persist_models, bool allow_train_original) {
  MethodOutcome out;
  out.method = method;
  out.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    Prepared prep = prepare(ec, seed);
    TrainedModel retr = obtain_retrain(ec, prep, seed, cache, persist_models);
    Evaluation retr_ev = evaluate_model(retr.params, retr.cfg, prep);

    if (method == unlearn::Method::retrain) {
      out.raw = retr_ev.raw;
      out.mia = retr_ev.mia;
      out.pre_ra = retr_ev.raw.ra;
      out.initial_forget_entropy = out.final_forget_entropy = losses::mean_prediction_entropy(
          retr.params, prep.split.forget.features, retr.cfg);
    } else {
      TrainedModel orig = obtain_original(ec, prep, seed, cache, allow_train_original,
                                          persist_models);
      out.pre_ra = metrics::accuracy(orig.params, prep.split.retain, orig.cfg);
      auto ucfg = unlearn_config_for(ec, method, seed);
      auto run = unlearn::run_unlearn_method(orig.params, prep.split.forget, prep.split.retain,
                                             orig.cfg, ucfg);
      out.trace = std::move(run.trace);
      out.initial_forget_entropy = out.trace.initial_forget_entropy;
      out.final_forget_entropy = out.trace.final_forget_entropy;
      Evaluation ev = evaluate_model(run.params, orig.cfg, prep);
      out.raw = ev.raw;
      out.mia = ev.mia;
    }
    out.report = metrics::average_gap(out.raw, retr_ev.raw);
    out.ok = true;
  } catch (const std::exception& e) {
    out.ok = false;
    out.error = e.what();
  }
  out.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace unlearnq::exp
