#include "unlearnq/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

#include "unlearnq/quant.hpp"

namespace unlearnq::data {

Kind kind_from_string(const std::string& s) {
  if (s == "blobs") return Kind::blobs;
  if (s == "moons") return Kind::moons;
  if (s == "rings") return Kind::rings;
  throw std::invalid_argument("unknown dataset kind '" + s + "' (expected blobs|moons|rings)");
}

std::string to_string(Kind k) {
  switch (k) {
    case Kind::blobs: return "blobs";
    case Kind::moons: return "moons";
    case Kind::rings: return "rings";
  }
  return "?";
}

std::string to_string(Scenario s) { return s == Scenario::random ? "random" : "classwise"; }

void LabeledSet::validate() const {
  if (labels.empty()) throw std::invalid_argument("LabeledSet: empty");
  if (features.rows() != labels.size())
    throw std::invalid_argument("LabeledSet: feature/label count mismatch");
  if (class_count < 2) throw std::invalid_argument("LabeledSet: class_count must be >= 2");
  for (int y : labels)
    if (y < 0 || y >= class_count)
      throw std::invalid_argument("LabeledSet: label " + std::to_string(y) + " out of range");
  if (!all_finite(features.values()))
    throw std::invalid_argument("LabeledSet: non-finite feature");
  if (!source_index.empty() && source_index.size() != labels.size())
    throw std::invalid_argument("LabeledSet: source_index size mismatch");
}

LabeledSet gen_synthetic(Kind kind, int k, std::size_t n, double noise, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("gen_synthetic: K must be >= 2");
  if (n < static_cast<std::size_t>(k)) throw std::invalid_argument("gen_synthetic: N must be >= K");
  if (kind == Kind::moons && k != 2)
    throw std::invalid_argument("gen_synthetic: moons requires K = 2, got K = " +
                                std::to_string(k));
  if (noise < 0.0) throw std::invalid_argument("gen_synthetic: noise must be >= 0");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  LabeledSet s;
  s.class_count = k;
  s.features = Matrix(n, 2);
  s.labels.resize(n);
  s.source_index.resize(n);
  s.provenance = to_string(kind) + "(K=" + std::to_string(k) + ",N=" + std::to_string(n) +
                 ",noise=" + std::to_string(noise) + ",seed=" + std::to_string(seed) + ")";

  constexpr double kBlobRadius = 4.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % static_cast<std::size_t>(k));
    s.labels[i] = label;
    s.source_index[i] = static_cast<std::int64_t>(i);
    auto row = s.features.row(i);
    switch (kind) {
      case Kind::blobs: {
        const double ang = 2.0 * std::numbers::pi * label / k;
        row[0] = kBlobRadius * std::cos(ang) + noise * gauss(rng);
        row[1] = kBlobRadius * std::sin(ang) + noise * gauss(rng);
        break;
      }
      case Kind::moons: {
        const double t = std::numbers::pi * unit(rng);
        if (label == 0) {
          row[0] = std::cos(t);
          row[1] = std::sin(t);
        } else {
          row[0] = 1.0 - std::cos(t);
          row[1] = 0.5 - std::sin(t);
        }
        row[0] += noise * gauss(rng);
        row[1] += noise * gauss(rng);
        break;
      }
      case Kind::rings: {
        const double theta = 2.0 * std::numbers::pi * unit(rng);
        const double r = static_cast<double>(label + 1) + noise * gauss(rng);
        row[0] = r * std::cos(theta);
        row[1] = r * std::sin(theta);
        break;
      }
    }
  }
  return s;
}

LabeledSet subset(const LabeledSet& s, std::span<const std::size_t> idx, std::string provenance) {
  LabeledSet out;
  out.class_count = s.class_count;
  out.provenance = std::move(provenance);
  out.features = Matrix(idx.size(), s.features.cols());
  out.labels.resize(idx.size());
  out.source_index.resize(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const std::size_t j = idx[i];
    if (j >= s.size()) throw std::invalid_argument("subset: index out of range");
    auto src = s.features.row(j);
    std::copy(src.begin(), src.end(), out.features.row(i).begin());
    out.labels[i] = s.labels[j];
    out.source_index[i] =
        s.source_index.empty() ? static_cast<std::int64_t>(j) : s.source_index[j];
  }
  return out;
}

std::pair<LabeledSet, LabeledSet> holdout_n(const LabeledSet& all, std::size_t n_test,
                                            std::uint64_t seed) {
  all.validate();
  const std::size_t n = all.size();
  if (n_test == 0 || n_test >= n) throw std::invalid_argument("holdout: degenerate test size");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::size_t> test_idx(order.begin(), order.begin() + n_test);
  std::vector<std::size_t> train_idx(order.begin() + n_test, order.end());
  return {subset(all, train_idx, all.provenance + "/train"),
          subset(all, test_idx, all.provenance + "/test")};
}

std::pair<LabeledSet, LabeledSet> holdout(const LabeledSet& all, double test_fraction,
                                          std::uint64_t seed) {
  if (test_fraction <= 0.0 || test_fraction >= 1.0)
    throw std::invalid_argument("holdout: test_fraction must be in (0, 1)");
  const auto n_test =
      static_cast<std::size_t>(quant::round_half_to_even(test_fraction * all.size()));
  return holdout_n(all, n_test, seed);
}

Split split_random(const LabeledSet& train, double ratio, std::uint64_t seed) {
  train.validate();
  if (ratio <= 0.0 || ratio >= 1.0)
    throw std::invalid_argument("split_random: ratio must be in (0, 1)");
  const std::size_t n = train.size();
  auto n_forget = static_cast<std::size_t>(quant::round_half_to_even(ratio * n));
  if (n_forget == 0 || n_forget >= n)
    throw std::invalid_argument("split_random: ratio " + std::to_string(ratio) +
                                " yields an empty forget or retain set for N = " +
                                std::to_string(n));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::size_t> forget_idx(order.begin(), order.begin() + n_forget);
  std::vector<std::size_t> retain_idx(order.begin() + n_forget, order.end());

  Split sp;
  sp.scenario = Scenario::random;
  sp.ratio = ratio;
  sp.forget = subset(train, forget_idx, train.provenance + "/forget");
  sp.retain = subset(train, retain_idx, train.provenance + "/retain");
  return sp;
}

Split split_classwise(const LabeledSet& train, int class_id, std::uint64_t seed) {
  (void)seed;
  train.validate();
  std::vector<std::size_t> forget_idx, retain_idx;
  for (std::size_t i = 0; i < train.size(); ++i)
    (train.labels[i] == class_id ? forget_idx : retain_idx).push_back(i);
  if (forget_idx.empty())
    throw std::invalid_argument("split_classwise: class " + std::to_string(class_id) +
                                " not present");
  if (retain_idx.empty())
    throw std::invalid_argument("split_classwise: retaining nothing (single-class data)");

  Split sp;
  sp.scenario = Scenario::classwise;
  sp.class_id = class_id;
  sp.forget = subset(train, forget_idx, train.provenance + "/forget");
  sp.retain = subset(train, retain_idx, train.provenance + "/retain");
  return sp;
}

namespace {

void put_i32(std::ostream& os, std::int32_t v) {
  auto u = static_cast<std::uint32_t>(v);
  unsigned char b[4] = {static_cast<unsigned char>(u), static_cast<unsigned char>(u >> 8),
                        static_cast<unsigned char>(u >> 16), static_cast<unsigned char>(u >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::int32_t get_i32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("dataset: truncated");
  std::uint32_t u = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                    (static_cast<std::uint32_t>(b[2]) << 16) |
                    (static_cast<std::uint32_t>(b[3]) << 24);
  return static_cast<std::int32_t>(u);
}

void put_f64(std::ostream& os, double v) {
  const auto u = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("dataset: truncated");
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(u);
}

}  // namespace

void save_dataset(const std::filesystem::path& path, const LabeledSet& s) {
  s.validate();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("dataset: cannot open for write: " + path.string());
  put_i32(os, static_cast<std::int32_t>(s.size()));
  put_i32(os, static_cast<std::int32_t>(s.features.cols()));
  put_i32(os, s.class_count);
  for (double v : s.features.values()) put_f64(os, v);
  for (int y : s.labels) put_i32(os, y);
  if (!os) throw std::runtime_error("dataset: write failed: " + path.string());
}

LabeledSet load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("dataset: cannot open: " + path.string());
  const std::int32_t n = get_i32(is);
  const std::int32_t d = get_i32(is);
  const std::int32_t k = get_i32(is);
  if (n < 1 || d < 1 || k < 2) throw std::runtime_error("dataset: implausible header");
  LabeledSet s;
  s.class_count = k;
  s.provenance = "file:" + path.string();
  s.features = Matrix(static_cast<std::size_t>(n), static_cast<std::size_t>(d));
  for (double& v : s.features.values()) v = get_f64(is);
  s.labels.resize(static_cast<std::size_t>(n));
  for (int& y : s.labels) y = get_i32(is);
  s.source_index.resize(s.labels.size());
  std::iota(s.source_index.begin(), s.source_index.end(), 0);
  s.validate();
  return s;
}

std::uint64_t content_hash(const LabeledSet& s) {
  // FNV-1a over features and labels
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 1099511628211ull;
    }
  };
  mix(s.size());
  mix(static_cast<std::uint64_t>(s.class_count));
  for (double v : s.features.values()) mix(std::bit_cast<std::uint64_t>(v));
  for (int y : s.labels) mix(static_cast<std::uint64_t>(y));
  return h;
}

}  // namespace unlearnq::data
