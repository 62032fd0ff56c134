#include "unlearnq/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace unlearnq::cfg {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

const std::map<std::string, std::string>& default_values() {
  static const std::map<std::string, std::string> kDefaults = {
      {"data.kind", "blobs"},
      {"data.classes", "8"},
      {"data.train_n", "800"},
      {"data.test_n", "400"},
      {"data.noise", "0.5"},
      {"data.file", ""},
      {"split.scenario", "random"},
      {"split.ratio", "0.1"},
      {"split.class_id", "0"},
      {"net.hidden", "24,24"},
      {"quant.enabled", "true"},
      {"quant.bits", "4"},
      {"quant.weights", "true"},
      {"quant.activations", "true"},
      {"train.epochs", "40"},
      {"train.qat_epochs", "20"},
      {"train.lr", "0.1"},
      {"train.cosine", "true"},
      {"train.batch", "32"},
      {"retrain.epochs", "40"},
      {"retrain.qat_epochs", "20"},
      {"unlearn.method", "oeu"},
      {"unlearn.epochs", "15"},
      {"unlearn.lr", "0.05"},
      {"unlearn.cosine", "false"},
      {"unlearn.batch", "16"},
      {"unlearn.beta", "1.0"},
      {"unlearn.alpha", "1.0"},
      {"unlearn.mode", "layerwise"},
      {"unlearn.epsilon", "1e-12"},
      {"unlearn.full_batch", "false"},
      // gradient ascent destroys a small model at the default unlearning
      // rate; it gets its own much lower band
      {"ga.lr", "0.0005"},
      {"ga.epochs", "5"},
      {"seed", "1"},
      {"out", "runs"},
  };
  return kDefaults;
}

// Optional per-method overrides that fall back to unlearn.* when absent.
const std::set<std::string>& optional_keys() {
  static const std::set<std::string> kOptional = {
      "ft.lr", "ft.epochs", "ft.batch", "rl.lr", "rl.epochs", "rl.batch", "ga.batch",
  };
  return kOptional;
}

bool key_known(const std::string& key) {
  return default_values().count(key) > 0 || optional_keys().count(key) > 0;
}

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

}  // namespace

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = kFnvOffset;
  for (unsigned char c : text) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

std::string fnv1a_hex(const std::string& text) {
  static const char* kHex = "0123456789abcdef";
  std::uint64_t h = fnv1a(text);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = kHex[h & 0xf];
    h >>= 4;
  }
  return out;
}

KvConfig KvConfig::defaults() {
  KvConfig c;
  c.values_ = default_values();
  return c;
}

namespace {

KvConfig parse_stream(std::istream& is, const std::string& origin) {
  KvConfig c = KvConfig::defaults();
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value', got '" +
                        line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    if (!key_known(key))
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    c.set(key, value);
  }
  return c;
}

}  // namespace

KvConfig KvConfig::from_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path.string());
  return parse_stream(is, path.string());
}

KvConfig KvConfig::from_text(const std::string& text) {
  std::istringstream is(text);
  return parse_stream(is, "<config>");
}

void KvConfig::set(const std::string& key, const std::string& value) {
  if (!key_known(key)) throw ConfigError("unknown config key '" + key + "'");
  values_[key] = value;
}

bool KvConfig::has(const std::string& key) const { return values_.count(key) > 0; }

void KvConfig::fail(const std::string& key, const std::string& what) const {
  throw ConfigError("config key '" + key + "': " + what);
}

std::string KvConfig::str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) fail(key, "not set");
  return it->second;
}

int KvConfig::integer(const std::string& key) const {
  const std::string v = str(key);
  try {
    std::size_t pos = 0;
    int out = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return out;
  } catch (const std::exception&) {
    fail(key, "expected an integer, got '" + v + "'");
  }
}

std::uint64_t KvConfig::uinteger(const std::string& key) const {
  const std::string v = str(key);
  try {
    std::size_t pos = 0;
    unsigned long long out = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return out;
  } catch (const std::exception&) {
    fail(key, "expected a non-negative integer, got '" + v + "'");
  }
}

double KvConfig::real(const std::string& key) const {
  const std::string v = str(key);
  try {
    std::size_t pos = 0;
    double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return out;
  } catch (const std::exception&) {
    fail(key, "expected a real number, got '" + v + "'");
  }
}

bool KvConfig::boolean(const std::string& key) const {
  const std::string v = str(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(key, "expected a boolean (true/false), got '" + v + "'");
}

std::vector<int> KvConfig::int_list(const std::string& key) const {
  const std::string v = str(key);
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      std::size_t pos = 0;
      out.push_back(std::stoi(item, &pos));
      if (pos != item.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      fail(key, "expected a comma-separated integer list, got '" + v + "'");
    }
  }
  if (out.empty()) fail(key, "expected a non-empty integer list");
  return out;
}

std::string KvConfig::canonical_text() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

std::string KvConfig::hash() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    if (k == "seed" || k == "out") continue;
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return fnv1a_hex(out);
}

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      std::size_t pos = 0;
      out.push_back(std::stoull(item, &pos));
      if (pos != item.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw ConfigError("bad seed list entry '" + item + "'");
    }
  }
  return out;
}

}  // namespace unlearnq::cfg
