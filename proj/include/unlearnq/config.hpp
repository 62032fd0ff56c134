#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace unlearnq::cfg {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::uint64_t fnv1a(const std::string& text);
std::string fnv1a_hex(const std::string& text);

// Flat key-value experiment configuration with dotted sections
// (data.kind, net.hidden, unlearn.alpha, ...). No nesting; values are
// plain strings parsed on demand. Unknown keys are rejected.
class KvConfig {
 public:
  // Every supported key with its default value.
  static KvConfig defaults();
  // defaults + file contents; '#' starts a comment, blank lines are skipped.
  // Raises ConfigError with a line/field diagnostic on malformed input.
  static KvConfig from_file(const std::filesystem::path& path);
  // Same grammar from an in-memory string (e.g. the config embedded in a
  // report), so any report can be re-run as-is.
  static KvConfig from_text(const std::string& text);

  void set(const std::string& key, const std::string& value);  // rejects unknown keys
  bool has(const std::string& key) const;

  std::string str(const std::string& key) const;
  int integer(const std::string& key) const;
  std::uint64_t uinteger(const std::string& key) const;
  double real(const std::string& key) const;
  bool boolean(const std::string& key) const;
  std::vector<int> int_list(const std::string& key) const;

  // Sorted key=value lines over every set key.
  std::string canonical_text() const;
  // FNV-1a 64 over the canonical text with the volatile keys (seed, out)
  // removed, so reruns and sweeps over seeds share an identity.
  std::string hash() const;

 private:
  std::map<std::string, std::string> values_;
  [[noreturn]] void fail(const std::string& key, const std::string& what) const;
};

std::vector<std::uint64_t> parse_seed_list(const std::string& csv);

}  // namespace unlearnq::cfg
