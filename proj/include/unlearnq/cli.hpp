#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unlearnq/config.hpp"

namespace unlearnq::cli {

inline constexpr int kOk = 0;
inline constexpr int kConfigError = 2;
inline constexpr int kRunError = 3;

// Full argv interface (subcommands train|unlearn|evaluate|compare|ablate).
int run(int argc, const char* const* argv);

// Command bodies, callable in-process by tests. Output paths land under
// <out>/<config hash>/.
int cmd_train(const cfg::KvConfig& kv, std::string* checkpoint_path_out = nullptr);
int cmd_unlearn(const cfg::KvConfig& kv, const std::string& method,
                std::string* report_path_out = nullptr);
int cmd_evaluate(const cfg::KvConfig& kv, const std::string& model_path,
                 std::string* report_path_out = nullptr);
int cmd_compare(const cfg::KvConfig& kv, const std::vector<std::string>& methods,
                const std::vector<std::uint64_t>& seeds, std::string* table_out = nullptr);
int cmd_ablate(const cfg::KvConfig& kv, const std::vector<std::uint64_t>& seeds,
               std::string* table_out = nullptr);

// UNLEARNQ_THREADS caps compare/ablate parallelism; defaults to the hardware
// concurrency.
unsigned thread_cap();

}  // namespace unlearnq::cli
