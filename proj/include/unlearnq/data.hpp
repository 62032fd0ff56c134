#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "unlearnq/linalg.hpp"

namespace unlearnq::data {

enum class Kind { blobs, moons, rings };
Kind kind_from_string(const std::string& s);
std::string to_string(Kind k);

struct LabeledSet {
  Matrix features;          // N x d
  std::vector<int> labels;  // in [0, K)
  int class_count = 0;
  std::string provenance;
  // Row index in the set this one was carved from; identity for generated
  // sets. Lets the split invariants (disjointness, union) be checked exactly.
  std::vector<std::int64_t> source_index;

  std::size_t size() const { return labels.size(); }
  void validate() const;
};

enum class Scenario { random, classwise };
std::string to_string(Scenario s);

struct Split {
  LabeledSet forget;
  LabeledSet retain;
  LabeledSet test;
  Scenario scenario = Scenario::random;
  double ratio = 0.0;  // random scenario
  int class_id = -1;   // classwise scenario
};

// Balanced synthetic generators, 2-D features. Sample i carries label i % K,
// so class counts differ by at most one and any contiguous slice stays
// roughly balanced. moons requires K == 2.
LabeledSet gen_synthetic(Kind kind, int k, std::size_t n, double noise, std::uint64_t seed);

// Seeded-shuffle holdout; returns (train, test).
std::pair<LabeledSet, LabeledSet> holdout(const LabeledSet& all, double test_fraction,
                                          std::uint64_t seed);
std::pair<LabeledSet, LabeledSet> holdout_n(const LabeledSet& all, std::size_t n_test,
                                            std::uint64_t seed);

// Seeded shuffle; |forget| = round-half-to-even(ratio * N). The test member
// of the returned Split is left empty for the caller to attach.
Split split_random(const LabeledSet& train, double ratio, std::uint64_t seed);

// forget = exactly the samples of class_id (in order), retain = the rest.
// The seed is accepted for interface uniformity; selection is deterministic.
Split split_classwise(const LabeledSet& train, int class_id, std::uint64_t seed);

LabeledSet subset(const LabeledSet& s, std::span<const std::size_t> idx, std::string provenance);

// Flat binary container: header N, d, K as little-endian int32, then
// row-major float64 features, then int32 labels.
void save_dataset(const std::filesystem::path& path, const LabeledSet& s);
LabeledSet load_dataset(const std::filesystem::path& path);

std::uint64_t content_hash(const LabeledSet& s);

}  // namespace unlearnq::data
