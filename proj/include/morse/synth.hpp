#pragma once

#include "morse/types.hpp"

#include <cstdint>
#include <filesystem>

namespace morse {

// Deterministic generator for a self-contained inductive link-prediction
// benchmark in the standard directory layout (source/train.txt,
// target/{train,valid,test}.txt). Source and target are disjoint hierarchies
// with shared relation vocabulary; relations follow local structural rules
// (parent/child axes, sibling and cousin links, depth-banded hubs), so both
// neighborhood structure and relation-incidence patterns carry signal.
// Defaults mirror the scale of a small WordNet-derived inductive split.
struct SynthConfig {
  int source_entities = 2700;
  int target_entities = 900;
  int valid_triples = 100;
  int test_triples = 188;
  std::uint64_t seed = 7;
};

void write_synthetic_benchmark(const std::filesystem::path& dir, const SynthConfig& cfg);

}  // namespace morse
