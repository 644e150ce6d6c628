#include "morse/synth.hpp"

#include "morse/kg.hpp"
#include "morse/rng.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace morse {

namespace {

const char* kRelationNames[] = {
    "hypernym", "derivation", "meronym", "similar",  "instance",
    "also_see", "group",      "domain",  "antonym",
};

struct LabeledTriple {
  int head;
  int relation;
  int tail;
};

struct Hierarchy {
  std::vector<int> parent;  // -1 for the root
  std::vector<int> depth;
  std::vector<std::vector<int>> children;
};

Hierarchy grow_tree(int n, Rng& rng) {
  Hierarchy h;
  h.parent.assign(std::size_t(n), -1);
  h.depth.assign(std::size_t(n), 0);
  h.children.resize(std::size_t(n));
  for (int i = 1; i < n; ++i) {
    // Recent-biased attachment keeps the hierarchy deep.
    int p;
    if (rng.uniform() < 0.55) {
      const int lo = std::max(0, i - 40);
      p = lo + int(rng.below(std::uint64_t(i - lo)));
    } else {
      p = int(rng.below(std::uint64_t(i)));
    }
    h.parent[std::size_t(i)] = p;
    h.depth[std::size_t(i)] = h.depth[std::size_t(p)] + 1;
    h.children[std::size_t(p)].push_back(i);
  }
  return h;
}

// Structural relation rules over one hierarchy. Every non-root node gets its
// hypernym edge; the remaining relations fire probabilistically so relation
// incidence varies by role (leaf, hub, shallow node).
std::vector<LabeledTriple> generate_triples(const Hierarchy& h, int n, Rng& rng) {
  std::vector<LabeledTriple> triples;
  auto sibling_of = [&](int i) -> int {
    const int p = h.parent[std::size_t(i)];
    if (p < 0) return -1;
    const auto& sibs = h.children[std::size_t(p)];
    if (sibs.size() < 2) return -1;
    int j = i;
    while (j == i) j = sibs[std::size_t(rng.below(sibs.size()))];
    return j;
  };
  auto cousin_of = [&](int i) -> int {
    const int p = h.parent[std::size_t(i)];
    if (p < 0) return -1;
    const int g = h.parent[std::size_t(p)];
    if (g < 0) return -1;
    const auto& uncles = h.children[std::size_t(g)];
    const int u = uncles[std::size_t(rng.below(uncles.size()))];
    const auto& cousins = h.children[std::size_t(u)];
    if (cousins.empty()) return -1;
    const int j = cousins[std::size_t(rng.below(cousins.size()))];
    return j == i ? -1 : j;
  };

  for (int i = 0; i < n; ++i) {
    const int p = h.parent[std::size_t(i)];
    if (p >= 0) triples.push_back({i, 0, p});  // hypernym: child -> parent

    if (p >= 0 && rng.uniform() < 0.35) {
      const int j = sibling_of(i);
      if (j >= 0) triples.push_back({i, 1, j});  // derivation: sibling link
    }
    if (p >= 0 && rng.uniform() < 0.25) {
      triples.push_back({p, 2, i});  // meronym: parent -> child
    }
    if (rng.uniform() < 0.25) {
      const int j = cousin_of(i);
      if (j >= 0) triples.push_back({i, 3, j});  // similar: cousin link
    }
    if (h.children[std::size_t(i)].empty() && p >= 0 && rng.uniform() < 0.3) {
      const int g = h.parent[std::size_t(p)];
      if (g >= 0) triples.push_back({i, 4, g});  // instance: leaf -> grandparent
    }
    if (rng.uniform() < 0.2) {
      // also_see: short stroll up then down.
      int a = i;
      for (int up = 0; up < 2 && h.parent[std::size_t(a)] >= 0; ++up) {
        a = h.parent[std::size_t(a)];
      }
      int j = a;
      for (int down = 0; down < 2 && !h.children[std::size_t(j)].empty(); ++down) {
        const auto& c = h.children[std::size_t(j)];
        j = c[std::size_t(rng.below(c.size()))];
      }
      if (j != i) triples.push_back({i, 5, j});
    }
    if (p >= 0 && rng.uniform() < 0.12) {
      const int j = sibling_of(i);
      if (j >= 0 && (i & 1) == (j & 1)) triples.push_back({i, 6, j});  // group
    }
    if (h.depth[std::size_t(i)] >= 3 && rng.uniform() < 0.12) {
      int a = i;
      while (h.depth[std::size_t(a)] > 2) a = h.parent[std::size_t(a)];
      triples.push_back({a, 7, i});  // domain: shallow hub -> descendant
    }
    if (rng.uniform() < 0.05) {
      const int j = int(rng.below(std::uint64_t(n)));
      if (j != i && h.depth[std::size_t(j)] == h.depth[std::size_t(i)]) {
        triples.push_back({i, 8, j});  // antonym: matched-depth noise
      }
    }
  }
  return triples;
}

// Uniformly holds out `count` triples whose removal keeps every endpoint with
// at least one remaining support occurrence.
std::vector<std::size_t> hold_out(const std::vector<LabeledTriple>& triples, int n,
                                  std::size_t count, Rng& rng) {
  std::vector<int> degree(std::size_t(n), 0);
  for (const LabeledTriple& t : triples) {
    degree[std::size_t(t.head)]++;
    degree[std::size_t(t.tail)]++;
  }
  std::vector<std::size_t> order(triples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  std::vector<std::size_t> held;
  for (std::size_t i : order) {
    if (held.size() >= count) break;
    const LabeledTriple& t = triples[i];
    const int head_need = t.head == t.tail ? 2 : 1;
    if (degree[std::size_t(t.head)] - head_need < 1) continue;
    if (t.head != t.tail && degree[std::size_t(t.tail)] - 1 < 1) continue;
    degree[std::size_t(t.head)] -= head_need;
    if (t.head != t.tail) degree[std::size_t(t.tail)] -= 1;
    held.push_back(i);
  }
  if (held.size() < count) {
    throw DataError("synthetic benchmark: could not hold out enough triples");
  }
  return held;
}

void write_triples(const std::filesystem::path& path,
                   const std::vector<LabeledTriple>& triples,
                   const std::vector<std::size_t>& subset, const std::string& prefix) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::size_t i : subset) {
    const LabeledTriple& t = triples[i];
    out << prefix << t.head << '\t' << kRelationNames[t.relation] << '\t' << prefix
        << t.tail << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace

void write_synthetic_benchmark(const std::filesystem::path& dir,
                               const SynthConfig& cfg) {
  if (cfg.source_entities < 10 || cfg.target_entities < 10) {
    throw ConfigError("synthetic benchmark: entity counts must be >= 10");
  }
  if (cfg.valid_triples < 1 || cfg.test_triples < 1) {
    throw ConfigError("synthetic benchmark: held-out counts must be >= 1");
  }

  std::filesystem::create_directories(dir / "source");
  std::filesystem::create_directories(dir / "target");

  std::set<int> source_relations;
  {
    Rng rng(derive_seed(cfg.seed, 0x50c5));
    const Hierarchy tree = grow_tree(cfg.source_entities, rng);
    const auto triples = generate_triples(tree, cfg.source_entities, rng);
    for (const LabeledTriple& t : triples) source_relations.insert(t.relation);
    std::vector<std::size_t> all(triples.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    write_triples(dir / "source" / "train.txt", triples, all, "src_e");
  }
  {
    Rng rng(derive_seed(cfg.seed, 0x7a26));
    const Hierarchy tree = grow_tree(cfg.target_entities, rng);
    auto triples = generate_triples(tree, cfg.target_entities, rng);
    // Target relations must stay inside the source vocabulary.
    std::erase_if(triples, [&](const LabeledTriple& t) {
      return source_relations.count(t.relation) == 0;
    });
    const std::size_t held_count =
        std::size_t(cfg.valid_triples) + std::size_t(cfg.test_triples);
    if (held_count * 2 > triples.size()) {
      throw ConfigError("synthetic benchmark: target too small for held-out counts");
    }
    const std::vector<std::size_t> held =
        hold_out(triples, cfg.target_entities, held_count, rng);
    std::vector<char> is_held(triples.size(), 0);
    for (std::size_t i : held) is_held[i] = 1;

    std::vector<std::size_t> train;
    for (std::size_t i = 0; i < triples.size(); ++i) {
      if (!is_held[i]) train.push_back(i);
    }
    std::vector<std::size_t> valid(held.begin(), held.begin() + cfg.valid_triples);
    std::vector<std::size_t> test(held.begin() + cfg.valid_triples, held.end());
    std::sort(valid.begin(), valid.end());
    std::sort(test.begin(), test.end());

    write_triples(dir / "target" / "train.txt", triples, train, "tgt_e");
    write_triples(dir / "target" / "valid.txt", triples, valid, "tgt_e");
    write_triples(dir / "target" / "test.txt", triples, test, "tgt_e");
  }
}

}  // namespace morse
