#include "morse/kg.hpp"

#include "testutil.hpp"

#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <map>
#include <set>

using namespace morse;

TEST_CASE("load_triples interns labels in first-appearance order") {
  test::TempDir dir("load");
  test::write_file(dir.path() / "t.txt", "a\tr\tb\nb\tr\tc\n");
  Vocab entities, relations;
  auto triples = load_triples(dir.path() / "t.txt", entities, relations);
  REQUIRE(triples.size() == 2);
  CHECK(triples[0] == Triple{0, 0, 1});
  CHECK(triples[1] == Triple{1, 0, 2});
  CHECK(entities.labels() == std::vector<std::string>{"a", "b", "c"});
  CHECK(relations.labels() == std::vector<std::string>{"r"});
}

TEST_CASE("load_triples preserves duplicate lines") {
  test::TempDir dir("dup");
  test::write_file(dir.path() / "t.txt", "a\tr\tb\na\tr\tb\n");
  Vocab entities, relations;
  auto triples = load_triples(dir.path() / "t.txt", entities, relations);
  CHECK(triples.size() == 2);
  CHECK(triples[0] == triples[1]);
}

TEST_CASE("load_triples on empty file leaves vocab unchanged") {
  test::TempDir dir("empty");
  test::write_file(dir.path() / "t.txt", "");
  Vocab entities, relations;
  entities.intern("pre");
  auto triples = load_triples(dir.path() / "t.txt", entities, relations);
  CHECK(triples.empty());
  CHECK(entities.size() == 1);
  CHECK(relations.size() == 0);
}

TEST_CASE("load_triples reports malformed lines with their number") {
  test::TempDir dir("bad");
  test::write_file(dir.path() / "t.txt", "a\tr\tb\na\tb\n");
  Vocab entities, relations;
  CHECK_THROWS_MSG(load_triples(dir.path() / "t.txt", entities, relations), DataError, ":2");
}

TEST_CASE("load_triples rejects missing files") {
  Vocab entities, relations;
  CHECK_THROWS_AS(load_triples("/nonexistent/file.txt", entities, relations), DataError);
}

TEST_CASE("build_graph single edge adjacency") {
  auto g = build_graph({Triple{0, 0, 1}}, 2, 1);
  CHECK(g.in_relations(1) == std::vector<RelationId>{0});
  CHECK(g.out_relations(0) == std::vector<RelationId>{0});
  REQUIRE(g.in_neighbors(1).size() == 1);
  CHECK(g.in_neighbors(1)[0] == std::pair<EntityId, RelationId>{0, 0});
  CHECK(g.in_neighbors(0).empty());
}

TEST_CASE("build_graph set vs multiset semantics on duplicate triples") {
  auto g = build_graph({Triple{0, 0, 1}, Triple{0, 0, 1}}, 2, 1);
  CHECK(g.in_relations(1) == std::vector<RelationId>{0});  // set: collapsed
  CHECK(g.in_neighbors(1).size() == 2);                    // per-occurrence
}

TEST_CASE("build_graph rejects isolated entities listing ids") {
  CHECK_THROWS_MSG(build_graph({Triple{0, 0, 1}}, 3, 1), DataError, "2");
}

TEST_CASE("build_graph rejects out-of-range ids") {
  CHECK_THROWS_AS(build_graph({Triple{0, 0, 5}}, 2, 1), DataError);
  CHECK_THROWS_AS(build_graph({Triple{0, 3, 1}}, 2, 1), DataError);
}

TEST_CASE("adjacency matches a brute-force scan on a random graph") {
  auto g = test::random_graph(20, 4, 30, 42);
  for (EntityId e = 0; e < g.entity_count(); ++e) {
    std::set<RelationId> out_set, in_set;
    std::vector<std::pair<EntityId, RelationId>> in_list;
    std::size_t tail_count = 0;
    for (const Triple& t : g.triples()) {
      if (t.head == e) out_set.insert(t.relation);
      if (t.tail == e) {
        in_set.insert(t.relation);
        in_list.emplace_back(t.head, t.relation);
        ++tail_count;
      }
    }
    CHECK(std::vector<RelationId>(out_set.begin(), out_set.end()) == g.out_relations(e));
    CHECK(std::vector<RelationId>(in_set.begin(), in_set.end()) == g.in_relations(e));
    CHECK(in_list == g.in_neighbors(e));
    CHECK(g.in_neighbors(e).size() == tail_count);
  }
}

TEST_CASE("relabel identity and swap") {
  auto g = build_graph({Triple{0, 0, 1}}, 2, 1);
  std::vector<EntityId> identity{0, 1};
  auto same = relabel(g, identity);
  CHECK(same.triples() == g.triples());

  std::vector<EntityId> swap{1, 0};
  auto swapped = relabel(g, swap);
  REQUIRE(swapped.triples().size() == 1);
  CHECK(swapped.triples()[0] == Triple{1, 0, 0});
}

TEST_CASE("relabel rejects non-bijections") {
  auto g = build_graph({Triple{0, 0, 1}}, 2, 1);
  std::vector<EntityId> bad{0, 0};
  CHECK_THROWS_AS(relabel(g, bad), DataError);
  std::vector<EntityId> short_perm{0};
  CHECK_THROWS_AS(relabel(g, short_perm), DataError);
}

TEST_CASE("relabel round-trip and degree multiset preservation") {
  auto g = test::random_graph(15, 3, 25, 7);
  Rng rng(99);
  std::vector<EntityId> perm(15);
  for (int i = 0; i < 15; ++i) perm[std::size_t(i)] = i;
  rng.shuffle(perm);

  auto permuted = relabel(g, perm);
  std::vector<EntityId> inverse(15);
  for (int i = 0; i < 15; ++i) inverse[std::size_t(perm[std::size_t(i)])] = EntityId(i);
  auto back = relabel(permuted, inverse);

  auto sorted = [](std::vector<Triple> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  CHECK(sorted(back.triples()) == sorted(g.triples()));
  CHECK(back.triples() == g.triples());  // order is preserved too

  auto degrees = [](const KnowledgeGraph& kg) {
    std::vector<std::size_t> d;
    for (EntityId e = 0; e < kg.entity_count(); ++e) {
      d.push_back(kg.in_neighbors(e).size() + kg.out_neighbors(e).size());
    }
    std::sort(d.begin(), d.end());
    return d;
  };
  CHECK(degrees(permuted) == degrees(g));
}

namespace {

void write_mini_split(const std::filesystem::path& dir) {
  test::write_file(dir / "source" / "train.txt",
                   "s1\tr1\ts2\ns2\tr2\ts3\ns3\tr1\ts1\n");
  test::write_file(dir / "target" / "train.txt", "t1\tr1\tt2\nt2\tr2\tt1\n");
  test::write_file(dir / "target" / "valid.txt", "t1\tr2\tt2\n");
  test::write_file(dir / "target" / "test.txt", "t2\tr1\tt1\n");
}

}  // namespace

TEST_CASE("load_split aligns target relations through the source vocabulary") {
  test::TempDir dir("split");
  write_mini_split(dir.path());
  auto split = load_split(dir.path());
  CHECK(split.source.entity_count() == 3);
  CHECK(split.source.relation_count() == 2);
  CHECK(split.target_support.entity_count() == 2);
  CHECK(split.target_support.relation_count() == 2);
  REQUIRE(split.target_test.size() == 1);
  CHECK(split.target_test[0] == Triple{1, 0, 0});
}

TEST_CASE("load_split rejects unknown target relations naming the label") {
  test::TempDir dir("unkrel");
  write_mini_split(dir.path());
  test::write_file(dir.path() / "target" / "train.txt", "t1\tr9\tt2\nt2\tr2\tt1\n");
  CHECK_THROWS_MSG(load_split(dir.path()), DataError, "r9");
}

TEST_CASE("load_split rejects overlapping entity labels") {
  test::TempDir dir("overlap");
  write_mini_split(dir.path());
  test::write_file(dir.path() / "target" / "train.txt", "s1\tr1\tt2\nt2\tr2\ts1\n");
  CHECK_THROWS_AS(load_split(dir.path()), DataError);
}

TEST_CASE("load_split rejects test entities absent from target train") {
  test::TempDir dir("unkent");
  write_mini_split(dir.path());
  test::write_file(dir.path() / "target" / "test.txt", "t9\tr1\tt1\n");
  CHECK_THROWS_MSG(load_split(dir.path()), DataError, "t9");
}

// Real-benchmark statistics; runs only when MORSE_DATA_DIR points at the
// GraIL-derived WN18RR v1 files.
TEST_CASE("WN18RR v1 source statistics") {
  const char* data = std::getenv("MORSE_DATA_DIR");
  if (data == nullptr) return;
  Vocab entities, relations;
  auto triples =
      load_triples(std::filesystem::path(data) / "source" / "train.txt", entities,
                   relations);
  CHECK(triples.size() == 6678);
  CHECK(entities.size() == 2746);
  CHECK(relations.size() == 9);
}
