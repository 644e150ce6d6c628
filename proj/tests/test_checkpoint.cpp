#include "morse/checkpoint.hpp"

#include "testutil.hpp"

#include <doctest.h>

using namespace morse;

TEST_CASE("checkpoint round-trip is exact") {
  ModelConfig cfg;
  cfg.dim = 16;
  cfg.layers = 2;
  cfg.num_bases = 3;
  cfg.relation_count = 7;
  cfg.score_kind = ScoreKind::RotatE;
  Rng rng(404);
  ModelParams params = init_params(cfg, rng);
  params.relation_labels = {"r0", "r1", "r2", "r3", "r4", "r5", "r6"};

  test::TempDir dir("ckpt");
  save_checkpoint(dir.path() / "m.ckpt", params);
  const ModelParams loaded = load_checkpoint(dir.path() / "m.ckpt");

  CHECK(loaded.cfg.dim == cfg.dim);
  CHECK(loaded.cfg.layers == cfg.layers);
  CHECK(loaded.cfg.num_bases == cfg.num_bases);
  CHECK(loaded.cfg.relation_count == cfg.relation_count);
  CHECK(loaded.cfg.score_kind == cfg.score_kind);
  CHECK(loaded.relation_labels == params.relation_labels);

  const auto a = params.registry();
  const auto b = loaded.registry();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    CHECK(*a[i].second == *b[i].second);  // bit-exact
  }
}

TEST_CASE("checkpoint rejects corrupt files") {
  test::TempDir dir("ckptbad");
  test::write_file(dir.path() / "bad.ckpt", "not a checkpoint");
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "bad.ckpt"), DataError);
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "missing.ckpt"), DataError);
}
