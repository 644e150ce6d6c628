#include "morse/model.hpp"

#include "morse/train.hpp"
#include "testutil.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace morse;

namespace {

ModelConfig small_config(int n_r = 9, ScoreKind kind = ScoreKind::TransE) {
  ModelConfig cfg;
  cfg.dim = 32;
  cfg.layers = 3;
  cfg.num_bases = std::min(4, n_r);
  cfg.relation_count = n_r;
  cfg.score_kind = kind;
  return cfg;
}

}  // namespace

TEST_CASE("parameter count matches the closed form") {
  const ModelConfig cfg = small_config();
  Rng rng(1);
  ModelParams params = init_params(cfg, rng);
  const std::int64_t d = cfg.dim, L = cfg.layers, B = cfg.num_bases,
                     nr = cfg.relation_count;
  const std::int64_t expected =
      nr * d          // relation_emb
      + 2 * nr * d    // relation_dom + relation_ran
      + L * (B * d * d + nr * B + d * d)  // bases, coefficients, self-loops
      + (L + 1) * d * d;                  // jk
  CHECK(params.parameter_count() == expected);
  CHECK(params.registry().size() == std::size_t(3) + std::size_t(L) * std::size_t(B + 2) + 1);
}

TEST_CASE("init_params is deterministic in the seed") {
  const ModelConfig cfg = small_config();
  Rng a(77), b(77), c(78);
  ModelParams pa = init_params(cfg, a);
  ModelParams pb = init_params(cfg, b);
  ModelParams pc = init_params(cfg, c);
  auto ra = pa.registry();
  auto rb = pb.registry();
  auto rc = pc.registry();
  bool all_equal = true, any_diff = false;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    if (*ra[i].second != *rb[i].second) all_equal = false;
    if (*ra[i].second != *rc[i].second) any_diff = true;
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("RotatE relations are stored as phases in (-pi, pi]") {
  ModelConfig cfg = small_config(9, ScoreKind::RotatE);
  Rng rng(3);
  ModelParams params = init_params(cfg, rng);
  CHECK(params.relation_emb.cols() == cfg.dim / 2);
  for (Index i = 0; i < params.relation_emb.rows(); ++i) {
    for (Index j = 0; j < params.relation_emb.cols(); ++j) {
      CHECK(params.relation_emb(i, j) > -std::numbers::pi);
      CHECK(params.relation_emb(i, j) <= std::numbers::pi);
    }
  }
}

TEST_CASE("complex kinds require even width") {
  ModelConfig cfg = small_config(9, ScoreKind::RotatE);
  cfg.dim = 33;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.score_kind = ScoreKind::TransE;
  cfg.validate();  // odd width fine for real kinds
}

TEST_CASE("entity_init single-term and two-term averages") {
  ModelConfig cfg = small_config(2);
  Rng rng(5);
  ModelParams params = init_params(cfg, rng);

  // Entity 0 has only outgoing relation 0; entity 1 has in 0 and out 0.
  auto g = build_graph({Triple{0, 0, 1}, Triple{1, 0, 0}}, 2, 2);
  const Matrix h = entity_init(g, params);
  const Matrix expected0 =
      (params.relation_dom.row(0) + params.relation_ran.row(0)) / 2.0;
  CHECK((h.row(0) - expected0.row(0)).cwiseAbs().maxCoeff() <= 1e-15);

  auto g2 = build_graph({Triple{0, 0, 1}}, 2, 2);
  const Matrix h2 = entity_init(g2, params);
  CHECK((h2.row(0) - params.relation_dom.row(0)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((h2.row(1) - params.relation_ran.row(0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("entity_init matches a per-entity loop oracle") {
  const auto g = test::random_graph(30, 5, 60, 91);
  ModelConfig cfg = small_config(5);
  Rng rng(6);
  ModelParams params = init_params(cfg, rng);
  const Matrix h = entity_init(g, params);

  for (EntityId e = 0; e < g.entity_count(); ++e) {
    RowVector acc = RowVector::Zero(cfg.dim);
    std::size_t degree = 0;
    for (RelationId r : g.out_relations(e)) {
      acc += params.relation_dom.row(r);
      ++degree;
    }
    for (RelationId r : g.in_relations(e)) {
      acc += params.relation_ran.row(r);
      ++degree;
    }
    acc /= Scalar(degree);
    CHECK((h.row(e) - acc).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("gnn_layer expands a single edge correctly") {
  ModelConfig cfg = small_config(1);
  cfg.layers = 1;
  Rng rng(7);
  ModelParams params = init_params(cfg, rng);

  auto g = build_graph({Triple{0, 0, 1}}, 2, 1);
  const Matrix h_prev = test::random_matrix(2, cfg.dim, 8);
  const Matrix h = gnn_layer(g, h_prev, params, 0);

  // Row convention: transforms multiply on the right.
  Matrix w_r = Matrix::Zero(cfg.dim, cfg.dim);
  for (int b = 0; b < cfg.num_bases; ++b) {
    w_r += params.layers[0].coeff(0, b) * params.layers[0].basis[std::size_t(b)];
  }
  const Matrix expected_b =
      (h_prev.row(0) * w_r + h_prev.row(1) * params.layers[0].self_loop)
          .cwiseMax(0.0);
  const Matrix expected_a = (h_prev.row(0) * params.layers[0].self_loop).cwiseMax(0.0);
  CHECK((h.row(1) - expected_b.row(0)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((h.row(0) - expected_a.row(0)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("gnn_layer of all-zero input is zero") {
  ModelConfig cfg = small_config(2);
  Rng rng(9);
  ModelParams params = init_params(cfg, rng);
  auto g = test::random_graph(10, 2, 15, 10);
  const Matrix zeros = Matrix::Zero(10, cfg.dim);
  CHECK(gnn_layer(g, zeros, params, 0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gnn_layer matches a scalar message-passing oracle") {
  const auto g = test::random_graph(25, 4, 50, 11);
  ModelConfig cfg = small_config(4);
  Rng rng(12);
  ModelParams params = init_params(cfg, rng);
  const Matrix h_prev = test::random_matrix(25, cfg.dim, 13);

  for (int layer = 0; layer < cfg.layers; ++layer) {
    const Matrix h = gnn_layer(g, h_prev, params, layer);
    const LayerParams& lp = params.layers[std::size_t(layer)];

    std::vector<Matrix> w_r;
    for (int r = 0; r < cfg.relation_count; ++r) {
      Matrix w = Matrix::Zero(cfg.dim, cfg.dim);
      for (int b = 0; b < cfg.num_bases; ++b) {
        w += lp.coeff(r, b) * lp.basis[std::size_t(b)];
      }
      w_r.push_back(std::move(w));
    }
    for (EntityId e = 0; e < g.entity_count(); ++e) {
      RowVector message = RowVector::Zero(cfg.dim);
      const auto& in = g.in_neighbors(e);
      for (const auto& [head, rel] : in) {
        message += h_prev.row(head) * w_r[std::size_t(rel)];
      }
      if (!in.empty()) message /= Scalar(in.size());
      RowVector expected = message + h_prev.row(e) * lp.self_loop;
      expected = expected.cwiseMax(0.0);
      CHECK((h.row(e) - expected).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }
}

TEST_CASE("embed_entities produces the right shapes through JK") {
  const auto g = test::random_graph(12, 3, 20, 14);
  ModelConfig cfg = small_config(3);
  Rng rng(15);
  ModelParams params = init_params(cfg, rng);
  CHECK(params.jk.rows() == (cfg.layers + 1) * cfg.dim);
  const Matrix e = embed_entities(g, params);
  CHECK(e.rows() == 12);
  CHECK(e.cols() == cfg.dim);
}

TEST_CASE("embed_entities commutes with relabel bit-exactly") {
  const auto g = test::random_graph(18, 4, 30, 16);
  ModelConfig cfg = small_config(4);
  Rng rng(17);
  ModelParams params = init_params(cfg, rng);
  const Matrix base = embed_entities(g, params);

  Rng perm_rng(18);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<EntityId> perm(18);
    for (int i = 0; i < 18; ++i) perm[std::size_t(i)] = EntityId(i);
    perm_rng.shuffle(perm);
    const auto permuted = relabel(g, perm);
    const Matrix out = embed_entities(permuted, params);
    for (EntityId e = 0; e < 18; ++e) {
      CHECK((out.row(perm[std::size_t(e)]) - base.row(e)).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("structural twins get identical embeddings") {
  // Two star graphs with identical shape: center aggregates three leaves via
  // relation 0 and emits relation 1 to one leaf. Entities 0..3 and 4..7 are
  // twins position by position.
  std::vector<Triple> triples;
  for (int block : {0, 4}) {
    triples.push_back(Triple{EntityId(block + 1), 0, EntityId(block)});
    triples.push_back(Triple{EntityId(block + 2), 0, EntityId(block)});
    triples.push_back(Triple{EntityId(block + 3), 0, EntityId(block)});
    triples.push_back(Triple{EntityId(block), 1, EntityId(block + 1)});
  }
  auto g = build_graph(std::move(triples), 8, 2);
  ModelConfig cfg = small_config(2);
  Rng rng(19);
  ModelParams params = init_params(cfg, rng);
  const Matrix e = embed_entities(g, params);
  for (int i = 0; i < 4; ++i) {
    CHECK((e.row(i) - e.row(i + 4)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("no parameter dimension scales with entity count") {
  const int entity_count = 37;
  const auto g = test::random_graph(entity_count, 4, 60, 20);
  ModelConfig cfg = small_config(4);
  Rng rng(21);
  ModelParams params = init_params(cfg, rng);
  for (const auto& [name, mat] : params.registry()) {
    CHECK(mat->rows() != entity_count);
    CHECK(mat->cols() != entity_count);
  }
  // The same parameters embed graphs of any size.
  CHECK(embed_entities(g, params).rows() == entity_count);
  const auto g2 = test::random_graph(11, 4, 18, 22);
  CHECK(embed_entities(g2, params).rows() == 11);
}

TEST_CASE("gradients of the composed map match finite differences") {
  const auto g = test::random_graph(12, 3, 20, 23);
  ModelConfig cfg = small_config(3);
  cfg.dim = 8;
  cfg.layers = 2;
  cfg.num_bases = 2;
  Rng rng(24);
  ModelParams params = init_params(cfg, rng);

  // Fixed probe so the scalar output exercises every row.
  const Matrix probe = test::random_matrix(12, cfg.dim, 25);

  auto run = [&](const std::vector<Matrix>& values, std::vector<Matrix>* grads) {
    ModelParams p = params;
    auto registry = p.registry();
    for (std::size_t i = 0; i < registry.size(); ++i) *registry[i].second = values[i];
    ad::Tape tape;
    TapedParams leaves = make_leaves(tape, p);
    ad::Var emb = embed_entities(tape, g, leaves, cfg);
    ad::Var loss = ad::sum(ad::mul_const(emb, probe));
    if (grads != nullptr) *grads = tape.backward(loss);
    return loss.value()(0, 0);
  };

  std::vector<Matrix> values;
  for (const auto& [name, mat] : params.registry()) values.push_back(*mat);
  std::vector<Matrix> grads;
  run(values, &grads);
  auto f = [&](const std::vector<Matrix>& v) { return run(v, nullptr); };
  const auto report = ad::finite_diff_check(f, values, grads, 1e-4, 40, 26);
  CHECK(report.checked > 100);
  CHECK(report.max_rel_err <= 1e-4);
}

TEST_CASE("embed_entities variants: no initializer and no modulator") {
  const auto g = test::random_graph(10, 3, 18, 27);
  ModelConfig cfg = small_config(3);
  Rng rng(28);
  ModelParams params = init_params(cfg, rng);

  const Matrix random_init = test::random_matrix(10, cfg.dim, 29);
  EmbedOptions no_init;
  no_init.use_initializer = false;
  no_init.random_init = &random_init;
  const Matrix with_random = embed_entities(g, params, no_init);
  CHECK(with_random.rows() == 10);

  EmbedOptions no_mod;
  no_mod.use_modulator = false;
  const Matrix plain_init = embed_entities(g, params, no_mod);
  CHECK((plain_init - entity_init(g, params)).cwiseAbs().maxCoeff() == 0.0);

  EmbedOptions missing;
  missing.use_initializer = false;
  CHECK_THROWS_AS(embed_entities(g, params, missing), ContractError);
}
