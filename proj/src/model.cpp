#include "morse/model.hpp"

#include <cmath>
#include <numbers>

namespace morse {

void ModelConfig::validate() const {
  if (dim < 1) throw ConfigError("model.dim must be >= 1");
  if (layers < 1) throw ConfigError("model.layers must be >= 1");
  if (relation_count < 1) throw ConfigError("model.relation_count must be >= 1");
  if (num_bases < 1 || num_bases > relation_count) {
    throw ConfigError("model.num_bases must be in [1, relation_count]");
  }
  if (is_complex_kind(score_kind) && dim % 2 != 0) {
    throw ConfigError("model.dim must be even for complex score kinds");
  }
}

int ModelConfig::relation_width() const {
  return score_kind == ScoreKind::RotatE ? dim / 2 : dim;
}

int ModelConfig::gnn_relation_slots() const {
  return add_inverse_edges ? 2 * relation_count : relation_count;
}

std::vector<std::pair<std::string, Matrix*>> ModelParams::registry() {
  std::vector<std::pair<std::string, Matrix*>> out;
  out.emplace_back("relation_emb", &relation_emb);
  out.emplace_back("relation_dom", &relation_dom);
  out.emplace_back("relation_ran", &relation_ran);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string prefix = "layer" + std::to_string(l) + ".";
    for (std::size_t b = 0; b < layers[l].basis.size(); ++b) {
      out.emplace_back(prefix + "basis" + std::to_string(b), &layers[l].basis[b]);
    }
    out.emplace_back(prefix + "coeff", &layers[l].coeff);
    out.emplace_back(prefix + "self_loop", &layers[l].self_loop);
  }
  out.emplace_back("jk_matrix", &jk);
  return out;
}

std::vector<std::pair<std::string, const Matrix*>> ModelParams::registry() const {
  auto mutable_view = const_cast<ModelParams*>(this)->registry();
  std::vector<std::pair<std::string, const Matrix*>> out;
  out.reserve(mutable_view.size());
  for (auto& [name, mat] : mutable_view) out.emplace_back(name, mat);
  return out;
}

std::int64_t ModelParams::parameter_count() const {
  std::int64_t total = 0;
  for (const auto& [name, mat] : registry()) total += mat->size();
  return total;
}

namespace {

Matrix xavier_uniform(Index rows, Index cols, Rng& rng) {
  const Scalar bound = std::sqrt(6.0 / Scalar(rows + cols));
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
  }
  return m;
}

Matrix uniform_matrix(Index rows, Index cols, Scalar lo, Scalar hi, Rng& rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(lo, hi);
  }
  return m;
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  ModelParams p;
  p.cfg = cfg;
  const int d = cfg.dim;
  const int n_r = cfg.relation_count;
  const Scalar inv_sqrt_d = 1.0 / std::sqrt(Scalar(d));

  if (cfg.score_kind == ScoreKind::RotatE) {
    // d/2 phases in (-pi, pi].
    p.relation_emb.resize(n_r, d / 2);
    for (Index i = 0; i < p.relation_emb.rows(); ++i) {
      for (Index j = 0; j < p.relation_emb.cols(); ++j) {
        p.relation_emb(i, j) = std::numbers::pi_v<Scalar> * (1.0 - 2.0 * rng.uniform());
      }
    }
  } else {
    p.relation_emb = uniform_matrix(n_r, d, -inv_sqrt_d, inv_sqrt_d, rng);
  }
  p.relation_dom = uniform_matrix(n_r, d, -inv_sqrt_d, inv_sqrt_d, rng);
  p.relation_ran = uniform_matrix(n_r, d, -inv_sqrt_d, inv_sqrt_d, rng);

  p.layers.resize(std::size_t(cfg.layers));
  for (auto& layer : p.layers) {
    layer.basis.reserve(std::size_t(cfg.num_bases));
    for (int b = 0; b < cfg.num_bases; ++b) {
      layer.basis.push_back(xavier_uniform(d, d, rng));
    }
    layer.coeff = xavier_uniform(cfg.gnn_relation_slots(), cfg.num_bases, rng);
    layer.self_loop = xavier_uniform(d, d, rng);
  }
  p.jk = xavier_uniform(Index(cfg.layers + 1) * d, d, rng);
  return p;
}

TapedParams make_leaves(ad::Tape& tape, const ModelParams& params) {
  TapedParams t;
  t.relation_emb = tape.leaf(params.relation_emb);
  t.relation_dom = tape.leaf(params.relation_dom);
  t.relation_ran = tape.leaf(params.relation_ran);
  t.layers.reserve(params.layers.size());
  for (const LayerParams& layer : params.layers) {
    TapedParams::Layer tl;
    for (const Matrix& b : layer.basis) tl.basis.push_back(tape.leaf(b));
    tl.coeff = tape.leaf(layer.coeff);
    tl.self_loop = tape.leaf(layer.self_loop);
    t.layers.push_back(std::move(tl));
  }
  t.jk = tape.leaf(params.jk);
  return t;
}

ad::Var entity_init(ad::Tape& tape, const KnowledgeGraph& graph, ad::Var relation_dom,
                    ad::Var relation_ran) {
  const Index n = graph.entity_count();
  std::vector<Index> dom_src, dom_dst, ran_src, ran_dst;
  Vector inv_degree(n);
  for (EntityId e = 0; e < n; ++e) {
    const auto& out = graph.out_relations(e);
    const auto& in = graph.in_relations(e);
    const std::size_t degree = out.size() + in.size();
    if (degree == 0) {
      throw ContractError("entity_init: isolated entity " + std::to_string(e));
    }
    for (RelationId r : out) {
      dom_src.push_back(r);
      dom_dst.push_back(e);
    }
    for (RelationId r : in) {
      ran_src.push_back(r);
      ran_dst.push_back(e);
    }
    inv_degree[e] = 1.0 / Scalar(degree);
  }

  ad::Var dom_sum = ad::index_add_rows(ad::gather_rows(relation_dom, dom_src), dom_dst, n);
  ad::Var ran_sum = ad::index_add_rows(ad::gather_rows(relation_ran, ran_src), ran_dst, n);
  (void)tape;
  return ad::scale_rows_const(ad::add(dom_sum, ran_sum), inv_degree);
}

namespace {

struct EdgeList {
  std::vector<Index> heads;
  std::vector<Index> rels;   // gnn relation slots (shifted for inverse edges)
  std::vector<Index> tails;
};

// Triple-list order, optionally followed by reversed triples. The order is a
// function of the triple list alone, which keeps aggregation reproducible and
// permutation-equivariant.
EdgeList message_edges(const KnowledgeGraph& graph, const ModelConfig& cfg) {
  EdgeList e;
  const std::size_t n = graph.triples().size() * (cfg.add_inverse_edges ? 2 : 1);
  e.heads.reserve(n);
  e.rels.reserve(n);
  e.tails.reserve(n);
  for (const Triple& t : graph.triples()) {
    e.heads.push_back(t.head);
    e.rels.push_back(t.relation);
    e.tails.push_back(t.tail);
  }
  if (cfg.add_inverse_edges) {
    for (const Triple& t : graph.triples()) {
      e.heads.push_back(t.tail);
      e.rels.push_back(Index(t.relation) + cfg.relation_count);
      e.tails.push_back(t.head);
    }
  }
  return e;
}

}  // namespace

ad::Var gnn_layer(ad::Tape& tape, const KnowledgeGraph& graph, ad::Var h_prev,
                  const TapedParams::Layer& layer, const ModelConfig& cfg) {
  const Index n = graph.entity_count();
  if (h_prev.rows() != n) throw ShapeError("gnn_layer: row count must match graph");

  const EdgeList edges = message_edges(graph, cfg);

  Vector in_count = Vector::Zero(n);
  for (Index t : edges.tails) in_count[t] += 1.0;
  Vector inv_in(n);
  for (Index e = 0; e < n; ++e) {
    inv_in[e] = in_count[e] > 0.0 ? 1.0 / in_count[e] : 0.0;
  }

  ad::Var self_term = ad::matmul(h_prev, layer.self_loop);
  if (edges.heads.empty()) {
    return ad::relu(self_term);
  }

  ad::Var head_rows = ad::gather_rows(h_prev, edges.heads);
  ad::Var edge_coeff = ad::gather_rows(layer.coeff, edges.rels);
  ad::Var messages;
  for (std::size_t b = 0; b < layer.basis.size(); ++b) {
    ad::Var contribution = ad::scale_rows(ad::matmul(head_rows, layer.basis[b]),
                                          ad::slice_cols(edge_coeff, Index(b), 1));
    messages = b == 0 ? contribution : ad::add(messages, contribution);
  }
  ad::Var aggregated = ad::scale_rows_const(
      ad::index_add_rows(messages, edges.tails, n), inv_in);
  (void)tape;
  return ad::relu(ad::add(aggregated, self_term));
}

ad::Var embed_entities(ad::Tape& tape, const KnowledgeGraph& graph,
                       const TapedParams& params, const ModelConfig& cfg,
                       const EmbedOptions& opts) {
  ad::Var h0;
  if (opts.use_initializer) {
    h0 = entity_init(tape, graph, params.relation_dom, params.relation_ran);
  } else {
    if (opts.random_init == nullptr) {
      throw ContractError("embed_entities: random_init required without initializer");
    }
    if (opts.random_init->rows() != graph.entity_count() ||
        opts.random_init->cols() != cfg.dim) {
      throw ShapeError("embed_entities: random_init shape mismatch");
    }
    h0 = tape.constant(*opts.random_init);
  }
  if (!opts.use_modulator) {
    return h0;
  }

  std::vector<ad::Var> states{h0};
  for (int l = 0; l < cfg.layers; ++l) {
    states.push_back(gnn_layer(tape, graph, states.back(),
                               params.layers[std::size_t(l)], cfg));
  }
  return ad::matmul(ad::concat_cols(states), params.jk);
}

Matrix entity_init(const KnowledgeGraph& graph, const ModelParams& params) {
  ad::Tape tape;
  ad::Var dom = tape.constant(params.relation_dom);
  ad::Var ran = tape.constant(params.relation_ran);
  return entity_init(tape, graph, dom, ran).value();
}

Matrix gnn_layer(const KnowledgeGraph& graph, const Matrix& h_prev,
                 const ModelParams& params, int layer) {
  if (layer < 0 || layer >= int(params.layers.size())) {
    throw ContractError("gnn_layer: layer index out of range");
  }
  ad::Tape tape;
  TapedParams::Layer tl;
  const LayerParams& lp = params.layers[std::size_t(layer)];
  for (const Matrix& b : lp.basis) tl.basis.push_back(tape.constant(b));
  tl.coeff = tape.constant(lp.coeff);
  tl.self_loop = tape.constant(lp.self_loop);
  ad::Var h = tape.constant(h_prev);
  return gnn_layer(tape, graph, h, tl, params.cfg).value();
}

Matrix embed_entities(const KnowledgeGraph& graph, const ModelParams& params,
                      const EmbedOptions& opts) {
  ad::Tape tape;
  TapedParams leaves = make_leaves(tape, params);
  return embed_entities(tape, graph, leaves, params.cfg, opts).value();
}

}  // namespace morse
