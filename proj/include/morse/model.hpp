#pragma once

#include "morse/autodiff.hpp"
#include "morse/kg.hpp"
#include "morse/rng.hpp"
#include "morse/scoring.hpp"
#include "morse/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace morse {

struct ModelConfig {
  int dim = 32;        // embedding and hidden width
  int layers = 3;      // GNN layer count
  int num_bases = 4;   // basis decomposition size
  int relation_count = 0;
  ScoreKind score_kind = ScoreKind::TransE;
  // Off by default: message passing uses ingoing triples only. When on,
  // reversed triples are added under relation ids shifted by relation_count.
  bool add_inverse_edges = false;

  void validate() const;
  // Relation row width: d, except RotatE which stores d/2 phases.
  int relation_width() const;
  // Relation slots in GNN coefficient tables (doubled with inverse edges).
  int gnn_relation_slots() const;
};

struct LayerParams {
  std::vector<Matrix> basis;  // num_bases matrices, each d x d
  Matrix coeff;               // gnn_relation_slots x num_bases
  Matrix self_loop;           // d x d
};

// Entity-independent parameters: nothing here scales with entity count.
struct ModelParams {
  ModelConfig cfg;
  std::vector<std::string> relation_labels;  // trained vocabulary, in id order
  Matrix relation_emb;  // n_r x relation_width
  Matrix relation_dom;  // n_r x d
  Matrix relation_ran;  // n_r x d
  std::vector<LayerParams> layers;
  Matrix jk;            // (layers+1)*d x d

  // Fixed iteration order shared by the optimizer and the checkpoint format.
  std::vector<std::pair<std::string, Matrix*>> registry();
  std::vector<std::pair<std::string, const Matrix*>> registry() const;
  std::int64_t parameter_count() const;
};

ModelParams init_params(const ModelConfig& cfg, Rng& rng);

// Leaf handles for every parameter, registered in registry() order so that
// Tape::backward output aligns with the registry.
struct TapedParams {
  ad::Var relation_emb;
  ad::Var relation_dom;
  ad::Var relation_ran;
  struct Layer {
    std::vector<ad::Var> basis;
    ad::Var coeff;
    ad::Var self_loop;
  };
  std::vector<Layer> layers;
  ad::Var jk;
};

TapedParams make_leaves(ad::Tape& tape, const ModelParams& params);

struct EmbedOptions {
  bool use_initializer = true;      // when false, h0 = *random_init
  bool use_modulator = true;        // when false, E = h0
  const Matrix* random_init = nullptr;
};

// h0[e] = (sum of relation_dom over out-relations + relation_ran over
// in-relations) / (|O(e)| + |I(e)|).
ad::Var entity_init(ad::Tape& tape, const KnowledgeGraph& graph, ad::Var relation_dom,
                    ad::Var relation_ran);

// One message-passing layer: mean over ingoing triples of W_r h_head plus
// self-loop, through ReLU. W_r = sum_b coeff[r,b] basis[b].
ad::Var gnn_layer(ad::Tape& tape, const KnowledgeGraph& graph, ad::Var h_prev,
                  const TapedParams::Layer& layer, const ModelConfig& cfg);

// Full producer: initializer, L GNN layers, JK projection of the
// concatenated per-layer representations.
ad::Var embed_entities(ad::Tape& tape, const KnowledgeGraph& graph,
                       const TapedParams& params, const ModelConfig& cfg,
                       const EmbedOptions& opts = {});

// Untaped wrappers (frozen inference and unit-level contracts). These run the
// taped implementation on a throwaway tape, so training and inference are the
// same arithmetic, bit for bit.
Matrix entity_init(const KnowledgeGraph& graph, const ModelParams& params);
Matrix gnn_layer(const KnowledgeGraph& graph, const Matrix& h_prev,
                 const ModelParams& params, int layer);
Matrix embed_entities(const KnowledgeGraph& graph, const ModelParams& params,
                      const EmbedOptions& opts = {});

}  // namespace morse
