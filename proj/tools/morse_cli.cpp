// morse: meta-knowledge transfer for inductive knowledge graph embedding.
//
// Subcommands wire datasets, configs, training, adaptation, evaluation and
// experiment sweeps into reproducible runs. Every run writes a manifest
// (resolved config, seed, config hash, version) next to its outputs; reruns
// with an identical manifest reproduce outputs byte for byte at --workers 1.

#include "morse/checkpoint.hpp"
#include "morse/eval.hpp"
#include "morse/kg.hpp"
#include "morse/model.hpp"
#include "morse/sampler.hpp"
#include "morse/scoring.hpp"
#include "morse/synth.hpp"
#include "morse/train.hpp"
#include "morse/types.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunConfig {
  // model
  int dim = 32;
  int layers = 3;
  int num_bases = 4;
  std::string score_kind = "transe";
  bool add_inverse_edges = false;
  // training
  int batch_size = 64;
  double learning_rate = 0.01;
  int epochs = 10;
  int tasks = 10000;
  int validation_tasks = 200;
  // loss
  double gamma = 10.0;
  int negatives = 32;
  double beta = 1.0;
  bool filter_negatives = false;
  // sampler
  int n_rw = 10;
  int l_rw = 5;
  int t_rw = 10;
  double query_fraction = 0.1;
  // fine-tune defaults
  int finetune_batch_size = 512;
  double finetune_learning_rate = 0.001;
  int finetune_negatives = 64;
  // evaluation protocol
  int num_eval_negatives = 50;
  int repeats = 5;
  std::string sides = "both";
  std::vector<int> hits_levels = {1, 5, 10};
  // run
  std::uint64_t seed = 0;
  int workers = 1;
};

json config_to_json(const RunConfig& c) {
  return json{{"dim", c.dim},
              {"layers", c.layers},
              {"num_bases", c.num_bases},
              {"score_kind", c.score_kind},
              {"add_inverse_edges", c.add_inverse_edges},
              {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"epochs", c.epochs},
              {"tasks", c.tasks},
              {"validation_tasks", c.validation_tasks},
              {"gamma", c.gamma},
              {"negatives", c.negatives},
              {"beta", c.beta},
              {"filter_negatives", c.filter_negatives},
              {"n_rw", c.n_rw},
              {"l_rw", c.l_rw},
              {"t_rw", c.t_rw},
              {"query_fraction", c.query_fraction},
              {"finetune_batch_size", c.finetune_batch_size},
              {"finetune_learning_rate", c.finetune_learning_rate},
              {"finetune_negatives", c.finetune_negatives},
              {"num_eval_negatives", c.num_eval_negatives},
              {"repeats", c.repeats},
              {"sides", c.sides},
              {"hits_levels", c.hits_levels},
              {"seed", c.seed},
              {"workers", c.workers}};
}

void apply_json(RunConfig& c, const json& j) {
  if (!j.is_object()) throw morse::ConfigError("config file: top level must be an object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "dim") c.dim = value.get<int>();
      else if (key == "layers") c.layers = value.get<int>();
      else if (key == "num_bases") c.num_bases = value.get<int>();
      else if (key == "score_kind") c.score_kind = value.get<std::string>();
      else if (key == "add_inverse_edges") c.add_inverse_edges = value.get<bool>();
      else if (key == "batch_size") c.batch_size = value.get<int>();
      else if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "epochs") c.epochs = value.get<int>();
      else if (key == "tasks") c.tasks = value.get<int>();
      else if (key == "validation_tasks") c.validation_tasks = value.get<int>();
      else if (key == "gamma") c.gamma = value.get<double>();
      else if (key == "negatives") c.negatives = value.get<int>();
      else if (key == "beta") c.beta = value.get<double>();
      else if (key == "filter_negatives") c.filter_negatives = value.get<bool>();
      else if (key == "n_rw") c.n_rw = value.get<int>();
      else if (key == "l_rw") c.l_rw = value.get<int>();
      else if (key == "t_rw") c.t_rw = value.get<int>();
      else if (key == "query_fraction") c.query_fraction = value.get<double>();
      else if (key == "finetune_batch_size") c.finetune_batch_size = value.get<int>();
      else if (key == "finetune_learning_rate") c.finetune_learning_rate = value.get<double>();
      else if (key == "finetune_negatives") c.finetune_negatives = value.get<int>();
      else if (key == "num_eval_negatives") c.num_eval_negatives = value.get<int>();
      else if (key == "repeats") c.repeats = value.get<int>();
      else if (key == "sides") c.sides = value.get<std::string>();
      else if (key == "hits_levels") c.hits_levels = value.get<std::vector<int>>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "workers") c.workers = value.get<int>();
      else throw morse::ConfigError("config file: unknown key '" + key + "'");
    } catch (const json::exception& e) {
      throw morse::ConfigError("config file: bad value for '" + key + "': " + e.what());
    }
  }
}

morse::ModelConfig model_config(const RunConfig& c, int relation_count) {
  morse::ModelConfig m;
  m.dim = c.dim;
  m.layers = c.layers;
  m.num_bases = std::min(c.num_bases, relation_count);
  m.relation_count = relation_count;
  m.score_kind = morse::score_kind_from_string(c.score_kind);
  m.add_inverse_edges = c.add_inverse_edges;
  return m;
}

morse::TrainConfig train_config(const RunConfig& c) {
  morse::TrainConfig t;
  t.batch_size = c.batch_size;
  t.learning_rate = c.learning_rate;
  t.epochs = c.epochs;
  t.task_pool_size = c.tasks;
  t.validation_tasks = c.validation_tasks;
  t.loss.gamma = c.gamma;
  t.loss.k = c.negatives;
  t.loss.beta = c.beta;
  t.loss.filter_negatives = c.filter_negatives;
  t.sampler.n_rw = c.n_rw;
  t.sampler.l_rw = c.l_rw;
  t.sampler.t_rw = c.t_rw;
  t.sampler.query_fraction = c.query_fraction;
  t.sampler.seed = c.seed;
  t.seed = c.seed;
  t.workers = c.workers;
  return t;
}

morse::TrainConfig finetune_config(const RunConfig& c, int epochs) {
  morse::TrainConfig t;
  t.batch_size = c.finetune_batch_size;
  t.learning_rate = c.finetune_learning_rate;
  t.epochs = epochs;
  t.loss.gamma = c.gamma;
  t.loss.k = c.finetune_negatives;
  t.loss.beta = c.beta;
  t.loss.filter_negatives = c.filter_negatives;
  t.seed = c.seed;
  t.workers = c.workers;
  return t;
}

morse::EvalProtocol eval_protocol(const RunConfig& c) {
  morse::EvalProtocol p;
  p.num_negatives = c.num_eval_negatives;
  p.repeats = c.repeats;
  if (c.sides == "head") p.sides = morse::EvalProtocol::Sides::Head;
  else if (c.sides == "tail") p.sides = morse::EvalProtocol::Sides::Tail;
  else if (c.sides == "both") p.sides = morse::EvalProtocol::Sides::Both;
  else throw morse::ConfigError("sides must be head|tail|both");
  p.seed = c.seed;
  p.hits_levels = c.hits_levels;
  return p;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw morse::DataError("cannot write " + path.string());
  out << text;
  if (!out) throw morse::DataError("write failed: " + path.string());
}

void write_manifest(const fs::path& out_dir, const std::string& command,
                    const RunConfig& cfg, const json& extra) {
  json cfg_json = config_to_json(cfg);
  json manifest{{"version", morse::kVersion},
                {"command", command},
                {"seed", cfg.seed},
                {"config", cfg_json},
                {"config_hash", fnv1a(cfg_json.dump())}};
  for (const auto& [key, value] : extra.items()) manifest[key] = value;
  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

json report_to_json(const morse::EvalReport& report, const std::string& label) {
  json hits = json::object();
  for (const auto& [level, value] : report.hits) {
    hits[std::to_string(level)] = value;
  }
  return json{{"label", label},
              {"mrr", report.mrr},
              {"hits", hits},
              {"num_negatives", report.num_negatives},
              {"repeats", report.repeats},
              {"sides", report.sides},
              {"seed", report.seed},
              {"records", report.record_count},
              {"excluded_test", report.excluded_test}};
}

void write_ranks_csv(const fs::path& path, const morse::EvalReport& report) {
  std::string csv = "record,rank\n";
  for (std::size_t i = 0; i < report.ranks.size(); ++i) {
    char line[64];
    std::snprintf(line, sizeof(line), "%zu,%.17g\n", i, report.ranks[i]);
    csv += line;
  }
  write_text(path, csv);
}

void write_trainlog(const fs::path& out_dir, const morse::TrainLog& log) {
  std::string csv = "step,loss\n";
  for (std::size_t i = 0; i < log.step_loss.size(); ++i) {
    char line[64];
    std::snprintf(line, sizeof(line), "%zu,%.17g\n", i, log.step_loss[i]);
    csv += line;
  }
  write_text(out_dir / "trainlog.csv", csv);

  json summary{{"selected_epoch", log.selected_epoch},
               {"validation_mrr", log.epoch_val_mrr},
               {"steps", log.step_loss.size()}};
  write_text(out_dir / "trainlog.json", summary.dump(2) + "\n");
}

morse::Vocab relation_vocab(const morse::ModelParams& params) {
  morse::Vocab v;
  for (const std::string& label : params.relation_labels) v.intern(label);
  return v;
}

std::string csv_metrics_header() { return "mrr,hits@1,hits@5,hits@10"; }

std::string csv_metrics(const morse::EvalReport& r) {
  char buf[128];
  auto hit = [&](int level) {
    auto it = r.hits.find(level);
    return it == r.hits.end() ? 0.0 : it->second;
  };
  std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g", r.mrr, hit(1), hit(5),
                hit(10));
  return buf;
}

// ----- subcommand bodies ---------------------------------------------------

int cmd_make_synthetic(const fs::path& out, const morse::SynthConfig& synth) {
  morse::write_synthetic_benchmark(out, synth);
  std::cout << "wrote synthetic benchmark to " << out.string() << "\n";
  return 0;
}

int cmd_sample_tasks(const RunConfig& cfg, const fs::path& data, const fs::path& out) {
  if (cfg.tasks < 1) throw morse::ConfigError("tasks must be >= 1");
  const morse::InductiveSplit split = morse::load_split(data);
  morse::TrainConfig tc = train_config(cfg);
  const std::vector<morse::Task> pool =
      morse::sample_pool(split.source, tc.sampler, cfg.tasks, 2 /* train stream */,
                         cfg.workers);

  fs::create_directories(out);
  morse::write_task_pool(out / "tasks.tsv", pool);

  double mean_entities = 0.0, mean_support = 0.0, mean_query = 0.0;
  for (const morse::Task& task : pool) {
    mean_entities += task.graph.entity_count();
    mean_support += double(task.graph.triples().size());
    mean_query += double(task.query.size());
  }
  const double n = pool.empty() ? 1.0 : double(pool.size());
  json stats{{"tasks", pool.size()},
             {"mean_entities", mean_entities / n},
             {"mean_support_triples", mean_support / n},
             {"mean_query_triples", mean_query / n}};
  write_text(out / "stats.json", stats.dump(2) + "\n");
  write_manifest(out, "sample-tasks", cfg, json{{"data", data.string()}});
  std::cout << stats.dump(2) << "\n";
  return 0;
}

int cmd_meta_train(const RunConfig& cfg, const fs::path& data, const fs::path& out,
                   const std::string& variant_name, bool quiet) {
  const morse::InductiveSplit split = morse::load_split(data);
  const morse::Variant variant = morse::variant_from_string(variant_name);
  const morse::ModelConfig mc = model_config(cfg, split.source.relation_count());
  const morse::TrainConfig tc = train_config(cfg);

  morse::ProgressFn progress;
  if (!quiet) {
    progress = [](const std::string& msg) { std::cout << msg << std::endl; };
  }
  auto [params, log] = morse::meta_train(split.source, mc, tc, variant, progress);

  fs::create_directories(out);
  morse::save_checkpoint(out / "checkpoint.ckpt", params);
  write_trainlog(out, log);
  write_manifest(out, "meta-train", cfg,
                 json{{"data", data.string()}, {"variant", variant_name}});
  std::cout << "checkpoint written to " << (out / "checkpoint.ckpt").string()
            << " (best epoch " << log.selected_epoch << ")\n";
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, const fs::path& checkpoint, const fs::path& data,
                 const fs::path& out, int finetune_epochs, const std::string& split_name,
                 bool ranks_csv, bool quiet) {
  morse::ModelParams params = morse::load_checkpoint(checkpoint);
  morse::Vocab relations = relation_vocab(params);
  const morse::TargetData target = morse::load_target(data, relations);
  const std::vector<morse::Triple>& eval_triples =
      split_name == "valid" ? target.valid : target.test;
  if (split_name != "valid" && split_name != "test") {
    throw morse::ConfigError("split must be valid|test");
  }

  const morse::EvalProtocol protocol = eval_protocol(cfg);
  fs::create_directories(out);

  const morse::Matrix frozen_emb = morse::adapt_freeze(params, target.support);
  const morse::EvalReport frozen =
      morse::evaluate(frozen_emb, params, eval_triples, protocol, cfg.workers);
  write_text(out / "report_frozen.json", report_to_json(frozen, "frozen").dump(2) + "\n");
  if (ranks_csv) write_ranks_csv(out / "ranks_frozen.csv", frozen);
  if (!quiet) {
    std::cout << "frozen: " << report_to_json(frozen, "frozen").dump() << "\n";
  }

  if (finetune_epochs > 0) {
    morse::TrainConfig ft = finetune_config(cfg, finetune_epochs);
    morse::ProgressFn progress;
    if (!quiet) {
      progress = [](const std::string& msg) { std::cout << msg << std::endl; };
    }
    auto [tuned, log] = morse::finetune(params, target.support, ft, progress);
    const morse::Matrix tuned_emb = morse::adapt_freeze(tuned, target.support);
    const morse::EvalReport report =
        morse::evaluate(tuned_emb, tuned, eval_triples, protocol, cfg.workers);
    write_text(out / "report_finetuned.json",
               report_to_json(report, "finetuned").dump(2) + "\n");
    if (ranks_csv) write_ranks_csv(out / "ranks_finetuned.csv", report);
    morse::save_checkpoint(out / "checkpoint_finetuned.ckpt", tuned);
    write_trainlog(out, log);
    if (!quiet) {
      std::cout << "finetuned: " << report_to_json(report, "finetuned").dump() << "\n";
    }
  }

  write_manifest(out, "evaluate", cfg,
                 json{{"data", data.string()},
                      {"checkpoint", checkpoint.string()},
                      {"finetune_epochs", finetune_epochs},
                      {"split", split_name}});
  return 0;
}

int cmd_ablate(const RunConfig& cfg, const fs::path& data, const fs::path& out,
               int seeds, bool quiet) {
  if (seeds < 1) throw morse::ConfigError("seeds must be >= 1");
  const morse::InductiveSplit split = morse::load_split(data);
  const morse::ModelConfig mc = model_config(cfg, split.source.relation_count());

  const morse::Variant variants[] = {
      morse::Variant::Full, morse::Variant::NoMetaLearning,
      morse::Variant::NoInitializer, morse::Variant::NoModulator};

  std::string csv = "variant,seed," + csv_metrics_header() + "\n";
  for (const morse::Variant variant : variants) {
    for (int s = 0; s < seeds; ++s) {
      RunConfig run = cfg;
      run.seed = cfg.seed + std::uint64_t(s);
      morse::TrainConfig tc = train_config(run);
      morse::EvalProtocol protocol = eval_protocol(run);
      morse::ProgressFn progress;
      if (!quiet) {
        const std::string tag = morse::to_string(variant) + "/seed" + std::to_string(s);
        progress = [tag](const std::string& msg) {
          std::cout << "[" << tag << "] " << msg << std::endl;
        };
      }
      const morse::EvalReport report =
          morse::run_ablation(variant, split, mc, tc, protocol, progress);
      csv += morse::to_string(variant) + "," + std::to_string(run.seed) + "," +
             csv_metrics(report) + "\n";
    }
  }
  fs::create_directories(out);
  write_text(out / "ablation.csv", csv);
  write_manifest(out, "ablate", cfg,
                 json{{"data", data.string()}, {"seeds", seeds}});
  std::cout << csv;
  return 0;
}

int cmd_sparsity_sweep(const RunConfig& cfg, const fs::path& checkpoint,
                       const fs::path& data, const fs::path& out,
                       std::vector<double> keep_ratios) {
  if (keep_ratios.empty()) keep_ratios = {1.0, 0.8, 0.6, 0.4, 0.2};
  std::sort(keep_ratios.begin(), keep_ratios.end(), std::greater<>());

  morse::ModelParams params = morse::load_checkpoint(checkpoint);
  morse::Vocab relations = relation_vocab(params);
  const morse::TargetData target = morse::load_target(data, relations);
  const morse::EvalProtocol protocol = eval_protocol(cfg);

  std::string csv = "keep_ratio,kept_triples,excluded_test," + csv_metrics_header() + "\n";
  for (double ratio : keep_ratios) {
    morse::Rng rng(morse::derive_seed(cfg.seed, 0x5b42,
                                      std::uint64_t(ratio * 1e6)));
    const morse::SparsifyResult sparse =
        morse::sparsify_target(target.support, ratio, rng);
    auto [test, excluded] = morse::remap_triples(target.test, sparse.old_to_new);
    const morse::Matrix emb = morse::adapt_freeze(params, sparse.graph);
    morse::EvalReport report = morse::evaluate(emb, params, test, protocol, cfg.workers);
    report.excluded_test = excluded;
    char prefix[64];
    std::snprintf(prefix, sizeof(prefix), "%.17g,%zu,%zu,", ratio,
                  sparse.kept_triples, excluded);
    csv += prefix + csv_metrics(report) + "\n";
  }
  fs::create_directories(out);
  write_text(out / "sparsity.csv", csv);
  write_manifest(out, "sparsity-sweep", cfg,
                 json{{"data", data.string()},
                      {"checkpoint", checkpoint.string()},
                      {"keep_ratios", keep_ratios}});
  std::cout << csv;
  return 0;
}

int cmd_model_info(const fs::path& checkpoint) {
  const morse::ModelParams params = morse::load_checkpoint(checkpoint);
  json info{{"dim", params.cfg.dim},
            {"layers", params.cfg.layers},
            {"num_bases", params.cfg.num_bases},
            {"relation_count", params.cfg.relation_count},
            {"score_kind", morse::to_string(params.cfg.score_kind)},
            {"add_inverse_edges", params.cfg.add_inverse_edges},
            {"parameter_count", params.parameter_count()}};
  json shapes = json::object();
  for (const auto& [name, mat] : params.registry()) {
    shapes[name] = json::array({mat->rows(), mat->cols()});
  }
  info["parameters"] = shapes;
  std::cout << info.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"morse: inductive knowledge graph embedding via meta-knowledge transfer"};
  app.require_subcommand(1);

  // Shared option state. Precedence: explicit flags > --budget preset >
  // config file > built-in defaults.
  std::string config_path;
  std::string budget;
  std::optional<int> opt_dim, opt_layers, opt_bases, opt_batch, opt_epochs, opt_tasks,
      opt_val_tasks, opt_neg, opt_workers, opt_eval_neg, opt_repeats;
  std::optional<double> opt_lr, opt_gamma, opt_beta, opt_query_fraction;
  std::optional<std::string> opt_score_kind, opt_sides;
  std::optional<std::uint64_t> opt_seed;
  std::optional<bool> opt_inverse, opt_filter_neg;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--budget", budget, "preset: desk (2000 tasks, 3 epochs) or full")
        ->check(CLI::IsMember({"desk", "full"}));
    cmd->add_option("--dim", opt_dim, "embedding width");
    cmd->add_option("--layers", opt_layers, "GNN layer count");
    cmd->add_option("--bases", opt_bases, "basis count");
    cmd->add_option("--score-kind", opt_score_kind, "transe|distmult|complex|rotate");
    cmd->add_option("--add-inverse-edges", opt_inverse, "message passing over reversed triples");
    cmd->add_option("--batch-size", opt_batch, "tasks per step");
    cmd->add_option("--lr", opt_lr, "learning rate");
    cmd->add_option("--epochs", opt_epochs, "training epochs");
    cmd->add_option("--tasks", opt_tasks, "task pool size");
    cmd->add_option("--val-tasks", opt_val_tasks, "validation task count");
    cmd->add_option("--gamma", opt_gamma, "loss margin");
    cmd->add_option("--neg-k", opt_neg, "negatives per positive");
    cmd->add_option("--beta", opt_beta, "self-adversarial temperature");
    cmd->add_option("--filter-negatives", opt_filter_neg, "filter known positives");
    cmd->add_option("--query-fraction", opt_query_fraction, "task query fraction");
    cmd->add_option("--num-negatives", opt_eval_neg, "evaluation candidates per record");
    cmd->add_option("--repeats", opt_repeats, "evaluation repeats");
    cmd->add_option("--sides", opt_sides, "head|tail|both");
    cmd->add_option("--seed", opt_seed, "random seed");
    cmd->add_option("--workers", opt_workers, "parallel workers (1 = serial)");
  };

  auto resolve = [&]() {
    RunConfig cfg;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw morse::ConfigError("cannot open config file: " + config_path);
      json j;
      try {
        in >> j;
      } catch (const json::exception& e) {
        throw morse::ConfigError(std::string("config file: parse error: ") + e.what());
      }
      apply_json(cfg, j);
    }
    if (budget == "desk") {
      cfg.tasks = 2000;
      cfg.epochs = 3;
    } else if (budget == "full") {
      cfg.tasks = 10000;
      cfg.epochs = 10;
    }
    if (opt_dim) cfg.dim = *opt_dim;
    if (opt_layers) cfg.layers = *opt_layers;
    if (opt_bases) cfg.num_bases = *opt_bases;
    if (opt_score_kind) cfg.score_kind = *opt_score_kind;
    if (opt_inverse) cfg.add_inverse_edges = *opt_inverse;
    if (opt_batch) cfg.batch_size = *opt_batch;
    if (opt_lr) cfg.learning_rate = *opt_lr;
    if (opt_epochs) cfg.epochs = *opt_epochs;
    if (opt_tasks) cfg.tasks = *opt_tasks;
    if (opt_val_tasks) cfg.validation_tasks = *opt_val_tasks;
    if (opt_gamma) cfg.gamma = *opt_gamma;
    if (opt_neg) cfg.negatives = *opt_neg;
    if (opt_beta) cfg.beta = *opt_beta;
    if (opt_filter_neg) cfg.filter_negatives = *opt_filter_neg;
    if (opt_query_fraction) cfg.query_fraction = *opt_query_fraction;
    if (opt_eval_neg) cfg.num_eval_negatives = *opt_eval_neg;
    if (opt_repeats) cfg.repeats = *opt_repeats;
    if (opt_sides) cfg.sides = *opt_sides;
    if (opt_seed) cfg.seed = *opt_seed;
    if (opt_workers) cfg.workers = *opt_workers;
    return cfg;
  };

  std::string data_dir, out_dir, checkpoint_file;
  bool quiet = false;
  app.add_flag("--quiet", quiet, "suppress progress output");

  // make-synthetic
  auto* synth_cmd = app.add_subcommand("make-synthetic",
                                       "generate a self-contained inductive benchmark");
  morse::SynthConfig synth_cfg;
  std::string synth_out;
  synth_cmd->add_option("--out", synth_out, "output directory")->required();
  synth_cmd->add_option("--source-entities", synth_cfg.source_entities, "source KG size");
  synth_cmd->add_option("--target-entities", synth_cfg.target_entities, "target KG size");
  synth_cmd->add_option("--valid", synth_cfg.valid_triples, "held-out validation triples");
  synth_cmd->add_option("--test", synth_cfg.test_triples, "held-out test triples");
  synth_cmd->add_option("--synth-seed", synth_cfg.seed, "generator seed");

  // sample-tasks
  auto* sample_cmd = app.add_subcommand("sample-tasks", "sample a meta-training task pool");
  sample_cmd->add_option("--data", data_dir, "benchmark directory")->required();
  sample_cmd->add_option("--out", out_dir, "output directory")->required();
  add_common(sample_cmd);

  // meta-train
  auto* train_cmd = app.add_subcommand("meta-train", "meta-train on the source KG");
  std::string variant_name = "full";
  train_cmd->add_option("--data", data_dir, "benchmark directory")->required();
  train_cmd->add_option("--out", out_dir, "output directory")->required();
  train_cmd->add_option("--variant", variant_name,
                        "full|no_meta_learning|no_initializer|no_modulator");
  add_common(train_cmd);

  // evaluate / finetune
  int finetune_epochs = 0;
  std::string split_name = "test";
  bool ranks_csv = false;
  auto* eval_cmd = app.add_subcommand("evaluate", "frozen (and optional fine-tuned) evaluation");
  eval_cmd->add_option("--checkpoint", checkpoint_file, "trained checkpoint")->required();
  eval_cmd->add_option("--data", data_dir, "benchmark directory")->required();
  eval_cmd->add_option("--out", out_dir, "output directory")->required();
  eval_cmd->add_option("--finetune-epochs", finetune_epochs, "fine-tune before evaluating");
  eval_cmd->add_option("--split", split_name, "test|valid");
  eval_cmd->add_flag("--ranks-csv", ranks_csv, "write per-record ranks CSV");
  add_common(eval_cmd);

  int ft_epochs = 3;
  auto* ft_cmd = app.add_subcommand("finetune", "evaluate with fine-tuning (alias)");
  ft_cmd->add_option("--checkpoint", checkpoint_file, "trained checkpoint")->required();
  ft_cmd->add_option("--data", data_dir, "benchmark directory")->required();
  ft_cmd->add_option("--out", out_dir, "output directory")->required();
  ft_cmd->add_option("--finetune-epochs", ft_epochs, "fine-tuning epochs");
  ft_cmd->add_option("--split", split_name, "test|valid");
  ft_cmd->add_flag("--ranks-csv", ranks_csv, "write per-record ranks CSV");
  add_common(ft_cmd);

  // ablate
  int seeds = 1;
  auto* ablate_cmd = app.add_subcommand("ablate", "run the ablation suite");
  ablate_cmd->add_option("--data", data_dir, "benchmark directory")->required();
  ablate_cmd->add_option("--out", out_dir, "output directory")->required();
  ablate_cmd->add_option("--seeds", seeds, "seeds per variant");
  add_common(ablate_cmd);

  // sparsity-sweep
  std::vector<double> keep_ratios;
  auto* sweep_cmd = app.add_subcommand("sparsity-sweep",
                                       "frozen evaluation under target sparsification");
  sweep_cmd->add_option("--checkpoint", checkpoint_file, "trained checkpoint")->required();
  sweep_cmd->add_option("--data", data_dir, "benchmark directory")->required();
  sweep_cmd->add_option("--out", out_dir, "output directory")->required();
  sweep_cmd->add_option("--keep-ratios", keep_ratios, "keep ratios (descending)")
      ->delimiter(',');
  add_common(sweep_cmd);

  // model-info
  auto* info_cmd = app.add_subcommand("model-info", "print checkpoint config and shapes");
  info_cmd->add_option("--checkpoint", checkpoint_file, "checkpoint file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth_cmd->parsed()) return cmd_make_synthetic(synth_out, synth_cfg);
    if (info_cmd->parsed()) return cmd_model_info(checkpoint_file);

    const RunConfig cfg = resolve();
    if (sample_cmd->parsed()) return cmd_sample_tasks(cfg, data_dir, out_dir);
    if (train_cmd->parsed()) return cmd_meta_train(cfg, data_dir, out_dir, variant_name, quiet);
    if (eval_cmd->parsed()) {
      return cmd_evaluate(cfg, checkpoint_file, data_dir, out_dir, finetune_epochs,
                          split_name, ranks_csv, quiet);
    }
    if (ft_cmd->parsed()) {
      if (ft_epochs < 1) throw morse::ConfigError("finetune: --finetune-epochs must be >= 1");
      return cmd_evaluate(cfg, checkpoint_file, data_dir, out_dir, ft_epochs, split_name,
                          ranks_csv, quiet);
    }
    if (ablate_cmd->parsed()) return cmd_ablate(cfg, data_dir, out_dir, seeds, quiet);
    if (sweep_cmd->parsed()) {
      return cmd_sparsity_sweep(cfg, checkpoint_file, data_dir, out_dir, keep_ratios);
    }
    std::cerr << "no subcommand\n";
    return 1;
  } catch (const morse::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const morse::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const morse::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
