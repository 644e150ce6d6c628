#include "morse/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <cstring>
#include <fstream>
#include <map>
#include <span>
#include <vector>

namespace morse {

namespace {

constexpr char kMagic[8] = {'M', 'O', 'R', 'S', 'E', 'C', 'K', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw DataError("checkpoint: truncated file");
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw DataError("checkpoint: truncated file");
  return v;
}

struct Entry {
  std::vector<std::uint64_t> dims;
  std::vector<Scalar> data;
};

void write_entry(std::ostream& out, const std::string& name,
                 std::span<const std::uint64_t> dims, std::span<const Scalar> data) {
  write_u32(out, std::uint32_t(name.size()));
  out.write(name.data(), std::streamsize(name.size()));
  write_u32(out, std::uint32_t(dims.size()));
  std::uint64_t total = 1;
  for (std::uint64_t d : dims) {
    write_u64(out, d);
    total *= d;
  }
  if (total != data.size()) throw ContractError("checkpoint: dims/data mismatch");
  out.write(reinterpret_cast<const char*>(data.data()),
            std::streamsize(data.size() * sizeof(Scalar)));
}

std::vector<Scalar> flatten(const Matrix& m) {
  std::vector<Scalar> out(std::size_t(m.size()));
  // Matrix is row-major; copy row by row for clarity.
  std::size_t at = 0;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out[at++] = m(i, j);
  }
  return out;
}

Matrix unflatten(const Entry& e, const std::string& name) {
  if (e.dims.size() != 2) {
    throw DataError("checkpoint: expected rank-2 entry for " + name);
  }
  Matrix m(Index(e.dims[0]), Index(e.dims[1]));
  std::size_t at = 0;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = e.data[at++];
  }
  return m;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("checkpoint: cannot open for writing: " + path.string());
  out.write(kMagic, sizeof(kMagic));

  nlohmann::json config{
      {"dim", params.cfg.dim},
      {"layers", params.cfg.layers},
      {"num_bases", params.cfg.num_bases},
      {"relation_count", params.cfg.relation_count},
      {"score_kind", to_string(params.cfg.score_kind)},
      {"add_inverse_edges", params.cfg.add_inverse_edges},
      {"relation_labels", params.relation_labels},
      {"version", kVersion},
  };
  const std::string config_str = config.dump();
  write_u32(out, std::uint32_t(config_str.size()));
  out.write(config_str.data(), std::streamsize(config_str.size()));

  // Per-layer bases are stacked into one rank-3 entry; everything else is a
  // rank-2 matrix under its registry name.
  std::uint32_t entry_count = 3 + 3 * std::uint32_t(params.layers.size()) + 1;
  write_u32(out, entry_count);

  auto write_matrix = [&](const std::string& name, const Matrix& m) {
    const std::uint64_t dims[2] = {std::uint64_t(m.rows()), std::uint64_t(m.cols())};
    write_entry(out, name, dims, flatten(m));
  };

  write_matrix("relation_emb", params.relation_emb);
  write_matrix("relation_dom", params.relation_dom);
  write_matrix("relation_ran", params.relation_ran);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const LayerParams& layer = params.layers[l];
    const std::string prefix = "layer" + std::to_string(l) + ".";
    std::vector<Scalar> stacked;
    for (const Matrix& b : layer.basis) {
      auto flat = flatten(b);
      stacked.insert(stacked.end(), flat.begin(), flat.end());
    }
    const std::uint64_t dims3[3] = {std::uint64_t(layer.basis.size()),
                                    std::uint64_t(layer.basis[0].rows()),
                                    std::uint64_t(layer.basis[0].cols())};
    write_entry(out, prefix + "basis", dims3, stacked);
    write_matrix(prefix + "coeff", layer.coeff);
    write_matrix(prefix + "self_loop", layer.self_loop);
  }
  write_matrix("jk_matrix", params.jk);
  if (!out) throw DataError("checkpoint: write failed: " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open: " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("checkpoint: bad magic in " + path.string());
  }

  const std::uint32_t config_len = read_u32(in);
  std::string config_str(config_len, '\0');
  in.read(config_str.data(), config_len);
  if (!in) throw DataError("checkpoint: truncated config");

  nlohmann::json config;
  try {
    config = nlohmann::json::parse(config_str);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: bad config JSON: ") + e.what());
  }

  ModelParams p;
  p.cfg.dim = config.at("dim").get<int>();
  p.cfg.layers = config.at("layers").get<int>();
  p.cfg.num_bases = config.at("num_bases").get<int>();
  p.cfg.relation_count = config.at("relation_count").get<int>();
  p.cfg.score_kind = score_kind_from_string(config.at("score_kind").get<std::string>());
  p.cfg.add_inverse_edges = config.at("add_inverse_edges").get<bool>();
  p.relation_labels = config.at("relation_labels").get<std::vector<std::string>>();
  p.cfg.validate();

  const std::uint32_t entry_count = read_u32(in);
  std::map<std::string, Entry> entries;
  for (std::uint32_t i = 0; i < entry_count; ++i) {
    const std::uint32_t name_len = read_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const std::uint32_t rank = read_u32(in);
    Entry e;
    std::uint64_t total = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      e.dims.push_back(read_u64(in));
      total *= e.dims.back();
    }
    e.data.resize(total);
    in.read(reinterpret_cast<char*>(e.data.data()),
            std::streamsize(total * sizeof(Scalar)));
    if (!in) throw DataError("checkpoint: truncated entry " + name);
    entries.emplace(std::move(name), std::move(e));
  }

  auto take = [&](const std::string& name) -> Entry {
    auto it = entries.find(name);
    if (it == entries.end()) throw DataError("checkpoint: missing entry " + name);
    Entry e = std::move(it->second);
    entries.erase(it);
    return e;
  };

  p.relation_emb = unflatten(take("relation_emb"), "relation_emb");
  p.relation_dom = unflatten(take("relation_dom"), "relation_dom");
  p.relation_ran = unflatten(take("relation_ran"), "relation_ran");
  p.layers.resize(std::size_t(p.cfg.layers));
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const std::string prefix = "layer" + std::to_string(l) + ".";
    Entry basis = take(prefix + "basis");
    if (basis.dims.size() != 3) {
      throw DataError("checkpoint: expected rank-3 basis entry");
    }
    const Index nb = Index(basis.dims[0]);
    const Index rows = Index(basis.dims[1]);
    const Index cols = Index(basis.dims[2]);
    std::size_t at = 0;
    for (Index b = 0; b < nb; ++b) {
      Matrix m(rows, cols);
      for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) m(i, j) = basis.data[at++];
      }
      p.layers[l].basis.push_back(std::move(m));
    }
    p.layers[l].coeff = unflatten(take(prefix + "coeff"), prefix + "coeff");
    p.layers[l].self_loop = unflatten(take(prefix + "self_loop"), prefix + "self_loop");
  }
  p.jk = unflatten(take("jk_matrix"), "jk_matrix");
  if (!entries.empty()) {
    throw DataError("checkpoint: unexpected extra entry " + entries.begin()->first);
  }
  return p;
}

}  // namespace morse
