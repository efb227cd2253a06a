#include "kcgn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "kcgn/config.hpp"
#include "kcgn/error.hpp"

namespace kcgn {
namespace {

std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t out = 0;
  for (int i = 0; i < 8; ++i) out |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::size_t to_size(const std::string& text, const std::string& what) {
  try {
    std::size_t pos = 0;
    const auto v = std::stoull(text, &pos);
    if (pos != text.size()) throw std::invalid_argument(text);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw IngestionError("checkpoint manifest: bad " + what + " '" + text + "'");
  }
}

}  // namespace

void write_f64_file(const std::filesystem::path& path, std::span<const double> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestionError("cannot write '" + path.string() + "'");
  for (double v : values) {
    const std::uint64_t bits = to_le(std::bit_cast<std::uint64_t>(v));
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  if (!out) throw IngestionError("write failed for '" + path.string() + "'");
}

std::vector<double> read_f64_file(const std::filesystem::path& path) {
  const std::string bytes = read_text(path);
  if (bytes.size() % 8 != 0) {
    throw IngestionError("'" + path.string() + "' is not a whole number of float64 values");
  }
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, bytes.data() + 8 * i, 8);
    out[i] = std::bit_cast<double>(to_le(bits));
  }
  return out;
}

std::vector<TensorSpec> expected_tensors(const ModelShape& s) {
  std::vector<TensorSpec> out;
  out.push_back({"user_embedding", s.users, s.dim});
  out.push_back({"item_embedding", s.items * s.types, s.dim});
  for (std::size_t l = 0; l < s.layers; ++l)
    out.push_back({"neighbor_weight_" + std::to_string(l), s.dim, s.dim});
  for (std::size_t l = 0; l < s.layers; ++l)
    out.push_back({"self_weight_" + std::to_string(l), s.dim, s.dim});
  out.push_back({"gate", s.encoded_width(), 1});
  return out;
}

void require_compatible(const ModelParams& params, const ModelShape& shape) {
  const auto specs = expected_tensors(shape);
  const auto names = params.tensor_names();
  const auto tensors = params.tensors();
  if (names.size() != specs.size()) {
    throw DimensionError(fmt::format("checkpoint holds {} tensors, expected {} for layers = {}",
                                     names.size(), specs.size(), shape.layers));
  }
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const Tensor& t = *tensors[i];
    if (names[i] != specs[i].name || t.rows() != specs[i].rows || t.cols() != specs[i].cols) {
      throw DimensionError(fmt::format("tensor {} is {}x{}, expected {} with shape {}x{}", names[i],
                                       t.rows(), t.cols(), specs[i].name, specs[i].rows,
                                       specs[i].cols));
    }
  }
}

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ck) {
  std::filesystem::create_directories(dir);
  ck.params.validate();
  const ModelShape& s = ck.params.shape;
  std::string manifest = "format = kcgn-checkpoint-1\n";
  manifest += fmt::format("users = {}\nitems = {}\ntypes = {}\n", s.users, s.items, s.types);
  manifest += fmt::format("dim = {}\nlayers = {}\nrelation_layers = {}\nslope = {:.17g}\n", s.dim,
                          s.layers, s.relation_layers, s.slope);
  manifest += fmt::format("epoch = {}\nmetric = {:.17g}\n", ck.epoch, ck.metric);
  if (!ck.bundle.empty()) manifest += "bundle = " + ck.bundle + "\n";
  for (const auto& [k, v] : config_entries(ck.config)) manifest += "config." + k + " = " + v + "\n";

  const auto names = ck.params.tensor_names();
  const auto tensors = ck.params.tensors();
  for (std::size_t i = 0; i < names.size(); ++i) {
    const std::string file = names[i] + ".f64";
    write_f64_file(dir / file, tensors[i]->values());
    manifest += fmt::format("tensor {} {} {} {}\n", names[i], tensors[i]->rows(),
                            tensors[i]->cols(), file);
  }
  std::ofstream out(dir / kCheckpointManifest, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestionError("cannot write checkpoint manifest in '" + dir.string() + "'");
  out << manifest;
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const std::string text = read_text(dir / kCheckpointManifest);
  std::map<std::string, std::string> keys;
  struct Entry {
    std::string name;
    std::size_t rows, cols;
    std::string file;
  };
  std::vector<Entry> entries;
  std::string config_text;

  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("tensor ", 0) == 0) {
      std::istringstream ls(line.substr(7));
      std::string name, rows, cols, file;
      if (!(ls >> name >> rows >> cols >> file)) {
        throw IngestionError("checkpoint manifest: malformed line '" + line + "'");
      }
      entries.push_back({name, to_size(rows, "rows"), to_size(cols, "cols"), file});
      continue;
    }
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) {
      throw IngestionError("checkpoint manifest: malformed line '" + line + "'");
    }
    const std::string key = line.substr(0, eq), value = line.substr(eq + 3);
    if (key.rfind("config.", 0) == 0) {
      config_text += key.substr(7) + " = " + value + "\n";
    } else {
      keys[key] = value;
    }
  }
  auto need = [&](const std::string& k) -> const std::string& {
    auto it = keys.find(k);
    if (it == keys.end()) throw IngestionError("checkpoint manifest: missing '" + k + "'");
    return it->second;
  };
  if (need("format") != "kcgn-checkpoint-1") {
    throw IngestionError("unsupported checkpoint format '" + keys["format"] + "'");
  }

  Checkpoint ck;
  try {
    for (const auto& kv : parse_key_values(config_text, "checkpoint config"))
      set_config_value(ck.config, kv.key, kv.value);
    ck.metric = std::stod(need("metric"));
    ck.params.shape.slope = std::stod(need("slope"));
  } catch (const ConfigError& e) {
    throw IngestionError(std::string("checkpoint manifest: ") + e.what());
  } catch (const std::logic_error&) {
    throw IngestionError("checkpoint manifest: bad numeric field");
  }
  ck.epoch = to_size(need("epoch"), "epoch");
  if (auto it = keys.find("bundle"); it != keys.end()) ck.bundle = it->second;
  ModelShape& s = ck.params.shape;
  s.users = to_size(need("users"), "users");
  s.items = to_size(need("items"), "items");
  s.types = to_size(need("types"), "types");
  s.dim = to_size(need("dim"), "dim");
  s.layers = to_size(need("layers"), "layers");
  s.relation_layers = to_size(need("relation_layers"), "relation_layers");

  auto read_tensor = [&](const Entry& e) {
    auto values = read_f64_file(dir / e.file);
    if (values.size() != e.rows * e.cols) {
      throw IngestionError(fmt::format("tensor {}: file holds {} values, manifest says {}x{}",
                                       e.name, values.size(), e.rows, e.cols));
    }
    return Tensor(e.rows, e.cols, std::move(values));
  };
  ModelParams& p = ck.params;
  p.neighbor_weight.clear();
  p.self_weight.clear();
  for (const auto& e : entries) {
    if (e.name == "user_embedding") p.user_embedding = read_tensor(e);
    else if (e.name == "item_embedding") p.item_embedding = read_tensor(e);
    else if (e.name == "gate") p.gate = read_tensor(e);
    else if (e.name.rfind("neighbor_weight_", 0) == 0) p.neighbor_weight.push_back(read_tensor(e));
    else if (e.name.rfind("self_weight_", 0) == 0) p.self_weight.push_back(read_tensor(e));
    else throw IngestionError("checkpoint manifest: unknown tensor '" + e.name + "'");
  }
  require_compatible(p, s);
  return ck;
}

}  // namespace kcgn
