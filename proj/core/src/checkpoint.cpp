#include <bit>
#include <cstring>
#include <map>

#include "cmsa/error.hpp"
#include "cmsa/nn.hpp"
#include "io_util.hpp"
#include "json.hpp"

namespace cmsa::nn {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'C', 'K', 'P', '1'};

json config_to_json(const TrainConfig& c) {
  return {{"hidden", c.hidden},
          {"layers", c.layers},
          {"encoder_layers", c.encoder_layers},
          {"attention_width", c.attention_width},
          {"learning_rate", c.learning_rate},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"clip_norm", c.clip_norm},
          {"patience", c.patience},
          {"seed", c.seed},
          {"train_embeddings", c.train_embeddings}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.hidden = j.value("hidden", c.hidden);
  c.layers = j.value("layers", c.layers);
  c.encoder_layers = j.value("encoder_layers", c.encoder_layers);
  c.attention_width = j.value("attention_width", c.attention_width);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.patience = j.value("patience", c.patience);
  c.seed = j.value("seed", c.seed);
  c.train_embeddings = j.value("train_embeddings", c.train_embeddings);
  return c;
}

json dims_to_json(const Dims& d, const ModelParams& p) {
  json j = {{"input", d.input}, {"hidden", d.hidden}, {"layers", d.layers},
            {"attention", d.attention}};
  if (p.embedding) {
    j["embedding_rows"] = p.embedding->rows();
    j["embedding_dim"] = p.embedding->dim();
  }
  return j;
}

ModelParams skeleton(Variant variant, const json& dims) {
  Dims d{dims.at("input").get<std::size_t>(), dims.at("hidden").get<std::size_t>(),
         dims.at("layers").get<std::size_t>(), dims.value("attention", std::size_t{0})};
  ModelParams p = ModelParams::zeros(variant, d);
  if (dims.contains("embedding_rows")) {
    p.embedding = textrep::EmbeddingTable(dims.at("embedding_rows").get<std::size_t>(),
                                          dims.at("embedding_dim").get<std::size_t>(), true);
  }
  return p;
}

std::map<std::string, std::pair<std::size_t, std::size_t>> tensor_shapes(const ModelParams& p) {
  std::map<std::string, std::pair<std::size_t, std::size_t>> shapes;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    for (int dir = 0; dir < 2; ++dir) {
      const auto& cell = dir == 0 ? p.layers[l].forward : p.layers[l].backward;
      const std::string prefix = "layers." + std::to_string(l) + (dir == 0 ? ".fwd." : ".bwd.");
      for (std::size_t g = 0; g < 4; ++g) {
        const std::string gate(kGateNames[g]);
        shapes[prefix + "W_" + gate] = {cell.W[g].rows, cell.W[g].cols};
        shapes[prefix + "U_" + gate] = {cell.U[g].rows, cell.U[g].cols};
        shapes[prefix + "b_" + gate] = {cell.b[g].rows, 1};
      }
    }
  }
  if (p.attention) {
    shapes["attention.W"] = {p.attention->W.rows, p.attention->W.cols};
    shapes["attention.b"] = {p.attention->b.rows, 1};
    shapes["attention.v"] = {p.attention->v.rows, 1};
  }
  shapes["head.W"] = {p.head_W.rows, p.head_W.cols};
  shapes["head.b"] = {p.head_b.rows, 1};
  if (p.embedding) shapes["embedding"] = {p.embedding->rows(), p.embedding->dim()};
  return shapes;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

struct Reader {
  const std::string& bytes;
  std::size_t pos = 0;
  std::uint64_t take(int n) {
    if (pos + static_cast<std::size_t>(n) > bytes.size()) throw DataError("truncated checkpoint");
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    }
    pos += static_cast<std::size_t>(n);
    return v;
  }
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path,
                     CheckpointFormat format) {
  const auto& p = ckpt.params;
  json header = {{"variant", std::string(to_string(p.variant))},
                 {"dims", dims_to_json(p.dims, p)},
                 {"train_config", config_to_json(ckpt.config)},
                 {"seed", ckpt.config.seed}};
  if (format == CheckpointFormat::Binary) {
    std::string out(kMagic, 4);
    const auto head = header.dump();
    put_u32(out, static_cast<std::uint32_t>(head.size()));
    out += head;
    p.for_each([&](std::string_view, std::span<const double> s) {
      for (double v : s) put_u64(out, std::bit_cast<std::uint64_t>(v));
    });
    detail::write_file_atomic(path, out);
    return;
  }
  const auto shapes = tensor_shapes(p);
  json params = json::object();
  p.for_each([&](std::string_view name, std::span<const double> s) {
    const auto [rows, cols] = shapes.at(std::string(name));
    json arr = json::array();
    for (std::size_t r = 0; r < rows; ++r) {
      if (cols == 1) {
        arr.push_back(s[r]);
      } else {
        arr.push_back(std::vector<double>(s.begin() + static_cast<std::ptrdiff_t>(r * cols),
                                          s.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols)));
      }
    }
    params[std::string(name)] = std::move(arr);
  });
  header["params"] = std::move(params);
  detail::write_file_atomic(path, header.dump());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  try {
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0) {
      Reader rd{bytes, 4};
      const auto head_len = static_cast<std::size_t>(rd.take(4));
      if (rd.pos + head_len > bytes.size()) throw DataError("truncated checkpoint header");
      const auto header = json::parse(bytes.substr(rd.pos, head_len));
      rd.pos += head_len;
      const auto variant = parse_variant(header.at("variant").get<std::string>());
      if (!variant) throw DataError("unknown model variant");
      Checkpoint ck{skeleton(*variant, header.at("dims")),
                    config_from_json(header.at("train_config"))};
      ck.params.for_each([&](std::string_view, std::span<double> s) {
        for (auto& v : s) v = std::bit_cast<double>(rd.take(8));
      });
      if (rd.pos != bytes.size()) throw DataError("trailing bytes in checkpoint");
      return ck;
    }
    const auto j = json::parse(bytes);
    const auto variant = parse_variant(j.at("variant").get<std::string>());
    if (!variant) throw DataError("unknown model variant");
    Checkpoint ck{skeleton(*variant, j.at("dims")), config_from_json(j.at("train_config"))};
    const auto& params = j.at("params");
    const auto shapes = tensor_shapes(ck.params);
    ck.params.for_each([&](std::string_view name, std::span<double> s) {
      const std::string key(name);
      if (!params.contains(key)) throw DataError("checkpoint lacks parameter \"" + key + "\"");
      const auto& arr = params[key];
      const auto [rows, cols] = shapes.at(key);
      if (!arr.is_array() || arr.size() != rows) {
        throw DataError("parameter \"" + key + "\" has the wrong shape");
      }
      for (std::size_t r = 0; r < rows; ++r) {
        if (cols == 1) {
          s[r] = arr[r].get<double>();
          continue;
        }
        if (!arr[r].is_array() || arr[r].size() != cols) {
          throw DataError("parameter \"" + key + "\" has the wrong shape");
        }
        for (std::size_t c = 0; c < cols; ++c) s[r * cols + c] = arr[r][c].get<double>();
      }
    });
    return ck;
  } catch (const json::exception& e) {
    throw DataError("malformed checkpoint " + path.string() + ": " + e.what());
  } catch (const ShapeError& e) {
    throw DataError("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace cmsa::nn
