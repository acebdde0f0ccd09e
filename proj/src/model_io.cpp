// .vgfm weight container codec.

#include <json.hpp>

#include "faceret/binary_io.hpp"
#include "faceret/error.hpp"
#include "faceret/network.hpp"

namespace faceret {

namespace {

using nlohmann::json;

constexpr std::uint32_t kVersion = 1;
constexpr const char* kDimOrder = "out,in,h,w";

json layer_to_json(const LayerSpec& layer) {
  json j{{"index", layer.index}, {"name", layer.name}};
  switch (layer.type()) {
    case LayerType::Input:
      j["type"] = "input";
      break;
    case LayerType::Conv: {
      const auto& p = layer.conv();
      j["type"] = "conv";
      j["filter"] = p.filter;
      j["in_channels"] = p.in_channels;
      j["out_channels"] = p.out_channels;
      j["stride"] = p.stride;
      j["pad"] = p.pad;
      break;
    }
    case LayerType::Pool: {
      const auto& p = layer.pool();
      j["type"] = "pool";
      j["window"] = p.window;
      j["stride"] = p.stride;
      j["pad"] = p.pad;
      break;
    }
    case LayerType::Activation:
      j["type"] = "activation";
      j["activation"] = layer.activation().to_string();
      break;
  }
  return j;
}

std::size_t positive(const json& j, const char* key, const std::string& where, bool allow_zero = false) {
  if (!j.contains(key) || !j[key].is_number_integer()) {
    throw Error(ErrorKind::Format, where + ": missing integer field \"" + key + "\"");
  }
  const auto v = j[key].get<std::int64_t>();
  if (v < 0 || (!allow_zero && v == 0)) {
    throw Error(ErrorKind::Validation, where + ": field \"" + key + "\" must be " +
                                           (allow_zero ? ">= 0" : "> 0"));
  }
  return static_cast<std::size_t>(v);
}

LayerSpec layer_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::Format, "layer entry is not an object");
  LayerSpec layer;
  const std::string where = "layer " + j.value("name", std::string("?"));
  layer.index = positive(j, "index", where, true);
  layer.name = j.value("name", std::string());
  if (layer.name.empty()) throw Error(ErrorKind::Format, where + ": missing name");
  const std::string type = j.value("type", std::string());
  if (type == "input") {
    layer.params = InputParams{};
  } else if (type == "conv") {
    layer.params = ConvParams{positive(j, "filter", where), positive(j, "in_channels", where),
                              positive(j, "out_channels", where), positive(j, "stride", where),
                              positive(j, "pad", where, true)};
  } else if (type == "pool") {
    layer.params = PoolParams{positive(j, "window", where), positive(j, "stride", where),
                              positive(j, "pad", where, true)};
  } else if (type == "activation") {
    try {
      layer.params = ActivationKind::parse(j.value("activation", std::string("relu")));
    } catch (const Error& e) {
      throw Error(ErrorKind::Format, where + ": " + e.what());
    }
  } else {
    throw Error(ErrorKind::Format, where + ": unknown layer type \"" + type + "\"");
  }
  return layer;
}

std::vector<std::size_t> shape_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw Error(ErrorKind::Format, where + ": shape must be a non-empty array");
  std::vector<std::size_t> dims;
  for (const auto& d : j) {
    if (!d.is_number_integer() || d.get<std::int64_t>() <= 0) {
      throw Error(ErrorKind::Format, where + ": shape extents must be positive integers");
    }
    dims.push_back(d.get<std::size_t>());
  }
  return dims;
}

std::string dims_string(const std::vector<std::size_t>& dims) { return Shape(dims).to_string(); }

json header_for(const NetworkSpec& spec, const WeightStore& weights) {
  json layers = json::array();
  json blobs = json::array();
  for (const LayerSpec& layer : spec.layers) {
    layers.push_back(layer_to_json(layer));
    if (layer.type() == LayerType::Conv) {
      const ConvWeights& w = weights.at(layer.index);
      blobs.push_back({{"layer", layer.name}, {"role", "weight"}, {"shape", w.weight.shape().dims()}});
      blobs.push_back({{"layer", layer.name}, {"role", "bias"}, {"shape", {w.bias.size()}}});
    }
  }
  return json{{"format", "vgfm"},
              {"dim_order", kDimOrder},
              {"input_shape", spec.input_shape.dims()},
              {"normalization_mean", spec.normalization_mean},
              {"layers", std::move(layers)},
              {"blobs", std::move(blobs)}};
}

}  // namespace

std::string spec_to_json(const NetworkSpec& spec) {
  json layers = json::array();
  for (const LayerSpec& layer : spec.layers) layers.push_back(layer_to_json(layer));
  return json{{"input_shape", spec.input_shape.dims()},
              {"normalization_mean", spec.normalization_mean},
              {"layers", std::move(layers)}}
      .dump(2);
}

std::vector<std::uint8_t> encode_model(const NetworkSpec& spec, const WeightStore& weights) {
  spec.validate();
  weights.validate_against(spec);
  const std::string header = header_for(spec, weights).dump();

  std::vector<std::uint8_t> out;
  io::put_bytes(out, "VGFM");
  io::put_u32(out, kVersion);
  io::put_u32(out, static_cast<std::uint32_t>(header.size()));
  io::put_bytes(out, header);
  for (const LayerSpec& layer : spec.layers) {
    if (layer.type() != LayerType::Conv) continue;
    const ConvWeights& w = weights.at(layer.index);
    io::put_floats(out, w.weight.values());
    io::put_floats(out, w.bias);
  }
  return out;
}

Model decode_model(std::span<const std::uint8_t> bytes) {
  io::Reader in(bytes, "vgfm");
  in.expect_magic("VGFM");
  const std::uint32_t version = in.u32();
  if (version != kVersion) {
    throw Error(ErrorKind::Format, "vgfm: unsupported version " + std::to_string(version));
  }
  const std::uint32_t header_len = in.u32();
  auto header_bytes = in.take(header_len);

  json header;
  try {
    header = json::parse(header_bytes.begin(), header_bytes.end());
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, std::string("vgfm: header is not valid JSON: ") + e.what());
  }
  if (!header.is_object()) throw Error(ErrorKind::Format, "vgfm: header must be a JSON object");
  if (header.value("dim_order", std::string()) != kDimOrder) {
    throw Error(ErrorKind::Format, std::string("vgfm: dim_order must be \"") + kDimOrder + "\"");
  }

  Model model;
  NetworkSpec& spec = model.spec;
  if (!header.contains("input_shape")) throw Error(ErrorKind::Format, "vgfm: missing input_shape");
  spec.input_shape = Shape(shape_from_json(header["input_shape"], "input_shape"));
  if (header.contains("normalization_mean")) {
    const auto& mean = header["normalization_mean"];
    if (!mean.is_array()) throw Error(ErrorKind::Format, "vgfm: normalization_mean must be an array");
    for (const auto& m : mean) {
      if (!m.is_number()) throw Error(ErrorKind::Format, "vgfm: normalization_mean must hold numbers");
      spec.normalization_mean.push_back(m.get<float>());
    }
  }
  if (!header.contains("layers") || !header["layers"].is_array()) {
    throw Error(ErrorKind::Format, "vgfm: missing layers array");
  }
  for (const auto& j : header["layers"]) spec.layers.push_back(layer_from_json(j));
  spec.validate();

  std::map<std::string, std::size_t> by_name;
  for (const LayerSpec& layer : spec.layers) by_name.emplace(layer.name, layer.index);

  if (!header.contains("blobs") || !header["blobs"].is_array()) {
    throw Error(ErrorKind::Format, "vgfm: missing blobs array");
  }
  std::map<std::size_t, Tensor> weight_blobs;
  std::map<std::size_t, std::vector<float>> bias_blobs;
  for (const auto& blob : header["blobs"]) {
    const std::string name = blob.value("layer", std::string());
    const std::string role = blob.value("role", std::string());
    const std::string where = "blob " + name + "/" + role;
    auto it = by_name.find(name);
    if (it == by_name.end()) throw Error(ErrorKind::Validation, where + ": no such layer");
    const LayerSpec& layer = spec.layers[it->second];
    if (layer.type() != LayerType::Conv) {
      throw Error(ErrorKind::Validation, where + ": layer is not a Conv layer");
    }
    const ConvParams& p = layer.conv();
    const auto found = shape_from_json(blob.value("shape", json()), where);
    std::vector<std::size_t> expected;
    if (role == "weight") {
      expected = {p.out_channels, p.in_channels, p.filter, p.filter};
    } else if (role == "bias") {
      expected = {p.out_channels};
    } else {
      throw Error(ErrorKind::Format, where + ": unknown blob role");
    }
    if (found != expected) {
      throw Error(ErrorKind::Validation, "layer " + name + " " + role + ": expected " +
                                             dims_string(expected) + ", found " + dims_string(found));
    }
    Tensor t{Shape(found)};
    in.floats(t.values());
    if (role == "weight") {
      weight_blobs.insert_or_assign(layer.index, std::move(t));
    } else {
      const auto v = t.values();
      bias_blobs.insert_or_assign(layer.index, std::vector<float>(v.begin(), v.end()));
    }
  }
  if (in.remaining() != 0) {
    throw Error(ErrorKind::Format, "vgfm: " + std::to_string(in.remaining()) +
                                       " trailing bytes after the last blob");
  }

  for (const LayerSpec& layer : spec.layers) {
    if (layer.type() != LayerType::Conv) continue;
    auto w = weight_blobs.find(layer.index);
    auto b = bias_blobs.find(layer.index);
    if (w == weight_blobs.end() || b == bias_blobs.end()) {
      throw Error(ErrorKind::Weight, "vgfm: layer " + layer.name + " is missing its " +
                                         (w == weight_blobs.end() ? "weight" : "bias") + " blob");
    }
    model.weights.set(layer.index, std::move(w->second), std::move(b->second));
  }
  model.weights.validate_against(spec);
  return model;
}

void save_weights(const std::filesystem::path& path, const NetworkSpec& spec, const WeightStore& weights) {
  io::write_file(path, encode_model(spec, weights));
}

Model load_weights(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  try {
    return decode_model(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace faceret
