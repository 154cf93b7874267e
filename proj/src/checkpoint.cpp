#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dlse/deep_lse.hpp"
#include "dlse/errors.hpp"

namespace dlse {

namespace {

constexpr int kFormatVersion = 1;

template <class T>
T field(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw SchemaError("checkpoint: missing field '" + std::string(key) + "' in " + where);
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw SchemaError("checkpoint: field '" + std::string(key) + "' in " + where + " has the wrong type");
  }
}

}  // namespace

std::string to_checkpoint(const DeepLseNet& net) {
  validate(net);
  nlohmann::json doc;
  doc["format_version"] = kFormatVersion;
  doc["input_dim"] = net.input_dim;
  doc["c_out"] = net.c_out;
  doc["layers"] = nlohmann::json::array();
  for (const auto& lp : net.layers) {
    nlohmann::json jl;
    jl["width"] = lp.width;
    jl["a"] = lp.a;
    jl["b"] = lp.b;
    if (lp.has_skip()) jl["eta"] = lp.eta;
    jl["t_raw"] = lp.t_raw;
    doc["layers"].push_back(std::move(jl));
  }
  return doc.dump(2) + "\n";
}

DeepLseNet from_checkpoint(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(std::string("checkpoint: not valid JSON: ") + e.what());
  }
  const int version = field<int>(doc, "format_version", "document");
  if (version != kFormatVersion) throw SchemaError("checkpoint: unsupported format_version " + std::to_string(version));

  DeepLseNet net;
  net.input_dim = field<std::size_t>(doc, "input_dim", "document");
  net.c_out = field<double>(doc, "c_out", "document");
  if (!doc.contains("layers") || !doc["layers"].is_array()) throw SchemaError("checkpoint: missing 'layers' array");
  for (std::size_t l = 0; l < doc["layers"].size(); ++l) {
    const auto& jl = doc["layers"][l];
    const std::string where = "layer " + std::to_string(l + 1);
    LayerParams lp;
    lp.width = field<std::size_t>(jl, "width", where);
    lp.a = field<std::vector<double>>(jl, "a", where);
    lp.b = field<std::vector<double>>(jl, "b", where);
    if (jl.contains("eta")) lp.eta = field<std::vector<double>>(jl, "eta", where);
    lp.t_raw = field<double>(jl, "t_raw", where);
    net.layers.push_back(std::move(lp));
  }
  try {
    validate(net);
  } catch (const DomainError& e) {
    throw SchemaError(std::string("checkpoint: ") + e.what());
  }
  return net;
}

void save_checkpoint(const DeepLseNet& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SchemaError("cannot open checkpoint for writing: " + path);
  out << to_checkpoint(net);
}

DeepLseNet load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open checkpoint: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_checkpoint(ss.str());
}

}  // namespace dlse
