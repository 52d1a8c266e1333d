#include <fstream>
#include <sstream>

#include "polymp/error.hpp"
#include "polymp/models.hpp"

namespace polymp::models {

namespace {

std::string_view pooling_name(Pooling p) {
  switch (p) {
    case Pooling::Mean: return "mean";
    case Pooling::Max: return "max";
    case Pooling::Sum: return "sum";
  }
  return "?";
}

Pooling pooling_from_name(const std::string& s) {
  if (s == "mean") return Pooling::Mean;
  if (s == "max") return Pooling::Max;
  if (s == "sum") return Pooling::Sum;
  fail(ErrorCode::InvalidArgument, "unknown pooling '" + s + "'");
}

}  // namespace

nlohmann::json to_json(const ModelConfig& cfg) {
  return {{"arch", arch_name(cfg.arch)},
          {"dims", cfg.dims},
          {"n_classes", cfg.n_classes},
          {"pooling", pooling_name(cfg.pooling)},
          {"neighbor_pooling", pooling_name(cfg.neighbor_pooling)},
          {"head_hidden", cfg.head_hidden},
          {"max_seq_len", cfg.max_seq_len},
          {"kernel_size", cfg.kernel_size},
          {"relative_only", cfg.relative_only}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig cfg = ModelConfig::defaults(arch_from_name(j.at("arch").get<std::string>()),
                                          j.value("n_classes", std::size_t{26}));
  if (j.contains("dims")) cfg.dims = j.at("dims").get<std::vector<std::size_t>>();
  if (j.contains("pooling")) cfg.pooling = pooling_from_name(j.at("pooling").get<std::string>());
  if (j.contains("neighbor_pooling")) {
    cfg.neighbor_pooling = pooling_from_name(j.at("neighbor_pooling").get<std::string>());
  }
  cfg.head_hidden = j.value("head_hidden", cfg.head_hidden);
  cfg.max_seq_len = j.value("max_seq_len", cfg.max_seq_len);
  cfg.kernel_size = j.value("kernel_size", cfg.kernel_size);
  cfg.relative_only = j.value("relative_only", cfg.relative_only);
  validate(cfg);
  return cfg;
}

nlohmann::json checkpoint_to_json(const Model& model) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, t] : model.params.tensors) {
    params[name] = {{"shape", t.shape()}, {"data", std::vector<double>(t.data().begin(), t.data().end())}};
  }
  return {{"arch", arch_name(model.config.arch)}, {"config", to_json(model.config)}, {"params", params}};
}

Model checkpoint_from_json(const nlohmann::json& j) {
  try {
    Model model;
    model.config = config_from_json(j.at("config"));
    if (j.at("arch").get<std::string>() != arch_name(model.config.arch)) {
      fail(ErrorCode::IncompatibleCheckpoint, "arch field disagrees with config");
    }
    const ModelParams reference = init_params(model.config, 0);
    const auto& stored = j.at("params");
    if (stored.size() != reference.tensors.size()) {
      fail(ErrorCode::IncompatibleCheckpoint, "parameter set does not match config");
    }
    model.params.arch = model.config.arch;
    for (const auto& [name, ref] : reference.tensors) {
      if (!stored.contains(name)) fail(ErrorCode::IncompatibleCheckpoint, "missing parameter " + name);
      const auto shape = stored[name].at("shape").get<Shape>();
      if (shape != ref.shape()) {
        fail(ErrorCode::IncompatibleCheckpoint, "parameter " + name + " has shape " +
                                                    shape_string(shape) + ", config expects " +
                                                    shape_string(ref.shape()));
      }
      model.params.tensors.emplace(
          name, Tensor::from(shape, stored[name].at("data").get<std::vector<double>>(), true));
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::IncompatibleCheckpoint, std::string("malformed checkpoint: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::IncompatibleCheckpoint) throw;
    fail(ErrorCode::IncompatibleCheckpoint, e.what());
  }
}

void save_checkpoint(const Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IOErr, "cannot write " + path);
  out << checkpoint_to_json(model).dump() << '\n';
  if (!out) fail(ErrorCode::IOErr, "write failed for " + path);
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IOErr, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::IncompatibleCheckpoint, std::string("checkpoint is not JSON: ") + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace polymp::models
