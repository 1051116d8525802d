#include "rcmcl/checkpoint.hpp"

#include <fstream>
#include <system_error>

#include "rcmcl/error.hpp"
#include "rcmcl/json_io.hpp"

namespace fs = std::filesystem;

namespace rcmcl {

void write_directory_atomically(const fs::path& dir, const std::function<void(const fs::path&)>& write) {
  fs::path target = dir;
  if (target.filename().empty()) target = target.parent_path();
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = fs::path(target.string() + ".tmp");
  std::error_code ec;
  fs::remove_all(tmp, ec);
  fs::create_directories(tmp);
  try {
    write(tmp);
  } catch (...) {
    fs::remove_all(tmp, ec);
    throw;
  }
  fs::remove_all(target, ec);
  fs::rename(tmp, target, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + target.string() + ": " + ec.message());
}

void write_text_atomically(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  const fs::path tmp = fs::path(file.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
    os << text;
    if (!os) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, file, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + file.string() + ": " + ec.message());
}

namespace {

nlohmann::json mlp_layout(const Mlp& mlp) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : mlp.layers) {
    layers.push_back({{"in", l.w.rows()}, {"out", l.w.cols()}, {"activation", activation_name(l.act)}});
  }
  return layers;
}

void apply_layout(Mlp& mlp, const nlohmann::json& layers, const std::string& name) {
  if (!layers.is_array() || layers.size() != mlp.layers.size()) {
    throw IoError("checkpoint: layer list for " + name + " does not match model dims");
  }
  for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
    mlp.layers[i].act = activation_from_name(layers[i].at("activation").get<std::string>());
  }
}

}  // namespace

void save_checkpoint(const fs::path& dir, const ModelParams& params, const nlohmann::json& extra) {
  nlohmann::json manifest = {
      {"format", "rcmcl-checkpoint"},
      {"version", 1},
      {"dims", to_json(params.dims)},
  };
  nlohmann::json layers = {
      {"enc_r", mlp_layout(params.enc_r)}, {"enc_s", mlp_layout(params.enc_s)},
      {"enc_p", mlp_layout(params.enc_p)}, {"proj_r", mlp_layout(params.proj_r)},
      {"proj_s", mlp_layout(params.proj_s)}, {"proj_p", mlp_layout(params.proj_p)},
      {"proj_f", mlp_layout(params.proj_f)}, {"dec_s", mlp_layout(params.dec_s)},
  };
  manifest["layers"] = layers;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& [name, t] : named_tensors(params, true)) {
    tensors.push_back({{"name", name}, {"rows", t->rows()}, {"cols", t->cols()}});
  }
  manifest["tensors"] = tensors;
  for (auto it = extra.begin(); it != extra.end(); ++it) manifest[it.key()] = it.value();

  write_directory_atomically(dir, [&](const fs::path& tmp) {
    for (const auto& [name, t] : named_tensors(params, true)) save_matrix(tmp / (name + ".rcm"), *t);
    std::ofstream os(tmp / "manifest.json", std::ios::binary);
    os << manifest.dump(2) << '\n';
    if (!os) throw IoError("failed writing checkpoint manifest");
  });
}

Checkpoint load_checkpoint(const fs::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw IoError("checkpoint: cannot open " + (dir / "manifest.json").string());
  Checkpoint ck;
  try {
    ck.manifest = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint: invalid manifest: " + std::string(e.what()));
  }
  if (ck.manifest.value("format", "") != "rcmcl-checkpoint") throw IoError("checkpoint: wrong format tag");
  const ModelDims dims = model_dims_from_json(ck.manifest.at("dims"));
  ck.params = init_params(dims, 0);
  const auto& layers = ck.manifest.at("layers");
  apply_layout(ck.params.enc_r, layers.at("enc_r"), "enc_r");
  apply_layout(ck.params.enc_s, layers.at("enc_s"), "enc_s");
  apply_layout(ck.params.enc_p, layers.at("enc_p"), "enc_p");
  apply_layout(ck.params.proj_r, layers.at("proj_r"), "proj_r");
  apply_layout(ck.params.proj_s, layers.at("proj_s"), "proj_s");
  apply_layout(ck.params.proj_p, layers.at("proj_p"), "proj_p");
  apply_layout(ck.params.proj_f, layers.at("proj_f"), "proj_f");
  apply_layout(ck.params.dec_s, layers.at("dec_s"), "dec_s");
  for (auto& [name, t] : named_tensors(ck.params, true)) {
    DenseMatrix m = load_matrix(dir / (name + ".rcm"));
    if (m.rows() != t->rows() || m.cols() != t->cols()) {
      throw IoError("checkpoint: tensor " + name + " is " + m.shape_string() + ", expected " + t->shape_string());
    }
    *t = std::move(m);
  }
  return ck;
}

}  // namespace rcmcl
