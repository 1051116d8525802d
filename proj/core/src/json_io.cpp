#include "rcmcl/json_io.hpp"

#include <cstdio>
#include <string>
#include <type_traits>

#include "rcmcl/error.hpp"
#include "rcmcl/rng.hpp"

using nlohmann::json;

namespace rcmcl {

void require_known_keys(const json& j, std::initializer_list<std::string_view> allowed, std::string_view context) {
  if (!j.is_object()) throw ConfigError(std::string(context) + ": expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (std::string_view a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(std::string(context) + ": unknown key '" + key + "'");
  }
}

namespace {

template <typename T>
void read(const json& j, const char* key, T& out, std::string_view context) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (it->is_number_integer() && it->template get<long long>() < 0) {
        throw ConfigError(std::string(context) + "." + key + ": must be non-negative");
      }
      if (!it->is_number_integer()) throw ConfigError(std::string(context) + "." + key + ": expected an integer");
    } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!it->is_number_integer()) throw ConfigError(std::string(context) + "." + key + ": expected an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw ConfigError(std::string(context) + "." + key + ": expected a number");
    }
    out = it->template get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(context) + "." + key + ": " + e.what());
  }
}

}  // namespace

json to_json(const GeneratorSpec& s) {
  return {{"num_classes", s.num_classes},
          {"latent_dim", s.latent_dim},
          {"frames", s.frames},
          {"joints", s.joints},
          {"points_per_frame", s.points_per_frame},
          {"rgbd_dim", s.rgbd_dim},
          {"instance_noise", s.instance_noise},
          {"modality_noise", s.modality_noise},
          {"seed", s.seed},
          {"temporal_amplitude", s.temporal_amplitude},
          {"nuisance_dim", s.nuisance_dim},
          {"nuisance_scale", s.nuisance_scale}};
}

GeneratorSpec generator_spec_from_json(const json& j, GeneratorSpec s) {
  constexpr std::string_view ctx = "data";
  require_known_keys(j,
                     {"num_classes", "latent_dim", "frames", "joints", "points_per_frame", "rgbd_dim",
                      "instance_noise", "modality_noise", "seed", "temporal_amplitude", "nuisance_dim",
                      "nuisance_scale"},
                     ctx);
  read(j, "num_classes", s.num_classes, ctx);
  read(j, "latent_dim", s.latent_dim, ctx);
  read(j, "frames", s.frames, ctx);
  read(j, "joints", s.joints, ctx);
  read(j, "points_per_frame", s.points_per_frame, ctx);
  read(j, "rgbd_dim", s.rgbd_dim, ctx);
  read(j, "instance_noise", s.instance_noise, ctx);
  read(j, "modality_noise", s.modality_noise, ctx);
  read(j, "seed", s.seed, ctx);
  read(j, "temporal_amplitude", s.temporal_amplitude, ctx);
  read(j, "nuisance_dim", s.nuisance_dim, ctx);
  read(j, "nuisance_scale", s.nuisance_scale, ctx);
  s.validate();
  return s;
}

json to_json(const ModelDims& d) {
  return {{"frames", d.shape.frames},
          {"joints", d.shape.joints},
          {"points", d.shape.points},
          {"rgbd_dim", d.shape.rgbd_dim},
          {"num_classes", d.num_classes},
          {"feature_dim", d.feature_dim},
          {"proj_dim", d.proj_dim},
          {"rgbd_hidden", d.rgbd_hidden},
          {"skeleton_hidden", d.skeleton_hidden},
          {"point_hidden", d.point_hidden},
          {"head_hidden", d.head_hidden},
          {"decoder_hidden", d.decoder_hidden}};
}

ModelDims model_dims_from_json(const json& j, ModelDims d) {
  constexpr std::string_view ctx = "model";
  require_known_keys(j,
                     {"frames", "joints", "points", "rgbd_dim", "num_classes", "feature_dim", "proj_dim",
                      "rgbd_hidden", "skeleton_hidden", "point_hidden", "head_hidden", "decoder_hidden"},
                     ctx);
  read(j, "frames", d.shape.frames, ctx);
  read(j, "joints", d.shape.joints, ctx);
  read(j, "points", d.shape.points, ctx);
  read(j, "rgbd_dim", d.shape.rgbd_dim, ctx);
  read(j, "num_classes", d.num_classes, ctx);
  read(j, "feature_dim", d.feature_dim, ctx);
  read(j, "proj_dim", d.proj_dim, ctx);
  read(j, "rgbd_hidden", d.rgbd_hidden, ctx);
  read(j, "skeleton_hidden", d.skeleton_hidden, ctx);
  read(j, "point_hidden", d.point_hidden, ctx);
  read(j, "head_hidden", d.head_hidden, ctx);
  read(j, "decoder_hidden", d.decoder_hidden, ctx);
  d.validate();
  return d;
}

json to_json(const LossConfig& c) {
  return {{"tau", c.tau},           {"lambda_bt", c.lambda_bt},   {"lambda_cm", c.lambda_cm},
          {"lambda_im", c.lambda_im}, {"lambda_deg", c.lambda_deg}, {"lambda_fuse", c.lambda_fuse}};
}

LossConfig loss_config_from_json(const json& j, LossConfig c) {
  constexpr std::string_view ctx = "train.loss";
  require_known_keys(j, {"tau", "lambda_bt", "lambda_cm", "lambda_im", "lambda_deg", "lambda_fuse"}, ctx);
  read(j, "tau", c.tau, ctx);
  read(j, "lambda_bt", c.lambda_bt, ctx);
  read(j, "lambda_cm", c.lambda_cm, ctx);
  read(j, "lambda_im", c.lambda_im, ctx);
  read(j, "lambda_deg", c.lambda_deg, ctx);
  read(j, "lambda_fuse", c.lambda_fuse, ctx);
  c.validate();
  return c;
}

json to_json(const AugmentParams& a) {
  return {{"rotation_deg", a.rotation_deg},
          {"jitter", a.jitter},
          {"resample_points", a.resample_points},
          {"feature_drop", a.feature_drop}};
}

AugmentParams augment_from_json(const json& j, AugmentParams a) {
  constexpr std::string_view ctx = "train.augment";
  require_known_keys(j, {"rotation_deg", "jitter", "resample_points", "feature_drop"}, ctx);
  read(j, "rotation_deg", a.rotation_deg, ctx);
  read(j, "jitter", a.jitter, ctx);
  read(j, "resample_points", a.resample_points, ctx);
  read(j, "feature_drop", a.feature_drop, ctx);
  a.validate();
  return a;
}

json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"warmup_epochs", c.warmup_epochs},
          {"batch_size", c.batch_size},
          {"base_lr", c.base_lr},
          {"weight_decay", c.weight_decay},
          {"loss", to_json(c.loss)},
          {"augment", to_json(c.augment)},
          {"degrade_prob", c.degrade_prob},
          {"mask_joint_ratio", c.mask_joint_ratio},
          {"mask_frame_ratio", c.mask_frame_ratio},
          {"fusion", std::string(fusion_mode_name(c.fusion))},
          {"probe_epochs", c.probe_epochs},
          {"probe_lr", c.probe_lr},
          {"finetune_epochs", c.finetune_epochs},
          {"finetune_lr", c.finetune_lr},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  constexpr std::string_view ctx = "train";
  require_known_keys(j,
                     {"epochs", "warmup_epochs", "batch_size", "base_lr", "weight_decay", "loss", "augment",
                      "degrade_prob", "mask_joint_ratio", "mask_frame_ratio", "fusion", "probe_epochs", "probe_lr",
                      "finetune_epochs", "finetune_lr", "seed"},
                     ctx);
  read(j, "epochs", c.epochs, ctx);
  read(j, "warmup_epochs", c.warmup_epochs, ctx);
  read(j, "batch_size", c.batch_size, ctx);
  read(j, "base_lr", c.base_lr, ctx);
  read(j, "weight_decay", c.weight_decay, ctx);
  if (j.contains("loss")) c.loss = loss_config_from_json(j["loss"], c.loss);
  if (j.contains("augment")) c.augment = augment_from_json(j["augment"], c.augment);
  read(j, "degrade_prob", c.degrade_prob, ctx);
  read(j, "mask_joint_ratio", c.mask_joint_ratio, ctx);
  read(j, "mask_frame_ratio", c.mask_frame_ratio, ctx);
  if (j.contains("fusion")) {
    std::string name;
    read(j, "fusion", name, ctx);
    c.fusion = fusion_mode_from_name(name);
  }
  read(j, "probe_epochs", c.probe_epochs, ctx);
  read(j, "probe_lr", c.probe_lr, ctx);
  read(j, "finetune_epochs", c.finetune_epochs, ctx);
  read(j, "finetune_lr", c.finetune_lr, ctx);
  read(j, "seed", c.seed, ctx);
  c.validate();
  return c;
}

json to_json(const CorruptionGrid& g) { return {{"sigmas", g.sigmas}, {"drop_fractions", g.drop_fractions}}; }

CorruptionGrid corruption_grid_from_json(const json& j, CorruptionGrid g) {
  constexpr std::string_view ctx = "robustness.grid";
  require_known_keys(j, {"sigmas", "drop_fractions"}, ctx);
  read(j, "sigmas", g.sigmas, ctx);
  read(j, "drop_fractions", g.drop_fractions, ctx);
  g.validate();
  return g;
}

std::string json_digest(const json& j) {
  const std::uint64_t h = fnv1a64(j.dump());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace rcmcl
