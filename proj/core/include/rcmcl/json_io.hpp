#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "rcmcl/augment.hpp"
#include "rcmcl/data.hpp"
#include "rcmcl/losses.hpp"
#include "rcmcl/model.hpp"
#include "rcmcl/robustness.hpp"
#include "rcmcl/trainer.hpp"

namespace rcmcl {

// Throws ConfigError if `j` is not an object or holds a key outside `allowed`.
void require_known_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                        std::string_view context);

// Each *_from_json starts from `base` (defaults) and overrides present keys.
nlohmann::json to_json(const GeneratorSpec& s);
GeneratorSpec generator_spec_from_json(const nlohmann::json& j, GeneratorSpec base = {});

nlohmann::json to_json(const ModelDims& d);
ModelDims model_dims_from_json(const nlohmann::json& j, ModelDims base = {});

nlohmann::json to_json(const LossConfig& c);
LossConfig loss_config_from_json(const nlohmann::json& j, LossConfig base = {});

nlohmann::json to_json(const AugmentParams& a);
AugmentParams augment_from_json(const nlohmann::json& j, AugmentParams base = {});

// Loss and augmentation settings nest under "loss" and "augment".
nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

nlohmann::json to_json(const CorruptionGrid& g);
CorruptionGrid corruption_grid_from_json(const nlohmann::json& j, CorruptionGrid base = {});

// 16 hex digits of FNV-1a over the compact dump of `j` (object keys sorted).
std::string json_digest(const nlohmann::json& j);

}  // namespace rcmcl
