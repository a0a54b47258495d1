#pragma once

#include "json.hpp"

#include "fedsilo/aggregate.hpp"
#include "fedsilo/trainer.hpp"

namespace fedsilo {

nlohmann::json model_spec_to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);

nlohmann::json trainer_config_to_json(const TrainerConfig& config);
TrainerConfig trainer_config_from_json(const nlohmann::json& j);

nlohmann::json metrics_to_json(const TrainMetrics& m);
TrainMetrics metrics_from_json(const nlohmann::json& j);

} // namespace fedsilo
