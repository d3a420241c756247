#pragma once

#include "hitl/seg/segmenter.hpp"

#include <json.hpp>

#include <filesystem>

namespace hitl::seg {

nlohmann::json to_json(const TrainMeta& meta);
TrainMeta train_meta_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SegmenterModel& model);
SegmenterModel model_from_json(const nlohmann::json& j);

nlohmann::json to_json(const TrainConfig& cfg);
/// Missing keys keep the values of `base`.
TrainConfig train_config_from_json(const nlohmann::json& j, const TrainConfig& base);

void save_model(const std::filesystem::path& path, const SegmenterModel& model);
SegmenterModel load_model(const std::filesystem::path& path);

} // namespace hitl::seg
