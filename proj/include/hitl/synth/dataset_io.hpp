#pragma once

#include "hitl/synth/generator.hpp"

#include <json.hpp>

#include <filesystem>

namespace hitl::synth {

nlohmann::json to_json(const DomainSpec& spec);
DomainSpec domain_spec_from_json(const nlohmann::json& j);

/// Writes manifest.json plus volumes/<id>.vol and labels/<id>.lbl per case.
void write_dataset_dir(const std::filesystem::path& dir, const DatasetBundle& bundle);

/// Throws not_found when the directory or manifest is missing and
/// malformed_stream when the manifest or a sample file is corrupt.
DatasetBundle load_dataset_dir(const std::filesystem::path& dir);

} // namespace hitl::synth
