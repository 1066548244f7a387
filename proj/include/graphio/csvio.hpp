#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "graphio/types.hpp"

namespace graphio {

nlohmann::json prep_to_json(const PreprocessConfig& prep);
PreprocessConfig prep_from_json(const nlohmann::json& j);

// Manifest: JSON array of {"csv": string, "label": int, "channels": [names]}.
// Relative csv paths resolve against the manifest's directory.
Dataset load_csv_dataset(const std::filesystem::path& manifest_path);

// One row per time step, selected channels as columns, '.' decimal point.
SignalRecord load_csv_record(const std::filesystem::path& csv_path, int label,
                             const std::vector<std::string>& channel_columns);

void write_csv_record(const std::filesystem::path& csv_path, const SignalRecord& rec);

// Writes class{c}_rec{i}.csv files plus manifest.json; returns manifest path.
std::filesystem::path write_dataset(const std::filesystem::path& out_dir, const Dataset& data);

}  // namespace graphio
