#pragma once

#include <filesystem>
#include <string>

#include "ballot/data_io.hpp"
#include "ballot/pipeline.hpp"
#include "json.hpp"

namespace ballot {

// Everything one config file describes.
struct RunConfig {
  TrainConfig train;
  DatasetSpec data;
  PruneMethod method = PruneMethod::ballot;
};

// Schema (all keys optional, unknown keys rejected):
//   model  {hidden}
//   train  {epochs, lr0, batch, milestones, class_weight_split}
//   prune  {omega, gamma, eta, method}
//   refine {rewind_epoch, epsilon, delta, max_rounds}
//   data   {synthetic {counts, dim, mean_scale, std, seed} | csv {path, label_column, classes},
//           split, normalize, split_seed}
//   seed
// An omitted refine.rewind_epoch defaults to min(10, epochs - 1); an explicit
// one must be smaller than train.epochs. Errors are ConfigError with the key
// path of the offending field.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

// Fully-populated echo of a config, suitable for reports and for parse_config.
nlohmann::ordered_json config_to_json(const RunConfig& config);

}  // namespace ballot
