#pragma once

// Model checkpoints: a versioned JSON container with the model config, the
// genotype of discrete models, every weight tensor (name -> shape + row-major
// values), normalization running statistics and, for search networks, the
// architecture parameters. Doubles are written with round-trip precision, so
// save -> load is bit-exact.

#include "seqnas/arch.hpp"
#include "seqnas/model.hpp"

#include <json.hpp>

#include <optional>
#include <string>

namespace seqnas {

nlohmann::ordered_json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct Checkpoint {
    Model model;
    std::optional<ArchParameters> alphas;
};

nlohmann::ordered_json checkpoint_to_json(Model& model, const ArchParameters* alphas = nullptr);
Checkpoint checkpoint_from_json(const nlohmann::json& j);  // throws FormatError

void save_checkpoint(const std::string& path, Model& model, const ArchParameters* alphas = nullptr);
Checkpoint load_checkpoint(const std::string& path);

std::string read_text_file(const std::string& path);  // throws DataError
void write_text_file(const std::string& path, const std::string& text);

}  // namespace seqnas
