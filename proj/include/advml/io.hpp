#pragma once

#include <string>

#include "advml/dataset.hpp"
#include "advml/nn.hpp"

namespace advml {

/// advml-mlp-v1 JSON checkpoint. Doubles are written with shortest
/// round-trip precision, so load(save(m)) reproduces outputs exactly.
void save_checkpoint(const MlpModel& model, const std::string& path);
MlpModel load_checkpoint(const std::string& path);

std::string checkpoint_to_json(const MlpModel& model);
MlpModel checkpoint_from_json(const std::string& text);

/// advml-data-v1 JSON dataset file.
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

std::string dataset_to_json(const Dataset& data);
Dataset dataset_from_json(const std::string& text);

/// Binary PGM (P5, maxval 255, value = round(255 * pixel)) of one grid row.
void write_pgm(const Matrix& image_row, const GridShape& grid, const std::string& path);

std::string activation_name(ActivationKind kind);
ActivationKind activation_from_name(const std::string& name);

}  // namespace advml
