#pragma once

#include <string>

namespace advml {

/// Executes one named scenario from a declarative JSON config:
///   {"scenario": "train", "seed": 42, "params": {...}}
/// Writes the long-form metrics CSV (and a manifest when a path is given).
/// All randomness flows from the seed through labeled child streams, so a
/// rerun reproduces the CSV byte for byte. Returns the process exit status.
int run_scenario(const std::string& config_text, const std::string& metrics_path,
                 const std::string& manifest_path);

int run_scenario_file(const std::string& config_path, const std::string& metrics_path,
                      const std::string& manifest_path);

}  // namespace advml
