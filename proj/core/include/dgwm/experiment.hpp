#pragma once

#include <cstdint>
#include <string>

#include "dgwm/data.hpp"
#include "dgwm/model.hpp"
#include "dgwm/pipeline.hpp"

namespace dgwm {

// Everything one experiment needs, parsed from a flat key=value config plus
// command-line overrides. input_dim and num_classes of the model always
// follow the data, so they are not part of the schema.
struct ExperimentConfig {
  ShiftSpec shift;
  SplitPlan plan;
  TrainConfig train;
  ModelConfig model;
  int trials = 5;
  std::string output_dir;
  std::string dataset_path;  // empty: generate from `shift`

  // Applies one key=value assignment; throws ParameterError for unknown keys
  // or unparseable values.
  void set(const std::string& key, const std::string& value);
  void validate() const;

  // Every schema key in a fixed order with %.17g reals; equal configs yield
  // equal text.
  std::string canonical_text() const;
  // FNV-1a over canonical_text; run directories are named from this.
  std::uint64_t config_hash() const;
};

// Parses `key=value` lines (blank lines and #-comments allowed) into cfg;
// errors carry the 1-based line number.
void parse_config_text(const std::string& text, ExperimentConfig& cfg,
                       const std::string& origin = "<config>");

// Reads, parses, and validates a config file.
ExperimentConfig load_config(const std::string& path);

}  // namespace dgwm
