#pragma once

#include <string>

#include "s2kd/data.hpp"
#include "s2kd/distill.hpp"
#include "s2kd/kvfile.hpp"
#include "s2kd/models.hpp"

// Experiment configuration: the key = value text shared by every command.
// Blocks: data.* / physics.* feed the generator, model.* the architectures,
// train.* the optimization loop, paths.* default file locations (overridable
// from the command line). Unknown keys are rejected with their line number.

namespace s2kd {

struct ExperimentConfig {
  GeneratorConfig data;  // data.* and physics.* keys
  ModelConfig model;     // model.* keys; geometry mirrors the data block until
                         // a dataset manifest overrides it at training time
  TrainConfig train;     // train.* keys; the distillation mode comes from --mode
  bool float64 = false;  // train.float64: run models in 64-bit floats
  std::string data_dir, teacher_path, out_dir;  // paths.data / .teacher / .out

  static ExperimentConfig from_file(const std::string& path);
  static ExperimentConfig from_kv(const KvFile& kv);  // ConfigError with line numbers

  // Range checks for the train block; the data and model blocks have their
  // own validators invoked where they are consumed.
  void validate() const;
};

// Architecture for a loaded dataset: geometry (grid, horizons, channels,
// descriptor slots) always comes from the dataset's own manifest; the config
// contributes the remaining model knobs.
ModelConfig model_for(const DatasetManifest& manifest, const ExperimentConfig& cfg);

}  // namespace s2kd
