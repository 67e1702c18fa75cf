#pragma once

#include <functional>
#include <string>
#include <vector>

#include "s2kd/data.hpp"
#include "s2kd/models.hpp"
#include "s2kd/tensor.hpp"

// Loss functions and the two-stage training procedure: Stage 1 fits the
// privileged teacher on prediction error alone and freezes it; Stage 2 fits
// the vision-only student on prediction error plus a weighted distillation
// term computed against the frozen teacher's fused latent.

namespace s2kd {

enum class DistillMode { baseline, spectral, semantic, full };

DistillMode parse_mode(const std::string& name);  // UsageError on unknown names
const char* mode_name(DistillMode mode);

struct DistillConfig {
  double lambda = 1.0;  // weight of the distillation term in the student objective
  double beta = 0.5;    // weight of the spectral term inside the distillation term
  DistillMode mode = DistillMode::full;

  void validate() const;  // ConfigError on negative weights
};

// Mean squared error over all elements; DimensionError on shape mismatch.
Tensor pred_loss(const Tensor& prediction, const Tensor& truth);

// Mean squared error between the student's projected latent and the teacher's
// fused latent. The teacher side must be detached: a fused latent that still
// requires grad violates the frozen-teacher rule (ContractError).
Tensor semantic_loss(const Tensor& z_proj, const Tensor& z_fused);

// baseline -> 0 (constant, no gradient); semantic -> semantic_loss;
// spectral -> spectral_loss; full -> semantic_loss + beta * spectral_loss.
Tensor distill_loss(const Tensor& z_proj, const Tensor& z_fused, const DistillConfig& cfg);

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 100;
  double plateau_factor = 0.1;
  int plateau_patience = 5;
  int early_stop_patience = 10;
  std::uint64_t seed = 42;
  DistillConfig distill;  // student stage only

  // Called after each epoch (progress reporting); may be empty.
  std::function<void(const struct EpochStats&)> on_epoch;
};

struct EpochStats {
  std::size_t epoch = 0;       // 1-based
  double train_loss = 0.0;     // epoch mean of the optimized objective
  double val_loss = 0.0;       // same objective on the validation split
  double lr = 0.0;             // rate used during this epoch
  double pred_component = 0.0;
  double semantic_component = 0.0;
  double spectral_component = 0.0;
  double seconds = 0.0;        // wall clock; excluded from determinism checks
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  double best_val_loss = 0.0;
  std::size_t best_epoch = 0;  // 1-based
  bool stopped_early = false;

  // Header row then one row per epoch. The seconds column is wall clock and
  // is the only column not reproducible across runs.
  std::string to_csv() const;
};

struct TeacherTrainResult {
  TeacherModel model;  // frozen on return
  TrainReport report;
};

// Adam (batch 16, lr 1e-3 by default), plateau schedule, early stopping.
// InputError if the dataset lacks descriptors. The returned teacher is frozen.
TeacherTrainResult train_teacher(const Dataset& data, const ModelConfig& mcfg,
                                 const TrainConfig& tcfg);

// Same loop for the vision-only control: the teacher is created, its semantic
// channel severed, and trained identically.
TeacherTrainResult train_vision_only_teacher(const Dataset& data, const ModelConfig& mcfg,
                                             const TrainConfig& tcfg);

struct StudentTrainResult {
  StudentModel model;
  TrainReport report;
};

// Stage 2. The teacher must be frozen (ContractError otherwise); it runs
// outside the tape purely to emit z_fused, computed once per sample up front
// since a frozen teacher's latents are constants.
// With mode=baseline or lambda=0 the teacher is never consulted and the
// projection layer is excluded from optimization, so those two configurations
// produce bit-identical trajectories. After every epoch the loop verifies
// that no teacher parameter holds a gradient.
StudentTrainResult train_student(const Dataset& data, const TeacherModel& teacher,
                                 const ModelConfig& mcfg, const TrainConfig& tcfg);

}  // namespace s2kd
