#pragma once

#include <functional>
#include <string>
#include <vector>

#include "s2kd/data.hpp"
#include "s2kd/distill.hpp"
#include "s2kd/metrics.hpp"
#include "s2kd/models.hpp"

// Evaluation and the four-mode ablation sweep used by the command-line
// ablate and eval commands.

namespace s2kd {

// Test-split forecasting quality: per-sample MSE/MAE/SSIM against the target
// frames, averaged over the split. Runs outside the gradient tape.
MetricsRow evaluate_teacher(const Dataset& data, const TeacherModel& model,
                            const std::string& split = "test");
MetricsRow evaluate_student(const Dataset& data, const StudentModel& model,
                            const std::string& mode_label,
                            const std::string& split = "test");

// Header plus one row per entry; numbers carry full round-trip precision.
std::string metrics_to_csv(const std::vector<MetricsRow>& rows);

struct AblationResult {
  std::vector<MetricsRow> rows;        // baseline, spectral, semantic, full
  std::vector<TrainReport> reports;    // matching order
};

// Trains one student per distillation mode with identical seeds and
// hyperparameters, then scores each on the test split. `on_mode` (optional)
// is invoked before each run with the mode name, for progress reporting.
AblationResult run_ablation(const Dataset& data, const TeacherModel& teacher,
                            const ModelConfig& mcfg, const TrainConfig& tcfg,
                            const std::function<void(const std::string&)>& on_mode = {});

}  // namespace s2kd
