#include "s2kd/distill.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "s2kd/rng.hpp"
#include "s2kd/spectral.hpp"

namespace s2kd {

DistillMode parse_mode(const std::string& name) {
  if (name == "baseline") return DistillMode::baseline;
  if (name == "spectral") return DistillMode::spectral;
  if (name == "semantic") return DistillMode::semantic;
  if (name == "full") return DistillMode::full;
  throw UsageError("unknown mode '" + name +
                   "' (expected baseline, spectral, semantic or full)");
}

const char* mode_name(DistillMode mode) {
  switch (mode) {
    case DistillMode::baseline: return "baseline";
    case DistillMode::spectral: return "spectral";
    case DistillMode::semantic: return "semantic";
    case DistillMode::full: return "full";
  }
  return "?";
}

void DistillConfig::validate() const {
  if (lambda < 0.0) throw ConfigError("distill: lambda must be >= 0");
  if (beta < 0.0) throw ConfigError("distill: beta must be >= 0");
}

Tensor pred_loss(const Tensor& prediction, const Tensor& truth) {
  if (prediction.shape() != truth.shape())
    throw DimensionError("pred_loss: shapes " + shape_str(prediction.shape()) + " and " +
                         shape_str(truth.shape()) + " differ");
  return mean(square(sub(prediction, truth)));
}

Tensor semantic_loss(const Tensor& z_proj, const Tensor& z_fused) {
  if (z_proj.shape() != z_fused.shape())
    throw DimensionError("semantic_loss: shapes " + shape_str(z_proj.shape()) + " and " +
                         shape_str(z_fused.shape()) + " differ");
  if (z_fused.requires_grad())
    throw ContractError(
        "semantic_loss: teacher latent requires grad; the teacher must be frozen");
  return mean(square(sub(z_proj, z_fused)));
}

Tensor distill_loss(const Tensor& z_proj, const Tensor& z_fused, const DistillConfig& cfg) {
  cfg.validate();
  switch (cfg.mode) {
    case DistillMode::baseline:
      return Tensor::scalar(0.0, z_proj.dtype());
    case DistillMode::semantic:
      return semantic_loss(z_proj, z_fused);
    case DistillMode::spectral:
      return spectral_loss(z_proj, z_fused);
    case DistillMode::full:
      return add(semantic_loss(z_proj, z_fused),
                 scale(spectral_loss(z_proj, z_fused), cfg.beta));
  }
  throw ContractError("distill_loss: unreachable mode");
}

std::string TrainReport::to_csv() const {
  std::string out = "epoch,train_loss,val_loss,lr,pred,semantic,spectral,seconds\n";
  char buf[256];
  for (const EpochStats& e : epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.3f\n", e.epoch,
                  e.train_loss, e.val_loss, e.lr, e.pred_component, e.semantic_component,
                  e.spectral_component, e.seconds);
    out += buf;
  }
  return out;
}

namespace {

void require_descriptors(const Dataset& data) {
  auto check = [](const DatasetSplit& sp, const char* name) {
    if (sp.size() > 0 && (!sp.descriptors.defined() || sp.descriptors.numel() == 0))
      throw InputError(std::string("split '") + name +
                       "' is missing the privileged descriptor channel");
  };
  check(data.train, "train");
  check(data.val, "val");
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

Tensor mean_of(const std::vector<Tensor>& parts) {
  Tensor total = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) total = add(total, parts[i]);
  return scale(total, 1.0 / static_cast<double>(parts.size()));
}

// A parameter the batch never touched (e.g. the event embedding when no
// sample in the batch holds an active event) has a gradient of exactly zero;
// materialize it so the optimizer's missing-gradient contract stays strict.
void fill_untouched_grads(ParamList& params) {
  for (auto& p : params)
    if (p.tensor.requires_grad() && !p.tensor.has_grad()) p.tensor.impl()->ensure_grad();
}

// Loss components as plain doubles. `total` is recomposed from the components
// at double precision, so the logged decomposition holds exactly; the tensor
// objective is audited against it separately with a dtype-appropriate bound.
struct LossComponents {
  double total = 0.0, pred = 0.0, semantic = 0.0, spectral = 0.0;
};

double recompose(double pred, double semantic, double spectral, const DistillConfig& cfg,
                 bool distill_active) {
  if (!distill_active) return pred;
  double distill_part = 0.0;
  switch (cfg.mode) {
    case DistillMode::baseline: distill_part = 0.0; break;
    case DistillMode::semantic: distill_part = semantic; break;
    case DistillMode::spectral: distill_part = spectral; break;
    case DistillMode::full: distill_part = semantic + cfg.beta * spectral; break;
  }
  return pred + cfg.lambda * distill_part;
}

struct RunningComponents {
  double total = 0.0, pred = 0.0, semantic = 0.0, spectral = 0.0;
  std::size_t batches = 0;
  void add(const LossComponents& b) {
    total += b.total;
    pred += b.pred;
    semantic += b.semantic;
    spectral += b.spectral;
    ++batches;
  }
  void store(EpochStats& e) const {
    const double n = batches ? static_cast<double>(batches) : 1.0;
    e.train_loss = total / n;
    e.pred_component = pred / n;
    e.semantic_component = semantic / n;
    e.spectral_component = spectral / n;
  }
};

// Shared epoch driver: runs train batches through `train_batch`, computes the
// validation objective with `val_loss`, and handles the schedule, early
// stopping, logging and the per-epoch callback/check.
template <typename TrainBatch, typename ValLoss, typename EpochCheck>
TrainReport run_epochs(std::size_t train_size, const TrainConfig& tcfg,
                       TrainBatch&& train_batch, ValLoss&& val_loss,
                       EpochCheck&& after_epoch) {
  TrainReport report;
  Rng batch_rng = Rng::split(tcfg.seed, kStreamBatching);
  PlateauSchedule plateau;
  plateau.factor = tcfg.plateau_factor;
  plateau.patience = tcfg.plateau_patience;
  double lr = tcfg.lr;
  double best_val = 0.0;
  bool seen_val = false;
  int stale = 0;

  for (std::size_t epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<std::size_t> order = shuffled_indices(train_size, batch_rng);
    RunningComponents train_stats;
    for (std::size_t start = 0; start < order.size(); start += tcfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + tcfg.batch_size);
      train_stats.add(train_batch(
          std::vector<std::size_t>(order.begin() + start, order.begin() + stop), lr));
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = lr;
    train_stats.store(stats);
    stats.val_loss = val_loss();
    stats.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    report.epochs.push_back(stats);
    if (tcfg.on_epoch) tcfg.on_epoch(stats);
    after_epoch();

    if (!seen_val || stats.val_loss < best_val) {
      best_val = stats.val_loss;
      seen_val = true;
      report.best_val_loss = best_val;
      report.best_epoch = epoch;
      stale = 0;
    } else {
      ++stale;
    }
    lr = plateau.update(stats.val_loss, lr);
    if (stale >= tcfg.early_stop_patience) {
      report.stopped_early = true;
      break;
    }
  }
  return report;
}

TeacherTrainResult train_teacher_impl(const Dataset& data, const ModelConfig& mcfg,
                                      const TrainConfig& tcfg, bool vision_only) {
  mcfg.validate();
  require_descriptors(data);

  Rng init_rng = Rng::split(tcfg.seed, kStreamTeacherInit);
  TeacherTrainResult result{TeacherModel::create(mcfg, init_rng), {}};
  TeacherModel& model = result.model;
  if (vision_only) disable_semantic_channel(model);

  ParamList params = model.params();
  AdamConfig adam_cfg;
  adam_cfg.lr = tcfg.lr;
  AdamState adam(params, adam_cfg);

  auto train_batch = [&](const std::vector<std::size_t>& batch, double lr) {
    Tape tape;
    LossComponents comps;
    {
      TapeScope scope(tape);
      std::vector<Tensor> losses;
      losses.reserve(batch.size());
      for (std::size_t i : batch) {
        Tensor x = data.input_frames(data.train, i);
        Tensor y = data.target_frames(data.train, i);
        TeacherOutput out = teacher_forward(x, data.descriptor(data.train, i), model);
        losses.push_back(pred_loss(out.prediction, y.astype(out.prediction.dtype())));
      }
      Tensor objective = mean_of(losses);
      comps.pred = objective.scalar_value();
      comps.total = comps.pred;
      tape.backward(objective);
    }
    fill_untouched_grads(params);
    adam.cfg.lr = lr;
    adam.step(params);
    zero_param_grads(params);
    return comps;
  };

  auto val_loss = [&]() {
    NoTapeScope guard;
    double total = 0.0;
    for (std::size_t i = 0; i < data.val.size(); ++i) {
      Tensor x = data.input_frames(data.val, i);
      Tensor y = data.target_frames(data.val, i);
      TeacherOutput out = teacher_forward(x, data.descriptor(data.val, i), model);
      total += pred_loss(out.prediction, y.astype(out.prediction.dtype())).scalar_value();
    }
    return data.val.size() ? total / static_cast<double>(data.val.size()) : 0.0;
  };

  result.report = run_epochs(data.train.size(), tcfg, train_batch, val_loss, [] {});
  model.freeze();
  return result;
}

}  // namespace

TeacherTrainResult train_teacher(const Dataset& data, const ModelConfig& mcfg,
                                 const TrainConfig& tcfg) {
  return train_teacher_impl(data, mcfg, tcfg, false);
}

TeacherTrainResult train_vision_only_teacher(const Dataset& data, const ModelConfig& mcfg,
                                             const TrainConfig& tcfg) {
  return train_teacher_impl(data, mcfg, tcfg, true);
}

StudentTrainResult train_student(const Dataset& data, const TeacherModel& teacher,
                                 const ModelConfig& mcfg, const TrainConfig& tcfg) {
  mcfg.validate();
  tcfg.distill.validate();
  const DistillConfig& dcfg = tcfg.distill;
  // lambda = 0 disables distillation entirely, which makes the run
  // bit-identical to mode=baseline: the teacher is never consulted and the
  // same op sequence runs in both cases.
  const bool distill_active =
      dcfg.mode != DistillMode::baseline && dcfg.lambda != 0.0;
  const bool need_semantic =
      distill_active &&
      (dcfg.mode == DistillMode::semantic || dcfg.mode == DistillMode::full);
  const bool need_spectral =
      distill_active &&
      (dcfg.mode == DistillMode::spectral || dcfg.mode == DistillMode::full);
  if (distill_active && !teacher.frozen)
    throw ContractError("train_student: teacher must be frozen before distillation");
  if (distill_active) require_descriptors(data);

  Rng init_rng = Rng::split(tcfg.seed, kStreamStudentInit);
  StudentTrainResult result{StudentModel::create(mcfg, init_rng), {}};
  StudentModel& model = result.model;
  if (!distill_active) {
    // The projection layer feeds only the distillation losses; without them
    // it receives no gradient and is excluded from optimization.
    ParamList proj;
    model.projection.append_params(proj, "proj");
    freeze_params(proj);
  }

  ParamList params = model.params();
  AdamConfig adam_cfg;
  adam_cfg.lr = tcfg.lr;
  AdamState adam(params, adam_cfg);

  // Only consulted when distillation is active, so a baseline run may pass a
  // default-constructed placeholder teacher.
  ParamList teacher_params;
  if (distill_active) teacher_params = const_cast<TeacherModel&>(teacher).params();

  // The teacher is frozen, so its fused latent (and that latent's magnitude
  // spectrum) for a given sample never changes during stage 2: compute every
  // target once, outside the gradient graph, instead of re-running the
  // teacher in every epoch.
  struct FusedTarget {
    Tensor z_fused;
    MagnitudeSpectrum spectrum;
  };
  auto fused_targets = [&](const DatasetSplit& split) {
    NoTapeScope guard;
    std::vector<FusedTarget> targets;
    targets.reserve(split.size());
    for (std::size_t i = 0; i < split.size(); ++i) {
      FusedTarget t;
      t.z_fused =
          teacher_forward(data.input_frames(split, i), data.descriptor(split, i), teacher)
              .latents.z_fused;
      if (need_spectral) t.spectrum = rfft_magnitude(t.z_fused);
      targets.push_back(std::move(t));
    }
    return targets;
  };
  std::vector<FusedTarget> train_targets, val_targets;
  if (distill_active) {
    train_targets = fused_targets(data.train);
    val_targets = fused_targets(data.val);
  }

  struct SampleLoss {
    Tensor pred, semantic, spectral;
  };
  auto sample_losses = [&](const DatasetSplit& split, std::size_t i,
                           const std::vector<FusedTarget>& targets) {
    Tensor x = data.input_frames(split, i);
    StudentOutput out = student_forward(x, model);
    Tensor y = data.target_frames(split, i).astype(out.prediction.dtype());
    SampleLoss s;
    s.pred = pred_loss(out.prediction, y);
    if (distill_active) {
      const FusedTarget& t = targets[i];
      if (need_semantic) s.semantic = semantic_loss(out.z_proj, t.z_fused);
      if (need_spectral) s.spectral = spectral_loss(out.z_proj, t.spectrum);
    }
    return s;
  };

  auto train_batch = [&](const std::vector<std::size_t>& batch, double lr) {
    Tape tape;
    LossComponents comps;
    double objective_value = 0.0;
    {
      TapeScope scope(tape);
      std::vector<Tensor> preds, sems, specs;
      for (std::size_t i : batch) {
        SampleLoss s = sample_losses(data.train, i, train_targets);
        preds.push_back(s.pred);
        if (s.semantic.defined()) sems.push_back(s.semantic);
        if (s.spectral.defined()) specs.push_back(s.spectral);
      }
      Tensor objective = mean_of(preds);
      comps.pred = objective.scalar_value();
      Tensor distill_part;
      if (!sems.empty()) {
        distill_part = mean_of(sems);
        comps.semantic = distill_part.scalar_value();
      }
      if (!specs.empty()) {
        Tensor spec = mean_of(specs);
        comps.spectral = spec.scalar_value();
        distill_part = distill_part.defined() ? add(distill_part, scale(spec, dcfg.beta))
                                              : spec;
      }
      if (distill_part.defined())
        objective = add(objective, scale(distill_part, dcfg.lambda));
      objective_value = objective.scalar_value();
      tape.backward(objective);
    }
    comps.total = recompose(comps.pred, comps.semantic, comps.spectral, dcfg, distill_active);
    // Audit: the optimized tensor objective must match the logged component
    // decomposition up to arithmetic rounding in the training dtype.
    const double audit_tol = params[0].tensor.dtype() == Dtype::f32
                                 ? 1e-5 * (1.0 + std::fabs(comps.total))
                                 : 1e-9 * (1.0 + std::fabs(comps.total));
    if (std::fabs(objective_value - comps.total) > audit_tol)
      throw ContractError("loss decomposition audit failed: objective " +
                          std::to_string(objective_value) + " vs components " +
                          std::to_string(comps.total));
    fill_untouched_grads(params);
    adam.cfg.lr = lr;
    adam.step(params);
    zero_param_grads(params);
    return comps;
  };

  auto val_loss = [&]() {
    NoTapeScope guard;
    double pred = 0.0, sem = 0.0, spec = 0.0;
    for (std::size_t i = 0; i < data.val.size(); ++i) {
      SampleLoss s = sample_losses(data.val, i, val_targets);
      pred += s.pred.scalar_value();
      if (s.semantic.defined()) sem += s.semantic.scalar_value();
      if (s.spectral.defined()) spec += s.spectral.scalar_value();
    }
    const double n = data.val.size() ? static_cast<double>(data.val.size()) : 1.0;
    return recompose(pred / n, sem / n, spec / n, dcfg, distill_active);
  };

  auto gradient_isolation_check = [&]() {
    for (const auto& p : teacher_params)
      if (p.tensor.has_grad() || p.tensor.requires_grad())
        throw ContractError("gradient isolation violated: teacher parameter '" + p.name +
                            "' is attached to the student's gradient graph");
  };

  result.report =
      run_epochs(data.train.size(), tcfg, train_batch, val_loss, gradient_isolation_check);
  return result;
}

}  // namespace s2kd
