#include "s2kd/experiment.hpp"

#include <cstdio>

namespace s2kd {

namespace {

std::size_t count_params(ParamList params) {
  std::size_t n = 0;
  for (const NamedParam& p : params) n += p.tensor.numel();
  return n;
}

template <typename Forward>
MetricsRow score_split(const Dataset& data, const std::string& split, Forward&& forward) {
  const DatasetSplit& sp = data.split(split);
  if (sp.size() == 0) throw InputError("split '" + split + "' is empty");
  NoTapeScope guard;
  MetricsRow row;
  for (std::size_t i = 0; i < sp.size(); ++i) {
    Tensor truth = data.target_frames(sp, i);
    Tensor pred = forward(data.input_frames(sp, i), i).astype(truth.dtype());
    row.mse += mse_value(pred, truth);
    row.mae += mae_value(pred, truth);
    row.ssim += ssim_value(pred, truth);
  }
  const double n = static_cast<double>(sp.size());
  row.mse /= n;
  row.mae /= n;
  row.ssim /= n;
  return row;
}

}  // namespace

MetricsRow evaluate_teacher(const Dataset& data, const TeacherModel& model,
                            const std::string& split) {
  MetricsRow row = score_split(data, split, [&](const Tensor& x, std::size_t i) {
    return teacher_forward(x, data.descriptor(data.split(split), i), model).prediction;
  });
  row.model_id = "teacher";
  row.mode = "teacher";
  row.param_count = count_params(const_cast<TeacherModel&>(model).params());
  return row;
}

MetricsRow evaluate_student(const Dataset& data, const StudentModel& model,
                            const std::string& mode_label, const std::string& split) {
  MetricsRow row = score_split(data, split, [&](const Tensor& x, std::size_t) {
    return student_forward(x, model).prediction;
  });
  row.model_id = "student";
  row.mode = mode_label;
  row.param_count = count_params(const_cast<StudentModel&>(model).params());
  return row;
}

std::string metrics_to_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "model,mode,params,mse,mae,ssim\n";
  char buf[256];
  for (const MetricsRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%zu,%.17g,%.17g,%.17g\n", r.model_id.c_str(),
                  r.mode.c_str(), r.param_count, r.mse, r.mae, r.ssim);
    out += buf;
  }
  return out;
}

AblationResult run_ablation(const Dataset& data, const TeacherModel& teacher,
                            const ModelConfig& mcfg, const TrainConfig& tcfg,
                            const std::function<void(const std::string&)>& on_mode) {
  static constexpr DistillMode kModes[] = {DistillMode::baseline, DistillMode::spectral,
                                           DistillMode::semantic, DistillMode::full};
  AblationResult result;
  for (DistillMode mode : kModes) {
    if (on_mode) on_mode(mode_name(mode));
    TrainConfig run_cfg = tcfg;
    run_cfg.distill.mode = mode;
    StudentTrainResult r = train_student(data, teacher, mcfg, run_cfg);
    result.rows.push_back(evaluate_student(data, r.model, mode_name(mode)));
    result.reports.push_back(std::move(r.report));
  }
  return result;
}

}  // namespace s2kd
