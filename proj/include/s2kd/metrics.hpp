#pragma once

#include <cstddef>
#include <string>

#include "s2kd/tensor.hpp"

// Evaluation metrics (plain numbers, not differentiable): mean squared error,
// mean absolute error, and windowed structural similarity.

namespace s2kd {

struct MetricsRow {
  std::string model_id;
  std::string mode;
  std::size_t param_count = 0;
  double mse = 0.0;
  double mae = 0.0;
  double ssim = 0.0;
};

// Both reduce over every element; DimensionError on shape mismatch.
double mse_value(const Tensor& pred, const Tensor& truth);
double mae_value(const Tensor& pred, const Tensor& truth);

// SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
// dynamic range 1.0, averaged over all fully-contained window positions.
// Frames smaller than the window fall back to one uniform global window.
// Rank-2 inputs are single frames; [T, H, W, C] inputs are scored per
// frame-channel slice and averaged. Result lies in [-1, 1].
double ssim_value(const Tensor& pred, const Tensor& truth);

}  // namespace s2kd
