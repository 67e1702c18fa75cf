#pragma once

#include <string>
#include <vector>

#include "s2kd/tensor.hpp"

// Neural building blocks: linear layers, multi-head attention blocks, patch
// embedding, the Adam optimizer and the plateau learning-rate schedule.
// Everything is a plain parameter container plus pure functions over tensors.

namespace s2kd {

class Rng;

// A trainable tensor with the stable name used by checkpoints and optimizer
// diagnostics.
struct NamedParam {
  std::string name;
  Tensor tensor;
};
using ParamList = std::vector<NamedParam>;

void freeze_params(ParamList& params);
void zero_param_grads(ParamList& params);

struct LinearLayer {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]

  // Fan-in uniform init for the weight, zero bias, both trainable.
  static LinearLayer create(std::size_t in, std::size_t out, Rng& rng,
                            Dtype dtype = default_dtype());

  Tensor apply(const Tensor& x) const;  // [L x in] -> [L x out]
  std::size_t in_features() const { return weight.shape()[0]; }
  std::size_t out_features() const { return weight.shape()[1]; }
  void append_params(ParamList& out, const std::string& prefix);
};

struct AttentionBlockParams {
  LinearLayer q_proj, k_proj, v_proj, out_proj;  // all [D x D]
  Tensor ln_gain, ln_bias;                       // [D], init 1 / 0
  std::size_t n_heads = 1;
  std::size_t d_k = 0;  // D / n_heads

  static AttentionBlockParams create(std::size_t d, std::size_t n_heads, Rng& rng,
                                     Dtype dtype = default_dtype());
  std::size_t width() const { return q_proj.in_features(); }
  void append_params(ParamList& out, const std::string& prefix);
};

// Optional introspection filled by attention_block for tests: per-head scaled
// logits and softmax weights, in head order.
struct AttentionTrace {
  std::vector<Tensor> logits;
  std::vector<Tensor> weights;
};

// Q from x_query, K/V from x_context, per-head scaled dot-product attention,
// head concat, output projection, then LayerNorm(x_query + attended).
// Self-attention is attention_block(x, x, p).
Tensor attention_block(const Tensor& x_query, const Tensor& x_context,
                       const AttentionBlockParams& p, AttentionTrace* trace = nullptr);

// Splits [T x H x W x C] frames into p x p patches in (t, patch-row,
// patch-col) raster order, embeds each flattened patch linearly and adds a
// learned positional table. Bound to one frame geometry at creation.
struct PatchEmbed {
  LinearLayer embed;  // [p*p*C x D]
  Tensor pos_table;   // [L_v x D], zero-init
  std::size_t t = 0, h = 0, w = 0, c = 0, patch = 0;

  static PatchEmbed create(std::size_t t, std::size_t h, std::size_t w, std::size_t c,
                           std::size_t patch, std::size_t d, Rng& rng,
                           Dtype dtype = default_dtype());
  std::size_t token_count() const { return pos_table.shape()[0]; }
  Tensor apply(const Tensor& frames) const;  // -> [L_v x D]
  void append_params(ParamList& out, const std::string& prefix);

 private:
  std::vector<std::size_t> gather_;  // frame element index per token element
};

// Element index maps between [T x H x W x C] frames and [L x p*p*C] patch
// tokens; decode uses the inverse direction.
std::vector<std::size_t> patch_gather_indices(std::size_t t, std::size_t h, std::size_t w,
                                              std::size_t c, std::size_t patch);
std::vector<std::size_t> patch_scatter_indices(std::size_t t, std::size_t h, std::size_t w,
                                               std::size_t c, std::size_t patch);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard Adam with bias correction. Bound to one parameter list; moment
// buffers match each parameter's shape and width. Frozen parameters are
// skipped; a trainable parameter with no gradient is a contract violation.
struct AdamState {
  AdamConfig cfg;
  std::size_t step_count = 0;

  AdamState(const ParamList& params, AdamConfig cfg);
  void step(ParamList& params);

 private:
  std::vector<Tensor> m_, v_;
};

// Divides the learning rate by 10 after `patience` consecutive epochs without
// validation improvement; the counter resets on both improvement and
// reduction, so at most one cut per patience window.
struct PlateauSchedule {
  double factor = 0.1;
  int patience = 5;
  double best = 0.0;
  int epochs_since_improvement = 0;
  bool seen_any = false;

  // Feeds one epoch's validation loss; returns the (possibly reduced) rate.
  double update(double val_loss, double current_lr);
};

}  // namespace s2kd
