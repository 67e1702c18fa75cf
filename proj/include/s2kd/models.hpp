#pragma once

#include <string>
#include <vector>

#include "s2kd/data.hpp"
#include "s2kd/nn.hpp"
#include "s2kd/tensor.hpp"

// The two forecasting models. The teacher fuses visual tokens with the
// privileged descriptor through a stack of cross-attention blocks and is
// trained first; the student sees frames only, runs at a smaller width, and
// is distilled against the teacher's fused latent through a projection layer.

namespace s2kd {

struct ModelConfig {
  std::size_t t_in = 5, t_out = 5;
  std::size_t height = 16, width = 16, channels = 1;
  std::size_t patch = 4;
  std::size_t d = 64;        // teacher latent width
  std::size_t d_g = 32;      // student latent width, <= d
  std::size_t n_align = 2;   // cross-modal alignment depth
  std::size_t n_enc = 2;     // visual encoder depth (teacher)
  std::size_t heads = 4;
  std::size_t e_max = 2;
  std::string student_variant = "attention";  // "attention" | "mixer"

  std::size_t visual_tokens() const {
    return t_in * (height / patch) * (width / patch);
  }
  std::size_t semantic_tokens() const { return 1 + e_max; }
  void validate() const;  // ConfigError on divisibility/width violations
};

// Maps [L x D] latents back to frames: a per-token linear producing each
// token's p*p*C patch, token-to-frame scatter, then a learned linear mixing
// of the time axis from t_in rows to t_out rows (identity-initialized when
// t_in == t_out, so the decoder starts as pure unpatching).
struct Decoder {
  LinearLayer unpatch;  // [D x p*p*C]
  Tensor time_mix;      // [t_out x t_in]
  std::size_t t_in = 0, t_out = 0, height = 0, width = 0, channels = 0, patch = 0;

  static Decoder create(std::size_t d, const ModelConfig& cfg, Rng& rng,
                        Dtype dtype = default_dtype());
  void append_params(ParamList& out, const std::string& prefix);
};

// DimensionError if z is not [t_in * n_patches x D].
Tensor decode(const Tensor& z, const Decoder& dec);

struct TeacherModel {
  ModelConfig cfg;
  PatchEmbed patch_embed;
  std::vector<AttentionBlockParams> encoder;  // self-attention over visual tokens
  DescriptorEncoder priv_encoder;
  std::vector<AttentionBlockParams> align;    // query = visual, key/value = semantic
  Decoder decoder;
  bool frozen = false;

  static TeacherModel create(const ModelConfig& cfg, Rng& rng,
                             Dtype dtype = default_dtype());
  ParamList params();  // stable names, used for optimizer and checkpoints
  // Clears requires_grad and any held gradients on every parameter; forward
  // passes can no longer attach the teacher to a tape.
  void freeze();
};

// Pins every alignment block's value projection at zero and freezes those
// weights, permanently severing the semantic channel: the resulting model is
// the same-capacity vision-only control.
void disable_semantic_channel(TeacherModel& t);

struct LatentBundle {
  Tensor z_v;      // visual tokens after the encoder, [L_v x D]
  Tensor z_s;      // semantic tokens, [L_s x D]
  Tensor z_fused;  // alignment output, == layers.back()
  std::vector<Tensor> layers;  // alignment intermediates, layers[0] == z_v
};

struct TeacherOutput {
  Tensor prediction;  // [t_out, H, W, C]
  LatentBundle latents;
};

// InputError on frame-shape or descriptor-schema mismatch. Frames are
// converted to the model's dtype if they differ.
TeacherOutput teacher_forward(const Tensor& x, const PrivilegedDescriptor& s,
                              const TeacherModel& t);

struct StudentModel {
  ModelConfig cfg;
  PatchEmbed patch_embed;                  // width d_g
  AttentionBlockParams enc_attn;           // "attention" variant body
  LinearLayer token_mix, channel_mix;      // "mixer" variant body
  Decoder decoder;
  LinearLayer projection;                  // [d_g x d], distillation-only

  static StudentModel create(const ModelConfig& cfg, Rng& rng,
                             Dtype dtype = default_dtype());
  ParamList params();
};

struct StudentOutput {
  Tensor prediction;  // [t_out, H, W, C]
  Tensor z_proj;      // [L_v x d], projected latent for distillation
};

// InputError on frame-shape mismatch; the student never reads descriptors.
StudentOutput student_forward(const Tensor& x, const StudentModel& g);

}  // namespace s2kd
