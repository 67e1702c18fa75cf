#include "s2kd/models.hpp"

#include <cmath>

#include "s2kd/rng.hpp"

namespace s2kd {

void ModelConfig::validate() const {
  if (t_in < 1 || t_out < 1)
    throw ConfigError("model: t_in and t_out must be at least 1");
  if (patch < 1) throw ConfigError("model: patch size must be at least 1");
  if (height % patch != 0 || width % patch != 0)
    throw ConfigError("model: grid " + std::to_string(height) + "x" + std::to_string(width) +
                      " is not divisible by patch size " + std::to_string(patch));
  if (channels < 1) throw ConfigError("model: channels must be at least 1");
  if (d < 2 || d_g < 2)
    throw ConfigError("model: latent widths must be at least 2");
  if (d_g > d)
    throw ConfigError("model: student width d_g must not exceed teacher width d");
  if (heads < 1 || d % heads != 0 || d_g % heads != 0)
    throw ConfigError("model: head count must divide both latent widths");
  if (student_variant != "attention" && student_variant != "mixer")
    throw ConfigError("model: unknown student variant '" + student_variant +
                      "' (expected 'attention' or 'mixer')");
}

// --- Decoder -------------------------------------------------------------------

Decoder Decoder::create(std::size_t d, const ModelConfig& cfg, Rng& rng, Dtype dtype) {
  Decoder dec;
  dec.unpatch = LinearLayer::create(d, cfg.patch * cfg.patch * cfg.channels, rng, dtype);
  dec.time_mix = Tensor::zeros({cfg.t_out, cfg.t_in}, dtype);
  if (cfg.t_in == cfg.t_out) {
    for (std::size_t i = 0; i < cfg.t_in; ++i)
      dec.time_mix.set_value_at(i * cfg.t_in + i, 1.0);
  } else {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.t_in));
    fill_uniform(dec.time_mix, rng, -bound, bound);
  }
  dec.time_mix.set_requires_grad(true);
  dec.t_in = cfg.t_in;
  dec.t_out = cfg.t_out;
  dec.height = cfg.height;
  dec.width = cfg.width;
  dec.channels = cfg.channels;
  dec.patch = cfg.patch;
  return dec;
}

void Decoder::append_params(ParamList& out, const std::string& prefix) {
  unpatch.append_params(out, prefix + ".unpatch");
  out.push_back({prefix + ".time_mix", time_mix});
}

Tensor decode(const Tensor& z, const Decoder& dec) {
  const std::size_t tokens =
      dec.t_in * (dec.height / dec.patch) * (dec.width / dec.patch);
  if (z.rank() != 2 || z.shape()[0] != tokens || z.shape()[1] != dec.unpatch.in_features())
    throw DimensionError("decode: latent is " + shape_str(z.shape()) + ", expected [" +
                         std::to_string(tokens) + " x " +
                         std::to_string(dec.unpatch.in_features()) + "]");
  Tensor patches = dec.unpatch.apply(z);  // [L x p*p*C]
  const auto scatter =
      patch_scatter_indices(dec.t_in, dec.height, dec.width, dec.channels, dec.patch);
  Tensor frames = permute_elements(patches, scatter,
                                   {dec.t_in, dec.height, dec.width, dec.channels});
  const std::size_t cells = dec.height * dec.width * dec.channels;
  Tensor mixed = matmul(dec.time_mix, reshape(frames, {dec.t_in, cells}));
  return reshape(mixed, {dec.t_out, dec.height, dec.width, dec.channels});
}

// --- Teacher -------------------------------------------------------------------

TeacherModel TeacherModel::create(const ModelConfig& cfg, Rng& rng, Dtype dtype) {
  cfg.validate();
  TeacherModel t;
  t.cfg = cfg;
  t.patch_embed = PatchEmbed::create(cfg.t_in, cfg.height, cfg.width, cfg.channels, cfg.patch,
                                     cfg.d, rng, dtype);
  t.encoder.reserve(cfg.n_enc);
  for (std::size_t i = 0; i < cfg.n_enc; ++i)
    t.encoder.push_back(AttentionBlockParams::create(cfg.d, cfg.heads, rng, dtype));
  t.priv_encoder = DescriptorEncoder::create(
      cfg.e_max, cfg.d, cfg.heads, static_cast<double>(cfg.t_in + cfg.t_out),
      static_cast<double>(cfg.width), static_cast<double>(cfg.height), rng, dtype);
  t.align.reserve(cfg.n_align);
  for (std::size_t i = 0; i < cfg.n_align; ++i)
    t.align.push_back(AttentionBlockParams::create(cfg.d, cfg.heads, rng, dtype));
  t.decoder = Decoder::create(cfg.d, cfg, rng, dtype);
  return t;
}

ParamList TeacherModel::params() {
  ParamList out;
  patch_embed.append_params(out, "patch");
  for (std::size_t i = 0; i < encoder.size(); ++i)
    encoder[i].append_params(out, "enc" + std::to_string(i));
  priv_encoder.append_params(out, "priv");
  for (std::size_t i = 0; i < align.size(); ++i)
    align[i].append_params(out, "align" + std::to_string(i));
  decoder.append_params(out, "decoder");
  return out;
}

void TeacherModel::freeze() {
  ParamList all = params();
  freeze_params(all);
  frozen = true;
}

void disable_semantic_channel(TeacherModel& t) {
  for (AttentionBlockParams& block : t.align) {
    for (Tensor* w : {&block.v_proj.weight, &block.v_proj.bias}) {
      for (std::size_t i = 0; i < w->numel(); ++i) w->set_value_at(i, 0.0);
      w->set_requires_grad(false);
      w->zero_grad();
    }
  }
}

TeacherOutput teacher_forward(const Tensor& x, const PrivilegedDescriptor& s,
                              const TeacherModel& t) {
  const Shape want = {t.cfg.t_in, t.cfg.height, t.cfg.width, t.cfg.channels};
  if (x.shape() != want)
    throw InputError("teacher input is " + shape_str(x.shape()) + ", expected " +
                     shape_str(want));
  const Dtype dtype = t.patch_embed.embed.weight.dtype();
  const Tensor frames = x.dtype() == dtype ? x : x.astype(dtype);

  Tensor z = t.patch_embed.apply(frames);
  for (const auto& block : t.encoder) z = attention_block(z, z, block);

  TeacherOutput out;
  out.latents.z_v = z;
  out.latents.z_s = t.priv_encoder.apply(s);
  out.latents.layers.push_back(z);
  for (const auto& block : t.align) {
    z = attention_block(z, out.latents.z_s, block);
    out.latents.layers.push_back(z);
  }
  out.latents.z_fused = z;
  out.prediction = decode(z, t.decoder);
  return out;
}

// --- Student -------------------------------------------------------------------

StudentModel StudentModel::create(const ModelConfig& cfg, Rng& rng, Dtype dtype) {
  cfg.validate();
  StudentModel g;
  g.cfg = cfg;
  g.patch_embed = PatchEmbed::create(cfg.t_in, cfg.height, cfg.width, cfg.channels, cfg.patch,
                                     cfg.d_g, rng, dtype);
  if (cfg.student_variant == "attention") {
    g.enc_attn = AttentionBlockParams::create(cfg.d_g, cfg.heads, rng, dtype);
  } else {
    const std::size_t tokens = cfg.visual_tokens();
    g.token_mix = LinearLayer::create(tokens, tokens, rng, dtype);
    g.channel_mix = LinearLayer::create(cfg.d_g, cfg.d_g, rng, dtype);
  }
  g.decoder = Decoder::create(cfg.d_g, cfg, rng, dtype);
  g.projection = LinearLayer::create(cfg.d_g, cfg.d, rng, dtype);
  return g;
}

ParamList StudentModel::params() {
  ParamList out;
  patch_embed.append_params(out, "patch");
  if (cfg.student_variant == "attention") {
    enc_attn.append_params(out, "enc0");
  } else {
    token_mix.append_params(out, "token_mix");
    channel_mix.append_params(out, "channel_mix");
  }
  decoder.append_params(out, "decoder");
  projection.append_params(out, "proj");
  return out;
}

StudentOutput student_forward(const Tensor& x, const StudentModel& g) {
  const Shape want = {g.cfg.t_in, g.cfg.height, g.cfg.width, g.cfg.channels};
  if (x.shape() != want)
    throw InputError("student input is " + shape_str(x.shape()) + ", expected " +
                     shape_str(want));
  const Dtype dtype = g.patch_embed.embed.weight.dtype();
  const Tensor frames = x.dtype() == dtype ? x : x.astype(dtype);

  Tensor z = g.patch_embed.apply(frames);
  if (g.cfg.student_variant == "attention") {
    z = attention_block(z, z, g.enc_attn);
  } else {
    z = add(z, transpose(g.token_mix.apply(transpose(z))));
    z = add(z, g.channel_mix.apply(z));
  }

  StudentOutput out;
  out.z_proj = g.projection.apply(z);
  out.prediction = decode(z, g.decoder);
  return out;
}

}  // namespace s2kd
