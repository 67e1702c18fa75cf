#include "s2kd/nn.hpp"

#include <cmath>

#include "s2kd/kernels/kernels.hpp"
#include "s2kd/rng.hpp"

namespace s2kd {

void freeze_params(ParamList& params) {
  for (auto& p : params) {
    p.tensor.set_requires_grad(false);
    p.tensor.zero_grad();
  }
}

void zero_param_grads(ParamList& params) {
  for (auto& p : params) p.tensor.zero_grad();
}

// --- LinearLayer -------------------------------------------------------------

LinearLayer LinearLayer::create(std::size_t in, std::size_t out, Rng& rng, Dtype dtype) {
  LinearLayer layer;
  layer.weight = Tensor::zeros({in, out}, dtype);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  fill_uniform(layer.weight, rng, -bound, bound);
  layer.weight.set_requires_grad(true);
  layer.bias = Tensor::zeros({out}, dtype);
  layer.bias.set_requires_grad(true);
  return layer;
}

Tensor LinearLayer::apply(const Tensor& x) const { return add_bias(matmul(x, weight), bias); }

void LinearLayer::append_params(ParamList& out, const std::string& prefix) {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

// --- Attention ---------------------------------------------------------------

AttentionBlockParams AttentionBlockParams::create(std::size_t d, std::size_t n_heads, Rng& rng,
                                                  Dtype dtype) {
  if (n_heads == 0 || d % n_heads != 0)
    throw ConfigError("attention: width " + std::to_string(d) + " not divisible by " +
                      std::to_string(n_heads) + " heads");
  AttentionBlockParams p;
  p.q_proj = LinearLayer::create(d, d, rng, dtype);
  p.k_proj = LinearLayer::create(d, d, rng, dtype);
  p.v_proj = LinearLayer::create(d, d, rng, dtype);
  p.out_proj = LinearLayer::create(d, d, rng, dtype);
  p.ln_gain = Tensor::full({d}, 1.0, dtype);
  p.ln_gain.set_requires_grad(true);
  p.ln_bias = Tensor::zeros({d}, dtype);
  p.ln_bias.set_requires_grad(true);
  p.n_heads = n_heads;
  p.d_k = d / n_heads;
  return p;
}

void AttentionBlockParams::append_params(ParamList& out, const std::string& prefix) {
  q_proj.append_params(out, prefix + ".q");
  k_proj.append_params(out, prefix + ".k");
  v_proj.append_params(out, prefix + ".v");
  out_proj.append_params(out, prefix + ".out");
  out.push_back({prefix + ".ln_gain", ln_gain});
  out.push_back({prefix + ".ln_bias", ln_bias});
}

Tensor attention_block(const Tensor& x_query, const Tensor& x_context,
                       const AttentionBlockParams& p, AttentionTrace* trace) {
  const std::size_t d = p.width();
  if (x_query.rank() != 2 || x_query.shape()[1] != d)
    throw DimensionError("attention: query shape " + shape_str(x_query.shape()) +
                         " does not match block width " + std::to_string(d));
  if (x_context.rank() != 2 || x_context.shape()[1] != d)
    throw DimensionError("attention: context shape " + shape_str(x_context.shape()) +
                         " does not match block width " + std::to_string(d));

  const Tensor q = p.q_proj.apply(x_query);
  const Tensor k = p.k_proj.apply(x_context);
  const Tensor v = p.v_proj.apply(x_context);

  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(p.d_k));
  std::vector<Tensor> heads;
  heads.reserve(p.n_heads);
  for (std::size_t h = 0; h < p.n_heads; ++h) {
    const std::size_t c0 = h * p.d_k, c1 = (h + 1) * p.d_k;
    const Tensor qh = slice_cols(q, c0, c1);
    const Tensor kh = slice_cols(k, c0, c1);
    const Tensor vh = slice_cols(v, c0, c1);
    const Tensor logits = scale(matmul(qh, transpose(kh)), inv_sqrt_dk);
    const Tensor weights = softmax(logits, 1);
    if (trace != nullptr) {
      trace->logits.push_back(logits);
      trace->weights.push_back(weights);
    }
    heads.push_back(matmul(weights, vh));
  }
  const Tensor attended = p.out_proj.apply(concat_cols(heads));
  return layer_norm(add(x_query, attended), p.ln_gain, p.ln_bias);
}

// --- Patch embedding -----------------------------------------------------------

std::vector<std::size_t> patch_gather_indices(std::size_t t, std::size_t h, std::size_t w,
                                              std::size_t c, std::size_t patch) {
  const std::size_t ph = h / patch, pw = w / patch;
  std::vector<std::size_t> map;
  map.reserve(t * h * w * c);
  for (std::size_t ft = 0; ft < t; ++ft)
    for (std::size_t pr = 0; pr < ph; ++pr)
      for (std::size_t pc = 0; pc < pw; ++pc)
        for (std::size_t dy = 0; dy < patch; ++dy)
          for (std::size_t dx = 0; dx < patch; ++dx)
            for (std::size_t ch = 0; ch < c; ++ch)
              map.push_back(((ft * h + pr * patch + dy) * w + pc * patch + dx) * c + ch);
  return map;
}

std::vector<std::size_t> patch_scatter_indices(std::size_t t, std::size_t h, std::size_t w,
                                               std::size_t c, std::size_t patch) {
  const std::vector<std::size_t> gather = patch_gather_indices(t, h, w, c, patch);
  std::vector<std::size_t> inverse(gather.size());
  for (std::size_t i = 0; i < gather.size(); ++i) inverse[gather[i]] = i;
  return inverse;
}

PatchEmbed PatchEmbed::create(std::size_t t, std::size_t h, std::size_t w, std::size_t c,
                              std::size_t patch, std::size_t d, Rng& rng, Dtype dtype) {
  if (patch == 0 || h % patch != 0 || w % patch != 0)
    throw ConfigError("patch_embed: frame " + std::to_string(h) + "x" + std::to_string(w) +
                      " not divisible into " + std::to_string(patch) + "x" +
                      std::to_string(patch) + " patches");
  PatchEmbed pe;
  pe.t = t;
  pe.h = h;
  pe.w = w;
  pe.c = c;
  pe.patch = patch;
  pe.embed = LinearLayer::create(patch * patch * c, d, rng, dtype);
  const std::size_t l_v = t * (h / patch) * (w / patch);
  pe.pos_table = Tensor::zeros({l_v, d}, dtype);
  pe.pos_table.set_requires_grad(true);
  pe.gather_ = patch_gather_indices(t, h, w, c, patch);
  return pe;
}

Tensor PatchEmbed::apply(const Tensor& frames) const {
  const Shape expect{t, h, w, c};
  if (frames.shape() != expect)
    throw DimensionError("patch_embed: frames " + shape_str(frames.shape()) +
                         ", expected " + shape_str(expect));
  const std::size_t l_v = token_count();
  const Tensor tokens = permute_elements(frames, gather_, {l_v, patch * patch * c});
  return add(embed.apply(tokens), pos_table);
}

void PatchEmbed::append_params(ParamList& out, const std::string& prefix) {
  embed.append_params(out, prefix + ".embed");
  out.push_back({prefix + ".pos_table", pos_table});
}

// --- Adam ----------------------------------------------------------------------

AdamState::AdamState(const ParamList& params, AdamConfig config) : cfg(config) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& p : params) {
    m_.push_back(Tensor::zeros(p.tensor.shape(), p.tensor.dtype()));
    v_.push_back(Tensor::zeros(p.tensor.shape(), p.tensor.dtype()));
  }
}

void AdamState::step(ParamList& params) {
  if (params.size() != m_.size())
    throw ContractError("adam_step: parameter list changed size since construction");
  ++step_count;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_count));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& t = params[i].tensor;
    if (!t.requires_grad()) continue;  // frozen parameters stay untouched
    if (!t.has_grad())
      throw ContractError("adam_step: missing gradient for trainable parameter '" +
                          params[i].name + "'");
    if (t.shape() != m_[i].shape())
      throw ContractError("adam_step: parameter '" + params[i].name +
                          "' changed shape since construction");
    detail::dispatch(t.dtype(), [&](auto tag) {
      using T = decltype(tag);
      kernels::adam_update(t.impl()->data_as<T>(), m_[i].impl()->data_as<T>(),
                           v_[i].impl()->data_as<T>(), t.impl()->grad_as<T>(), t.numel(),
                           static_cast<T>(cfg.lr), static_cast<T>(cfg.beta1),
                           static_cast<T>(cfg.beta2), static_cast<T>(cfg.eps),
                           static_cast<T>(bc1), static_cast<T>(bc2));
    });
  }
}

// --- Plateau schedule -------------------------------------------------------------

double PlateauSchedule::update(double val_loss, double current_lr) {
  if (!seen_any || val_loss < best) {
    best = val_loss;
    seen_any = true;
    epochs_since_improvement = 0;
    return current_lr;
  }
  ++epochs_since_improvement;
  if (epochs_since_improvement >= patience) {
    epochs_since_improvement = 0;
    return current_lr * factor;
  }
  return current_lr;
}

}  // namespace s2kd
