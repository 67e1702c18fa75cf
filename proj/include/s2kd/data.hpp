#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "s2kd/kvfile.hpp"
#include "s2kd/nn.hpp"
#include "s2kd/tensor.hpp"

// Synthetic spatiotemporal benchmark: 2-D advection-diffusion sequences with
// timed Gaussian-bump disturbances, plus a structured descriptor of the
// governing physics per sequence. Disturbances whose onset falls inside the
// prediction horizon are invisible in the input frames, which is what makes
// the descriptor privileged information.

namespace s2kd {

// One injected disturbance: a Gaussian bump added to the field at its onset
// step. Unused slots are padded (flag set, numeric fields zero).
struct EventSpec {
  double onset = 0.0;      // step index in [0, t_in + t_out)
  double center_x = 0.0;   // cell coordinates
  double center_y = 0.0;
  double amplitude = 0.0;  // >= 0
  double radius = 0.0;     // > 0 for active events
  bool padded = true;
};

// Structured stand-in for a narrative account of the sequence: the governing
// transport parameters plus every timed disturbance with its cause, place,
// magnitude and timing.
struct PrivilegedDescriptor {
  double v_x = 0.0;   // cells/step
  double v_y = 0.0;   // cells/step
  double kappa = 0.0; // cells^2/step, >= 0
  std::vector<EventSpec> events;  // exactly e_max slots
};

// Flattened row layout: v_x, v_y, kappa, then per slot (onset, center_x,
// center_y, amplitude, radius, pad flag).
std::size_t descriptor_width(std::size_t e_max);
// Padded slots are written as zeros with the flag set, whatever the struct
// holds, so equal active content flattens identically.
std::vector<double> flatten_descriptor(const PrivilegedDescriptor& s);
PrivilegedDescriptor unflatten_descriptor(const std::vector<double>& row, std::size_t e_max);

struct GeneratorConfig {
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t channels = 1;
  std::size_t t_in = 5;
  std::size_t t_out = 5;
  std::size_t train_count = 2000;
  std::size_t val_count = 200;
  std::size_t test_count = 200;
  std::size_t e_max = 2;
  std::uint64_t seed = 42;

  double dt = 1.0;
  double v_max = 0.3;       // |v_x|, |v_y| drawn from [-v_max, v_max]
  double kappa_max = 0.1;   // kappa drawn from [0, kappa_max]
  double event_prob = 0.7;  // probability each slot holds an event
  double amp_min = 0.5, amp_max = 1.5;
  double radius_min = 1.5, radius_max = 3.0;

  std::size_t t_total() const { return t_in + t_out; }
  std::size_t sample_count() const { return train_count + val_count + test_count; }
  // ConfigError on CFL-violating ranges (|v| dt <= 1 cell, kappa dt <= 0.25,
  // and the combined monotone bound (2 v_max + 4 kappa_max) dt <= 1) or on
  // unsupported shapes.
  void validate() const;
};

// Explicit finite differences: upwind advection, 5-point Laplacian diffusion,
// reflective (zero-flux) boundary. Frame 0 is the initial field plus onset-0
// bumps; frame t follows one physics step plus onset-t bumps. Returns
// [t_total, H, W, 1] in 64-bit values.
Tensor simulate_sequence(const GeneratorConfig& cfg, const PrivilegedDescriptor& s,
                         const std::vector<double>& initial_field);

// Draws the descriptor and initial field from the sequence's own stream
// (kStreamData + index, indices global across splits) and simulates. Parallel
// and serial generation therefore agree byte for byte.
struct GeneratedSample {
  Tensor frames;  // [t_total, H, W, 1] f64
  PrivilegedDescriptor descriptor;
};
GeneratedSample generate_sample(const GeneratorConfig& cfg, std::size_t sequence_index);

// Writes frames_<split>.s2kd ([S, t_total, H, W, C], f32),
// descriptors_<split>.s2kd ([S, K], f64) and the manifest into `dir`.
void generate_dataset(const GeneratorConfig& cfg, const std::string& dir);

struct DatasetManifest {
  int format_version = 1;
  GeneratorConfig cfg;

  static DatasetManifest from_kv(const KvFile& kv);  // ConfigError on unknown keys
  KvFile to_kv() const;
};

struct DatasetSplit {
  Tensor frames;       // [S, t_total, H, W, C] f32
  Tensor descriptors;  // [S, K] f64
  std::size_t size() const { return frames.defined() ? frames.shape()[0] : 0; }
};

struct Dataset {
  DatasetManifest manifest;
  DatasetSplit train, val, test;

  const DatasetSplit& split(const std::string& name) const;  // InputError

  // Per-sample copies handed to the models.
  Tensor input_frames(const DatasetSplit& sp, std::size_t i) const;   // [t_in, H, W, C]
  Tensor target_frames(const DatasetSplit& sp, std::size_t i) const;  // [t_out, H, W, C]
  PrivilegedDescriptor descriptor(const DatasetSplit& sp, std::size_t i) const;
};

// InputError on missing files or count/shape disagreement with the manifest;
// FormatError from the tensor containers.
Dataset load_dataset(const std::string& dir);

// Privileged-channel encoder: one global token embedded from (v_x, v_y,
// kappa), one token per event slot (linear embedding of the normalized event
// fields, or a learned pad embedding for padded slots), then one
// self-attention block over the 1 + e_max tokens.
struct DescriptorEncoder {
  LinearLayer global_embed;  // [3 x D]
  LinearLayer event_embed;   // [5 x D]
  Tensor pad_embed;          // [1 x D], trainable
  AttentionBlockParams mixer;
  std::size_t e_max = 0;
  double norm_t = 1.0;  // onset scale (t_total)
  double norm_x = 1.0;  // center_x scale (grid width)
  double norm_y = 1.0;  // center_y scale (grid height)

  static DescriptorEncoder create(std::size_t e_max, std::size_t d, std::size_t n_heads,
                                  double t_total, double grid_w, double grid_h, Rng& rng,
                                  Dtype dtype = default_dtype());
  std::size_t token_count() const { return 1 + e_max; }
  std::size_t width() const { return global_embed.out_features(); }
  Tensor apply(const PrivilegedDescriptor& s) const;  // [1 + e_max x D]
  void append_params(ParamList& out, const std::string& prefix);
};

}  // namespace s2kd
