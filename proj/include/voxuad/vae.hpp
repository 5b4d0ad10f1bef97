#pragma once

/**
 * @file vae.hpp
 * @brief Dimension-generic variational autoencoder. One parametric
 *        encoder-decoder instantiates as 2D (64x64 slices) or 3D (64^3
 *        volumes); only the dimensionality of the convolutions changes.
 *
 * Encoder: per stage a kernel-5 stride-2 convolution (extent halves, starting
 * 64 -> 32) followed by ELU, then two dense heads produce the latent mean and
 * log-variance. Decoder: dense layer back to the bottleneck grid, mirrored
 * transposed convolutions, logistic sigmoid on the final output so
 * reconstructions stay in [0, 1].
 *
 * The class is templated on the scalar type: float for training and
 * inference, double for finite-difference gradient verification.
 */

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "voxuad/nn/conv.hpp"
#include "voxuad/rng.hpp"

namespace voxuad {

struct ModelConfig {
  int dims = 3;
  int input_extent = 64;
  /// 0 selects the dimensionality default: 128 for 2D, 512 for 3D.
  int latent = 0;
  std::vector<int> stage_channels = {32, 64, 128, 256};
  double kl_weight = 1.0;
  uint64_t seed = 0;

  int resolved_latent() const { return latent > 0 ? latent : (dims == 2 ? 128 : 512); }
  int stages() const { return (int)stage_channels.size(); }
  /// Spatial extent of the bottleneck grid.
  int bottleneck_extent() const { return input_extent >> stages(); }
  size_t input_size() const {
    size_t n = size_t(input_extent) * input_extent;
    return dims == 3 ? n * input_extent : n;
  }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

template <typename T>
struct Latent {
  std::vector<T> mean;
  std::vector<T> log_variance;
};

using LatentDistribution = Latent<float>;

template <typename T>
struct Recon {
  std::vector<T> output;  // x_hat, same layout/size as the input
  Latent<T> latent;
  std::vector<T> sampled_z;
};

using Reconstruction = Recon<float>;

struct LossTerms {
  double total = 0.0;
  double recon = 0.0;  // mean voxel L1
  double kl = 0.0;     // diagonal-Gaussian KL, summed over latent dims
};

/// The log-variance head is squashed to (-kLogVarBound, kLogVarBound) with a
/// smooth tanh so exp(log_var) can never overflow during training.
inline constexpr double kLogVarBound = 14.0;

template <typename T>
class Vae {
 public:
  explicit Vae(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  size_t param_count() const { return params_.size(); }
  std::vector<T>& parameters() { return params_; }
  const std::vector<T>& parameters() const { return params_; }

  /// Scratch buffers for one forward/backward pass; reusable across samples.
  struct Workspace {
    std::vector<std::vector<T>> enc_act;  // [0] = input copy, then per stage
    std::vector<T> mean, log_var, z;
    std::vector<std::vector<T>> dec_act;  // [0] = dense+ELU, then per stage
    std::vector<T> col;                   // im2col scratch
    // gradient-side buffers
    std::vector<std::vector<T>> d_enc, d_dec;
    std::vector<T> d_mean, d_log_var, d_z, d_flat;
  };
  Workspace make_workspace() const;

  Latent<T> encode(std::span<const T> x) const;
  std::vector<T> decode(std::span<const T> z) const;

  /// z = mean + exp(0.5 log_var) * eps with eps ~ N(0, I). In evaluation
  /// mode (rng == nullptr) z = mean.
  static std::vector<T> reparameterize(const Latent<T>& d, RngStream* rng);

  Recon<T> forward(std::span<const T> x, RngStream* rng) const;

  /// recon = mean voxel L1, kl summed over latent dims; total adds them with
  /// the configured KL weight.
  LossTerms loss(std::span<const T> target, const Recon<T>& r) const;

  /// Forward pass on `input`, L1 loss against `target`, backpropagation into
  /// `grad` (accumulated, scaled by `scale`). `eps` supplies the
  /// reparameterization noise (empty means evaluation mode, z = mean).
  LossTerms forward_backward(std::span<const T> input, std::span<const T> target,
                             std::span<const T> eps, std::vector<T>& grad, Workspace& ws) const;
  LossTerms forward_backward_scaled(std::span<const T> input, std::span<const T> target,
                                    std::span<const T> eps, std::vector<T>& grad, Workspace& ws,
                                    double scale) const;

  /// Evaluation-mode reconstruction (z = mean), reusing a workspace.
  void reconstruct(std::span<const T> x, std::vector<T>& out, Workspace& ws) const;

  // parameter segment layout, used by checkpoints and the optimizer
  struct Segment {
    std::string name;
    size_t offset, size;
  };
  const std::vector<Segment>& segments() const { return segments_; }

 private:
  void build_layout();
  void forward_internal(std::span<const T> x, std::span<const T> eps, bool sample,
                        Workspace& ws) const;

  ModelConfig cfg_;
  std::vector<nn::ConvGeom> enc_;  // encoder stage geometries
  std::vector<nn::ConvGeom> dec_;  // decoder stage geometries (conv view, big->small)
  size_t flat_size_ = 0;
  std::vector<T> params_;
  std::vector<Segment> segments_;
  // offsets into params_ for each layer, resolved once at construction
  std::vector<size_t> enc_w_, enc_b_, dec_w_, dec_b_;
  size_t mean_w_ = 0, mean_b_ = 0, logvar_w_ = 0, logvar_b_ = 0, decfc_w_ = 0, decfc_b_ = 0;
};

extern template class Vae<float>;
extern template class Vae<double>;

// --- checkpoints -------------------------------------------------------------

struct CheckpointInfo {
  ModelConfig config;
  int epoch = 0;
  int best_epoch = 0;
  double best_val_recon = 0.0;
  std::string extra;  // free-form JSON string with run metadata
};

/// Writes a versioned checkpoint: JSON header (config + training state),
/// float32 parameters, and a trailing FNV-1a content digest. Atomic
/// (write-temp then rename).
void save_checkpoint(const std::filesystem::path& path, const Vae<float>& model,
                     const CheckpointInfo& info);

struct LoadedCheckpoint {
  CheckpointInfo info;
  std::vector<float> params;
};

/// Verifies the digest and version before returning.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Convenience: rebuild the model a checkpoint describes.
Vae<float> model_from_checkpoint(const LoadedCheckpoint& ck);

}  // namespace voxuad
