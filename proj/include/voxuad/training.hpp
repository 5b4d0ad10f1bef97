#pragma once

/**
 * @file training.hpp
 * @brief Training loop on healthy subjects: dataset splitting, per-epoch
 *        batching with input-only erasing, Adam optimization, and epoch
 *        selection on unerased validation reconstruction.
 */

#include <functional>
#include <limits>
#include <vector>

#include "voxuad/erasing.hpp"
#include "voxuad/vae.hpp"
#include "voxuad/volume.hpp"

namespace voxuad {

struct TrainConfig {
  int batch_size = 32;
  double learning_rate = 0.001;
  int max_epochs = 500;
  /// Stop after this many epochs without validation improvement.
  int early_stop_patience = 50;
  ErasingSpec erasing;
  double data_fraction = 1.0;
  uint64_t seed = 0;
  // first/second moment coefficients at the optimizer's conventional defaults
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double total = 0.0;
  double recon = 0.0;
  double kl = 0.0;
  double val_recon = 0.0;
  double wall_seconds = 0.0;
};

struct TrainState {
  int epoch = 0;
  double best_val_recon = std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  std::vector<EpochStats> loss_history;
};

struct TrainResult {
  Vae<float> model;  // parameters of the best validation epoch
  TrainState state;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Adam with bias correction; state lives alongside the flat parameter vector.
class Adam {
 public:
  Adam(size_t n, double lr, double beta1, double beta2, double eps);
  void step(std::vector<float>& params, const std::vector<float>& grad);

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<float> m_, v_;
};

/// Tags records in place: train/val by the given fractions, the remainder
/// test. Deterministic for a seed; stratified by the record's stratum key
/// when any record carries one, plain random otherwise.
void split_dataset(std::vector<SubjectRecord>& records, double train_frac, double val_frac,
                   uint64_t seed);

/// Deterministic subset of ceil(fraction * N) train-tagged records; all other
/// records pass through. Subsets are nested: the fraction-f subset contains
/// the fraction-f' subset for f' < f under the same seed.
std::vector<SubjectRecord> subsample_training(const std::vector<SubjectRecord>& records,
                                              double fraction, uint64_t seed);
/// Index-based core of subsample_training, for callers that avoid copies.
std::vector<size_t> subsample_indices(size_t n, double fraction, uint64_t seed);

/// One training element: a whole volume (slice == -1) or one axial slice.
struct SampleRef {
  int subject = 0;
  int slice = -1;
};

/// 3D: one entry per train-tagged volume. 2D: one entry per axial slice that
/// intersects the brain mask. Never contains test-tagged records.
std::vector<SampleRef> training_pool(const std::vector<SubjectRecord>& records, int dims,
                                     const std::vector<size_t>& subject_indices);

/// Per-epoch shuffle and chunking into batches of at most batch_size.
std::vector<std::vector<SampleRef>> make_batches(const std::vector<SampleRef>& pool,
                                                 int batch_size, uint64_t seed, int epoch);

struct Batch {
  std::vector<std::vector<float>> inputs;   // erased copies
  std::vector<std::vector<float>> targets;  // untouched originals
  std::vector<SampleRef> refs;
};

/// Extracts samples and applies erasing to the inputs only. Erasing draws are
/// keyed by (erasing seed, subject id, slice, epoch), independent of data order.
Batch materialize_batch(const std::vector<SubjectRecord>& records,
                        const std::vector<SampleRef>& refs, const ErasingSpec& erasing,
                        int epoch);

/// Mean in-mask voxel L1 between a volume and an evaluation-mode
/// reconstruction of it (the epoch-selection metric).
double validation_recon(const Vae<float>& model, const SubjectRecord& record,
                        Vae<float>::Workspace& ws);

/// Runs up to max_epochs, evaluates validation reconstruction on unerased
/// inputs after each epoch, and returns the parameters of the best epoch
/// together with the full loss history. Throws TrainingDivergedError on a
/// non-finite loss.
TrainResult train(const std::vector<SubjectRecord>& records, const ModelConfig& model_cfg,
                  const TrainConfig& train_cfg, const EpochCallback& on_epoch = {});

// --- slice helpers (2D mode) -------------------------------------------------

std::vector<float> extract_axial_slice(const Volume& v, int z);
bool mask_slice_nonempty(const BrainMask& m, int z);
/// Wraps slice data as a degenerate volume so erasing can apply to it.
Volume slice_as_volume(const Volume& v, int z);

}  // namespace voxuad
