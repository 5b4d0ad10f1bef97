#pragma once

/**
 * @file manifest.hpp
 * @brief Experiment manifest: a strict JSON file that fully determines a run
 *        (data source, preprocessing, model, training, evaluation, seeds,
 *        output directory). Unknown keys are rejected.
 */

#include <filesystem>
#include <optional>
#include <string>

#include "voxuad/erasing.hpp"
#include "voxuad/inference.hpp"
#include "voxuad/phantom.hpp"
#include "voxuad/training.hpp"
#include "voxuad/vae.hpp"

namespace voxuad {

struct PhantomBlock {
  int n_healthy = 0;
  int n_lesioned = 0;
  PhantomRanges ranges;
};

struct DataSection {
  std::string corpus_index;  // path to an index.json; empty when phantoms are used
  std::optional<PhantomBlock> phantoms;
};

struct PreprocessSection {
  double target_spacing_mm = 1.0;
  int crop_margin = 2;
  Shape3 pad_shape{191, 158, 163};
  Shape3 output_shape{64, 64, 64};
  double clip_percentile = 98.0;
};

struct EvalSection {
  int erosion_radius = 1;
  int median_kernel = 3;
  int search_iterations = 10;
  SliceReduction slice_score = SliceReduction::mean;
  /// Fraction of annotated subjects used for the threshold search; the rest
  /// become the test set.
  double lesion_val_fraction = 0.5;
  bool save_residuals = true;
};

struct Seeds {
  uint64_t master = 0;
  // derived from master unless set explicitly in the manifest
  uint64_t split = 0, model = 0, erasing = 0, batch = 0, phantom = 0;

  static Seeds derive(uint64_t master, const std::optional<uint64_t>& split,
                      const std::optional<uint64_t>& model, const std::optional<uint64_t>& erasing,
                      const std::optional<uint64_t>& batch, const std::optional<uint64_t>& phantom);
};

struct Manifest {
  DataSection data;
  PreprocessSection preprocess;
  ModelConfig model;
  TrainConfig train;
  double train_fraction = 0.9;
  double val_fraction = 0.1;
  EvalSection eval;
  Seeds seeds;
  std::string output_dir;
  std::string experiment_name;  // canonical strategy name when given
  std::string raw_json;         // verbatim manifest text, for the run copy

  // explicit seed fields as written, needed to re-derive under --seed override
  std::optional<uint64_t> seed_split, seed_model, seed_erasing, seed_batch, seed_phantom;

  void apply_master_seed(uint64_t master);
};

Manifest parse_manifest(const std::filesystem::path& path);
Manifest parse_manifest_text(const std::string& text);

/// Canonical experiment names: {2d,3d}-{none,patch,multi-patch,half-slice,
/// cube,multi-cube,half-volume}[-{0,n}], case-insensitive, e.g. "3d-cube-n".
/// Sets dims and the erasing strategy/fill.
struct ExperimentName {
  int dims = 3;
  EraseStrategy strategy = EraseStrategy::none;
  EraseFill fill = EraseFill::zero;
};
ExperimentName parse_experiment_name(const std::string& name);

}  // namespace voxuad
