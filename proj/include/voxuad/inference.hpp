#pragma once

/**
 * @file inference.hpp
 * @brief From a trained model and a test volume to a post-processed residual
 *        map, a binary segmentation, and per-slice anomaly scores.
 */

#include <string>
#include <vector>

#include "voxuad/grid_ops.hpp"
#include "voxuad/vae.hpp"
#include "voxuad/volume.hpp"

namespace voxuad {

/// Per-voxel L1 discrepancy |x - x_hat| plus post-processing state.
struct ResidualMap {
  Shape3 shape;
  std::vector<float> data;
  bool postprocessed = false;
  std::string source_subject;

  float at(int x, int y, int z) const { return data[voxel_index(shape, x, y, z)]; }
  float& at(int x, int y, int z) { return data[voxel_index(shape, x, y, z)]; }
};

struct SliceScore {
  int slice_index = 0;
  double score = 0.0;
};

enum class SliceReduction { mean, sum };

/// Evaluation-mode reconstruction of a whole volume. 3D models map the volume
/// directly; 2D models process it axial slice by axial slice and restack.
Volume reconstruct_volume(const Vae<float>& model, const Volume& v);

/// Voxel-wise |x - x_hat| with the model in evaluation mode (z = mean).
ResidualMap residual(const Vae<float>& model, const Volume& v);

/// Residual between two volumes (the model-free core of the above).
ResidualMap residual_between(const Volume& x, const Volume& x_hat);

/// Multiplies by the eroded brain mask, then median-filters; in that order.
/// Throws InvalidStateError when applied twice.
ResidualMap postprocess(const ResidualMap& r, const BrainMask& mask, int erosion_radius,
                        int median_kernel);

/// Voxel anomalous iff residual > threshold. Threshold must lie in [0, 1].
LabelMap binarize(const ResidualMap& r, double threshold);

/// One score per axial slice: mean (default) or sum of the slice's in-mask
/// residuals; 0 when the slice has no mask voxels.
std::vector<SliceScore> slice_scores(const ResidualMap& r, const BrainMask& mask,
                                     SliceReduction reduction = SliceReduction::mean);

}  // namespace voxuad
