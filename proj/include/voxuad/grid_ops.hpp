#pragma once

/**
 * @file grid_ops.hpp
 * @brief Deterministic grid operations: isotropic resampling, mask-driven
 *        cropping, zero padding, anti-aliased downsampling, percentile
 *        normalization, binary erosion and median filtering.
 *
 * All functions are pure: they never mutate their inputs and are safe to run
 * per subject in parallel.
 */

#include <utility>

#include "voxuad/volume.hpp"

namespace voxuad {

/// Inclusive-low / exclusive-high box in voxel coordinates.
struct Box3 {
  int x0 = 0, y0 = 0, z0 = 0;
  int x1 = 0, y1 = 0, z1 = 0;

  Shape3 shape() const { return {x1 - x0, y1 - y0, z1 - z0}; }
  bool operator==(const Box3&) const = default;
};

/// Resamples to isotropic target_mm spacing with cubic (Keys, a = -0.5)
/// interpolation. Output extent per axis is round(n * spacing / target_mm),
/// so physical extent is preserved within one voxel per axis.
Volume resample_isotropic(const Volume& v, double target_mm);
/// Nearest-neighbor counterparts for masks and labels.
BrainMask resample_isotropic(const BrainMask& m, Spacing3 spacing, double target_mm);
LabelMap resample_isotropic(const LabelMap& l, Spacing3 spacing, double target_mm);

/// Tight foreground bounding box of a mask. Throws EmptyMaskError.
Box3 mask_bounding_box(const BrainMask& m);
/// Grows a box by margin voxels per side, clamped to the given shape.
Box3 expand_box(const Box3& b, int margin, const Shape3& bounds);

Volume crop(const Volume& v, const Box3& b);
BrainMask crop(const BrainMask& m, const Box3& b);
LabelMap crop(const LabelMap& l, const Box3& b);

/// Crops volume and mask to the mask's bounding box dilated by margin.
std::pair<Volume, BrainMask> crop_to_mask(const Volume& v, const BrainMask& m, int margin);

/// Zero-pads to target shape, split as evenly as possible per axis with the
/// extra voxel on the high side. Interior data is preserved bit-exactly.
Volume pad_to_shape(const Volume& v, const Shape3& target);
BrainMask pad_to_shape(const BrainMask& m, const Shape3& target);
LabelMap pad_to_shape(const LabelMap& l, const Shape3& target);

/// Inverse of pad_to_shape for the same even-split convention.
Volume center_crop(const Volume& v, const Shape3& target);

/// Anti-aliased (area-averaging) downsampling to the target grid. Each target
/// extent must not exceed the source extent. Exactly mean-preserving; output
/// values never leave the input value range.
Volume downsample(const Volume& v, const Shape3& target);
BrainMask downsample(const BrainMask& m, const Shape3& target);
LabelMap downsample(const LabelMap& l, const Shape3& target);

/// Maps in-mask intensities to [0, 1]: clip at the given upper percentile of
/// the in-mask distribution, then min-max scale. Background is set to 0.
/// Throws DegenerateRangeError when the in-mask range is (near) constant.
Volume normalize_intensity(const Volume& v, const BrainMask& m, double clip_percentile = 98.0);

/// Morphological erosion with a Euclidean ball of the given voxel radius.
/// Voxels outside the grid count as background, so the mask shrinks at the
/// image border as well.
BrainMask erode_mask(const BrainMask& m, int radius);

/// Median filter with a cubic kernel^3 neighborhood and reflective (edge
/// duplicating) boundary handling. Kernel must be odd.
Volume median_filter(const Volume& v, int kernel);

/// Linear-interpolation percentile (q in [0, 100]) of an unsorted sample.
double percentile(std::vector<float> values, double q);

/// Mirrors a volume along the x (lateral) axis.
Volume mirror_x(const Volume& v);

}  // namespace voxuad
