#pragma once

/**
 * @file erasing.hpp
 * @brief Spatial input erasing for 2D slices (nz == 1) and 3D volumes:
 *        single and multiple axis-aligned regions and hemisphere erasing,
 *        with zero or empirical-noise fill. Only the network input is
 *        modified; the optimization target stays untouched.
 */

#include <cstdint>
#include <string>
#include <vector>

#include "voxuad/rng.hpp"
#include "voxuad/volume.hpp"

namespace voxuad {

enum class EraseStrategy {
  none,
  patch,        // 2D single rectangle
  multi_patch,  // 2D up to max_regions rectangles
  half_slice,   // 2D lateral half of the slice
  cube,         // 3D single cuboid
  multi_cube,   // 3D up to max_regions cuboids
  half_volume,  // 3D lateral half of k consecutive axial slices
};

enum class EraseFill { zero, noise };

std::string to_string(EraseStrategy s);
EraseStrategy erase_strategy_from_string(const std::string& s);
std::string to_string(EraseFill f);
EraseFill erase_fill_from_string(const std::string& s);

/// Dimensionality a strategy applies to: 2 for slice strategies, 3 for
/// volume strategies, 0 for none (either).
int strategy_dims(EraseStrategy s);

struct ErasingSpec {
  EraseStrategy strategy = EraseStrategy::none;
  EraseFill fill = EraseFill::zero;
  double probability = 0.5;
  double min_frac = 0.01;  // erased-fraction budget, lower bound
  double max_frac = 0.25;  // erased-fraction budget, upper bound
  int max_regions = 10;
  int slice_run_min = 1;  // half_volume: consecutive-slice run bounds
  int slice_run_max = 32;
  uint64_t seed = 0;

  void validate() const;
};

struct EraseRegion {
  int x0, x1, y0, y1, z0, z1;  // half-open
  size_t volume() const {
    return size_t(x1 - x0) * size_t(y1 - y0) * size_t(z1 - z0);
  }
};

struct ErasedSample {
  Volume input;                      // modified copy
  Volume target;                     // bit-identical to the pre-erasing input
  std::vector<uint8_t> erase_mask;   // 1 where voxels were assigned
  std::vector<EraseRegion> regions;  // the applied regions (empty if skipped)

  bool modified() const { return !regions.empty(); }
  size_t erased_voxels() const { return count_foreground(erase_mask); }
};

/// Applies the spec to x. With probability (1 - p) the sample passes through
/// unmodified. The caller supplies the random stream, typically keyed by
/// (seed, subject, epoch) so draws are independent of data order.
ErasedSample apply_erasing(const Volume& x, const ErasingSpec& spec, RngStream& rng);

/// n i.i.d. draws (with replacement) from the empirical distribution of the
/// image's own voxel intensities.
std::vector<float> sample_noise_fill(const Volume& x, size_t n, RngStream& rng);

}  // namespace voxuad
