#pragma once

/**
 * @file phantom.hpp
 * @brief Deterministic brain-like phantoms: nested smooth ellipsoidal tissue
 *        shells with low-frequency sinusoidal texture, plus spherical lesion
 *        injection. Lets the full pipeline run and be tested without any
 *        clinical data.
 *
 * All x-dependence of the construction is even around the phantom center, so
 * a phantom is laterally symmetric and mirroring commutes with generation.
 */

#include <array>
#include <optional>
#include <vector>

#include "voxuad/volume.hpp"

namespace voxuad {

struct LesionSpec {
  std::array<double, 3> center{32.0, 32.0, 32.0};  // voxel coordinates
  double radius = 4.0;                             // voxels; 0 means no-op
  double intensity_offset = 0.25;                  // magnitude of the perturbation
  int sign = +1;                                   // +1 hyper-, -1 hypo-intense
};

struct PhantomSpec {
  Shape3 shape{64, 64, 64};
  int tissue_layers = 3;
  double texture_amplitude = 0.04;
  std::optional<LesionSpec> lesion;
  uint64_t seed = 0;
};

/// Mirrors the spec along x so that generate(mirror_spec(s)) equals
/// mirror_x(generate(s)) exactly.
PhantomSpec mirror_spec(const PhantomSpec& spec);

/// Healthy phantom: intensities in [0, 1], mask = outer ellipsoid, labels
/// absent. Deterministic per seed.
SubjectRecord generate_healthy(const PhantomSpec& spec);

/// Adds a spherical intensity perturbation and sets labels to exactly the
/// perturbed voxels. Every labeled voxel moves by at least offset/2. Throws
/// std::invalid_argument when the ball is not fully inside the brain mask.
SubjectRecord inject_lesion(const SubjectRecord& record, const LesionSpec& lesion);

/// Number of voxels of the discrete ball used by inject_lesion.
size_t lesion_voxel_count(const Shape3& shape, const LesionSpec& lesion);

struct PhantomRanges {
  Shape3 shape{64, 64, 64};
  int tissue_layers_min = 2, tissue_layers_max = 4;
  double texture_amplitude_min = 0.02, texture_amplitude_max = 0.05;
  double lesion_radius_min = 4.0, lesion_radius_max = 8.0;
  double lesion_offset_min = 0.25, lesion_offset_max = 0.4;
};

/// Reproducible corpus: n_healthy healthy + n_lesioned lesioned records with
/// parameters drawn from the ranges; split tags left unassigned. Subject ids
/// are "h0000".../"l0000..." in generation order.
std::vector<SubjectRecord> generate_dataset(int n_healthy, int n_lesioned,
                                            const PhantomRanges& ranges, uint64_t seed);

}  // namespace voxuad
