#pragma once

/**
 * @file volume_io.hpp
 * @brief Volume file I/O: NIfTI-1 (.nii, .nii.gz) and a raw interchange
 *        format (little-endian float32, C-order for shape (nx, ny, nz),
 *        with a human-readable key-value sidecar).
 */

#include <filesystem>
#include <string>

#include "voxuad/volume.hpp"

namespace voxuad {

/// Reads a NIfTI-1 file. Spacing comes from the sform affine when present,
/// otherwise from pixdim. Values are converted to float and scl_slope /
/// scl_inter are applied. Gzip compression is handled transparently.
Volume read_nifti(const std::filesystem::path& path);

/// Writes float32 NIfTI-1 with a diagonal sform affine. Compresses when the
/// filename ends in .gz.
void write_nifti(const std::filesystem::path& path, const Volume& v);

BrainMask read_nifti_mask(const std::filesystem::path& path);
void write_nifti(const std::filesystem::path& path, const BrainMask& m, Spacing3 spacing);
LabelMap read_nifti_labels(const std::filesystem::path& path);
void write_nifti(const std::filesystem::path& path, const LabelMap& l, Spacing3 spacing);

/// Raw interchange format: <path> holds the voxel data, <path>.meta the
/// sidecar with lines "shape: nx ny nz", "spacing: sx sy sz", "dtype: float32".
Volume read_raw(const std::filesystem::path& path);
void write_raw(const std::filesystem::path& path, const Volume& v);

/// Dispatches on extension: .nii / .nii.gz -> NIfTI, .raw -> raw format.
Volume read_volume(const std::filesystem::path& path);
void write_volume(const std::filesystem::path& path, const Volume& v);

/// Atomic file replace: writes to a temp file in the same directory, then renames.
void atomic_write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace voxuad
