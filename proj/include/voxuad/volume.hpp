#pragma once

/**
 * @file volume.hpp
 * @brief Volumetric data types: scalar volumes, binary masks, label maps and
 *        per-subject records. A 2D slice is represented as a degenerate
 *        volume with nz == 1.
 *
 * Storage is C-order for shape (nx, ny, nz): x is the slowest axis and z the
 * fastest, so an axial slice (fixed z) is strided and a z-run is contiguous.
 */

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "voxuad/errors.hpp"

namespace voxuad {

struct Shape3 {
  int nx = 0, ny = 0, nz = 0;

  size_t total() const { return size_t(nx) * size_t(ny) * size_t(nz); }
  bool operator==(const Shape3&) const = default;
  int operator[](int axis) const { return axis == 0 ? nx : (axis == 1 ? ny : nz); }
};

struct Spacing3 {
  double sx = 1.0, sy = 1.0, sz = 1.0;

  bool positive() const { return sx > 0.0 && sy > 0.0 && sz > 0.0; }
  bool operator==(const Spacing3&) const = default;
  double operator[](int axis) const { return axis == 0 ? sx : (axis == 1 ? sy : sz); }
};

inline size_t voxel_index(const Shape3& s, int x, int y, int z) {
  return (size_t(x) * s.ny + size_t(y)) * s.nz + size_t(z);
}

/// Scalar 3D grid with voxel spacing in mm.
struct Volume {
  Shape3 shape;
  Spacing3 spacing;
  std::string subject_id;
  std::vector<float> data;

  float& at(int x, int y, int z) { return data[voxel_index(shape, x, y, z)]; }
  float at(int x, int y, int z) const { return data[voxel_index(shape, x, y, z)]; }
};

/// Binary brain mask; shape matches its companion volume.
struct BrainMask {
  Shape3 shape;
  std::vector<uint8_t> data;

  uint8_t& at(int x, int y, int z) { return data[voxel_index(shape, x, y, z)]; }
  uint8_t at(int x, int y, int z) const { return data[voxel_index(shape, x, y, z)]; }
};

/// Binary ground-truth anomaly voxels; may be empty (healthy subject).
struct LabelMap {
  Shape3 shape;
  std::vector<uint8_t> data;

  uint8_t& at(int x, int y, int z) { return data[voxel_index(shape, x, y, z)]; }
  uint8_t at(int x, int y, int z) const { return data[voxel_index(shape, x, y, z)]; }
};

enum class SplitTag { unassigned, train, val, test };

std::string to_string(SplitTag tag);
SplitTag split_tag_from_string(const std::string& s);

struct SubjectRecord {
  Volume volume;
  BrainMask mask;
  std::optional<LabelMap> labels;
  SplitTag split_tag = SplitTag::unassigned;
  /// Optional stratification key (e.g. scanner id); empty means none.
  std::string stratum;
};

inline Volume make_volume(Shape3 shape, float fill = 0.0f, Spacing3 spacing = {},
                          std::string subject_id = {}) {
  return Volume{shape, spacing, std::move(subject_id), std::vector<float>(shape.total(), fill)};
}

inline BrainMask make_mask(Shape3 shape, uint8_t fill = 0) {
  return BrainMask{shape, std::vector<uint8_t>(shape.total(), fill)};
}

inline LabelMap make_labels(Shape3 shape, uint8_t fill = 0) {
  return LabelMap{shape, std::vector<uint8_t>(shape.total(), fill)};
}

inline size_t count_foreground(const std::vector<uint8_t>& v) {
  size_t n = 0;
  for (uint8_t b : v) n += (b != 0);
  return n;
}

inline bool strictly_binary(const std::vector<uint8_t>& v) {
  for (uint8_t b : v)
    if (b > 1) return false;
  return true;
}

// --- invariant validation -------------------------------------------------

void validate(const Volume& v);
void validate(const BrainMask& m, bool require_nonempty = true);
void validate(const LabelMap& l);
void validate(const SubjectRecord& r);
/// Checks the post-normalization contract: in-mask intensities in [0, 1].
void validate_normalized(const Volume& v, const BrainMask& m);

inline bool has_anomaly_labels(const SubjectRecord& r) {
  return r.labels.has_value() && count_foreground(r.labels->data) > 0;
}

}  // namespace voxuad
