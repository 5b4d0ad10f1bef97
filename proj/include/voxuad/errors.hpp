#pragma once

#include <stdexcept>
#include <string>

namespace voxuad {

/// Mask has no foreground voxel where one is required.
struct EmptyMaskError : std::runtime_error {
  explicit EmptyMaskError(const std::string& what) : std::runtime_error(what) {}
};

/// In-mask intensities span a zero (or near-zero) range; normalization is undefined.
struct DegenerateRangeError : std::runtime_error {
  explicit DegenerateRangeError(const std::string& what) : std::runtime_error(what) {}
};

/// Operation applied in a state it does not permit (e.g. double post-processing).
struct InvalidStateError : std::logic_error {
  explicit InvalidStateError(const std::string& what) : std::logic_error(what) {}
};

/// Metric has no defined value on the given input (e.g. PR curve with no positives).
struct UndefinedMetricError : std::runtime_error {
  explicit UndefinedMetricError(const std::string& what) : std::runtime_error(what) {}
};

/// Training aborted on a non-finite loss; carries the offending epoch.
struct TrainingDivergedError : std::runtime_error {
  int epoch;
  double loss;
  TrainingDivergedError(int epoch_, double loss_, const std::string& what)
      : std::runtime_error(what), epoch(epoch_), loss(loss_) {}
};

}  // namespace voxuad
