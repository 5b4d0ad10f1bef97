#pragma once

/**
 * @file evaluation.hpp
 * @brief Segmentation and detection metrics: DICE (pooled and subject-wise),
 *        precision-recall curves and AUPRC, the greedy binarization-threshold
 *        search, slice-level labels, and the lesion-size breakdown.
 */

#include <functional>
#include <vector>

#include "voxuad/inference.hpp"
#include "voxuad/volume.hpp"

namespace voxuad {

/// 2|X n Y| / (|X| + |Y|); 1 when both sets are empty, 0 when exactly one is.
double dice(const LabelMap& pred, const LabelMap& truth);
double dice_from_counts(size_t intersection, size_t pred_size, size_t truth_size);

/// DICE over the concatenation of all subjects' voxels.
double dice_dataset(const std::vector<LabelMap>& preds, const std::vector<LabelMap>& truths);

struct SubjectwiseDice {
  std::vector<double> values;
  double mean = 0.0;
  double stddev = 0.0;  // population standard deviation
};

SubjectwiseDice dice_subjectwise(const std::vector<LabelMap>& preds,
                                 const std::vector<LabelMap>& truths);

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
  double threshold = 0.0;  // score at which the point is attained
};

/// Points at every distinct score threshold, descending score order, ties
/// grouped; recall is nondecreasing. Throws UndefinedMetricError when there
/// is no positive label.
struct PRCurve {
  std::vector<PrPoint> points;
};

PRCurve pr_curve(const std::vector<float>& scores, const std::vector<uint8_t>& labels);

/// Area by the average-precision step rule: sum (R_i - R_{i-1}) * P_i.
double auprc(const PRCurve& curve);

/// pr_curve + auprc in one pass.
double auprc_of(const std::vector<float>& scores, const std::vector<uint8_t>& labels);

struct ThresholdTraceRow {
  int iteration = 0;
  double lo = 0.0, hi = 0.0;
  double q1 = 0.0, q3 = 0.0;        // evaluated quartile points
  double dice_q1 = 0.0, dice_q3 = 0.0;
  bool kept_lower = false;
};

struct ThresholdSearchResult {
  double threshold = 0.0;
  double dice = 0.0;  // objective value at the returned threshold
  std::vector<ThresholdTraceRow> trace;
};

/// Greedy interval-halving search over [0, 1]: each iteration evaluates the
/// objective at the interval's lower and upper quartile points and keeps the
/// half containing the better one (ties keep the lower half). Returns the
/// best threshold evaluated anywhere during the search.
ThresholdSearchResult greedy_threshold_search(const std::function<double(double)>& dice_at,
                                              int iterations = 10);

/// The validation-set objective: pooled DICE of binarized residuals.
ThresholdSearchResult greedy_threshold_search(const std::vector<ResidualMap>& residuals,
                                              const std::vector<LabelMap>& truths,
                                              int iterations = 10);

/// Axial slice abnormal iff it contains at least one annotated voxel.
std::vector<uint8_t> slice_labels(const LabelMap& truth);

struct LesionSizeRow {
  size_t lesion_voxels = 0;
  double dice = 0.0;
};

struct LesionSizeBreakdown {
  std::vector<LesionSizeRow> rows;    // one per subject
  bool has_trend = false;
  std::vector<double> trend_coeffs;   // cubic coefficients over normalized size
  double size_lo = 0.0, size_hi = 0.0;  // normalization bounds used by the fit
};

/// Per-subject (lesion size, dice) pairs plus a degree-3 least-squares trend;
/// the trend is omitted with fewer than 4 subjects.
LesionSizeBreakdown lesion_size_breakdown(const std::vector<double>& subject_dice,
                                          const std::vector<LabelMap>& truths);

/// Least-squares polynomial fit (ascending coefficient order) on x values
/// normalized to [-1, 1]; xs/ys must have equal size > degree.
std::vector<double> polyfit(const std::vector<double>& xs, const std::vector<double>& ys,
                            int degree);
/// Evaluates a polyfit result at x (same normalization as the fit).
double polyval(const std::vector<double>& coeffs, double x_lo, double x_hi, double x);

}  // namespace voxuad
