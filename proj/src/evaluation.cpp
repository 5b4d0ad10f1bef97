#include "voxuad/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace voxuad {

double dice_from_counts(size_t intersection, size_t pred_size, size_t truth_size) {
  if (pred_size == 0 && truth_size == 0) return 1.0;  // both empty: perfect agreement
  if (pred_size == 0 || truth_size == 0) return 0.0;
  return 2.0 * double(intersection) / double(pred_size + truth_size);
}

double dice(const LabelMap& pred, const LabelMap& truth) {
  if (pred.shape != truth.shape) throw std::invalid_argument("dice shapes differ");
  size_t inter = 0, np = 0, nt = 0;
  for (size_t i = 0; i < pred.data.size(); ++i) {
    np += pred.data[i] != 0;
    nt += truth.data[i] != 0;
    inter += (pred.data[i] != 0) && (truth.data[i] != 0);
  }
  return dice_from_counts(inter, np, nt);
}

double dice_dataset(const std::vector<LabelMap>& preds, const std::vector<LabelMap>& truths) {
  if (preds.size() != truths.size()) throw std::invalid_argument("subject list length mismatch");
  size_t inter = 0, np = 0, nt = 0;
  for (size_t s = 0; s < preds.size(); ++s) {
    if (preds[s].shape != truths[s].shape) throw std::invalid_argument("dice shapes differ");
    for (size_t i = 0; i < preds[s].data.size(); ++i) {
      np += preds[s].data[i] != 0;
      nt += truths[s].data[i] != 0;
      inter += (preds[s].data[i] != 0) && (truths[s].data[i] != 0);
    }
  }
  return dice_from_counts(inter, np, nt);
}

SubjectwiseDice dice_subjectwise(const std::vector<LabelMap>& preds,
                                 const std::vector<LabelMap>& truths) {
  if (preds.empty()) throw std::invalid_argument("no subjects");
  if (preds.size() != truths.size()) throw std::invalid_argument("subject list length mismatch");
  SubjectwiseDice out;
  out.values.reserve(preds.size());
  for (size_t s = 0; s < preds.size(); ++s) out.values.push_back(dice(preds[s], truths[s]));
  double sum = std::accumulate(out.values.begin(), out.values.end(), 0.0);
  out.mean = sum / double(out.values.size());
  double sq = 0.0;
  for (double v : out.values) sq += (v - out.mean) * (v - out.mean);
  out.stddev = std::sqrt(sq / double(out.values.size()));
  return out;
}

PRCurve pr_curve(const std::vector<float>& scores, const std::vector<uint8_t>& labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("score/label length mismatch");
  size_t total_pos = 0;
  for (uint8_t l : labels) total_pos += l != 0;
  if (total_pos == 0) throw UndefinedMetricError("PR curve needs at least one positive label");

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t(0));
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });

  PRCurve curve;
  size_t tp = 0, fp = 0;
  size_t i = 0;
  while (i < order.size()) {
    float s = scores[order[i]];
    // consume the whole tie group before emitting a point
    while (i < order.size() && scores[order[i]] == s) {
      if (labels[order[i]] != 0)
        ++tp;
      else
        ++fp;
      ++i;
    }
    PrPoint p;
    p.threshold = s;
    p.recall = double(tp) / double(total_pos);
    p.precision = double(tp) / double(tp + fp);
    curve.points.push_back(p);
  }
  return curve;
}

double auprc(const PRCurve& curve) {
  double area = 0.0;
  double prev_recall = 0.0;
  for (const PrPoint& p : curve.points) {
    area += (p.recall - prev_recall) * p.precision;
    prev_recall = p.recall;
  }
  return area;
}

double auprc_of(const std::vector<float>& scores, const std::vector<uint8_t>& labels) {
  return auprc(pr_curve(scores, labels));
}

ThresholdSearchResult greedy_threshold_search(const std::function<double(double)>& dice_at,
                                              int iterations) {
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  ThresholdSearchResult result;
  result.dice = -1.0;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < iterations; ++it) {
    const double w = hi - lo;
    const double q1 = lo + 0.25 * w;
    const double q3 = lo + 0.75 * w;
    const double d1 = dice_at(q1);
    const double d3 = dice_at(q3);
    if (d1 > result.dice) {
      result.dice = d1;
      result.threshold = q1;
    }
    if (d3 > result.dice) {
      result.dice = d3;
      result.threshold = q3;
    }
    const bool keep_lower = d1 >= d3;  // tie keeps the lower half
    ThresholdTraceRow row{it + 1, lo, hi, q1, q3, d1, d3, keep_lower};
    result.trace.push_back(row);
    if (keep_lower)
      hi = lo + 0.5 * w;
    else
      lo = lo + 0.5 * w;
  }
  return result;
}

ThresholdSearchResult greedy_threshold_search(const std::vector<ResidualMap>& residuals,
                                              const std::vector<LabelMap>& truths,
                                              int iterations) {
  if (residuals.empty()) throw std::invalid_argument("empty validation set");
  if (residuals.size() != truths.size())
    throw std::invalid_argument("residual/label list length mismatch");
  size_t truth_total = 0;
  for (size_t s = 0; s < residuals.size(); ++s) {
    if (residuals[s].shape != truths[s].shape)
      throw std::invalid_argument("residual/label shape mismatch");
    truth_total += count_foreground(truths[s].data);
  }
  auto pooled_dice = [&](double t) {
    size_t inter = 0, np = 0;
    for (size_t s = 0; s < residuals.size(); ++s) {
      const auto& r = residuals[s].data;
      const auto& y = truths[s].data;
      for (size_t i = 0; i < r.size(); ++i) {
        bool p = r[i] > t;
        np += p;
        inter += p && (y[i] != 0);
      }
    }
    return dice_from_counts(inter, np, truth_total);
  };
  return greedy_threshold_search(pooled_dice, iterations);
}

std::vector<uint8_t> slice_labels(const LabelMap& truth) {
  std::vector<uint8_t> labels(truth.shape.nz, 0);
  for (int z = 0; z < truth.shape.nz; ++z) {
    for (int x = 0; x < truth.shape.nx && !labels[z]; ++x)
      for (int y = 0; y < truth.shape.ny; ++y)
        if (truth.at(x, y, z)) {
          labels[z] = 1;
          break;
        }
  }
  return labels;
}

std::vector<double> polyfit(const std::vector<double>& xs, const std::vector<double>& ys,
                            int degree) {
  if (xs.size() != ys.size()) throw std::invalid_argument("polyfit length mismatch");
  if ((int)xs.size() <= degree) throw std::invalid_argument("polyfit needs > degree points");
  const double lo = *std::min_element(xs.begin(), xs.end());
  const double hi = *std::max_element(xs.begin(), xs.end());
  const double span = hi > lo ? hi - lo : 1.0;
  const int n = degree + 1;

  // normal equations on x normalized to [-1, 1]
  std::vector<double> ata(n * n, 0.0), aty(n, 0.0);
  for (size_t k = 0; k < xs.size(); ++k) {
    double u = 2.0 * (xs[k] - lo) / span - 1.0;
    std::vector<double> pow_u(n);
    pow_u[0] = 1.0;
    for (int i = 1; i < n; ++i) pow_u[i] = pow_u[i - 1] * u;
    for (int i = 0; i < n; ++i) {
      aty[i] += pow_u[i] * ys[k];
      for (int j = 0; j < n; ++j) ata[i * n + j] += pow_u[i] * pow_u[j];
    }
  }

  // Gaussian elimination with partial pivoting
  std::vector<double> a = ata, b = aty;
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::fabs(a[r * n + col]) > std::fabs(a[pivot * n + col])) pivot = r;
    if (std::fabs(a[pivot * n + col]) < 1e-30) throw std::runtime_error("singular polyfit system");
    if (pivot != col) {
      for (int c = 0; c < n; ++c) std::swap(a[col * n + c], a[pivot * n + c]);
      std::swap(b[col], b[pivot]);
    }
    for (int r = col + 1; r < n; ++r) {
      double f = a[r * n + col] / a[col * n + col];
      for (int c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> coeffs(n);
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < n; ++c) s -= a[r * n + c] * coeffs[c];
    coeffs[r] = s / a[r * n + r];
  }
  return coeffs;
}

double polyval(const std::vector<double>& coeffs, double x_lo, double x_hi, double x) {
  const double span = x_hi > x_lo ? x_hi - x_lo : 1.0;
  double u = 2.0 * (x - x_lo) / span - 1.0;
  double v = 0.0;
  for (int i = (int)coeffs.size() - 1; i >= 0; --i) v = v * u + coeffs[i];
  return v;
}

LesionSizeBreakdown lesion_size_breakdown(const std::vector<double>& subject_dice,
                                          const std::vector<LabelMap>& truths) {
  if (subject_dice.size() != truths.size())
    throw std::invalid_argument("dice/label list length mismatch");
  LesionSizeBreakdown out;
  out.rows.reserve(truths.size());
  for (size_t s = 0; s < truths.size(); ++s)
    out.rows.push_back({count_foreground(truths[s].data), subject_dice[s]});

  if (out.rows.size() >= 4) {
    std::vector<double> xs, ys;
    for (const auto& row : out.rows) {
      xs.push_back(double(row.lesion_voxels));
      ys.push_back(row.dice);
    }
    out.size_lo = *std::min_element(xs.begin(), xs.end());
    out.size_hi = *std::max_element(xs.begin(), xs.end());
    try {
      out.trend_coeffs = polyfit(xs, ys, 3);
      out.has_trend = true;
    } catch (const std::exception&) {
      out.has_trend = false;  // e.g. all sizes identical
    }
  }
  return out;
}

}  // namespace voxuad
