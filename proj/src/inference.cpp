#include "voxuad/inference.hpp"

#include <cmath>

#include "voxuad/training.hpp"

namespace voxuad {

Volume reconstruct_volume(const Vae<float>& model, const Volume& v) {
  Volume out = v;
  auto ws = model.make_workspace();
  std::vector<float> recon;
  if (model.config().dims == 3) {
    if (v.data.size() != model.config().input_size())
      throw std::invalid_argument("volume does not match the model input shape");
    model.reconstruct(std::span<const float>(v.data), recon, ws);
    out.data = std::move(recon);
    return out;
  }
  const int extent = model.config().input_extent;
  if (v.shape.nx != extent || v.shape.ny != extent)
    throw std::invalid_argument("volume does not match the model input shape");
  for (int z = 0; z < v.shape.nz; ++z) {
    std::vector<float> slice = extract_axial_slice(v, z);
    model.reconstruct(slice, recon, ws);
    for (int x = 0; x < v.shape.nx; ++x)
      for (int y = 0; y < v.shape.ny; ++y)
        out.at(x, y, z) = recon[size_t(x) * v.shape.ny + y];
  }
  return out;
}

ResidualMap residual_between(const Volume& x, const Volume& x_hat) {
  if (x.shape != x_hat.shape) throw std::invalid_argument("residual shapes differ");
  ResidualMap r;
  r.shape = x.shape;
  r.source_subject = x.subject_id;
  r.data.resize(x.data.size());
  for (size_t i = 0; i < x.data.size(); ++i) r.data[i] = std::fabs(x.data[i] - x_hat.data[i]);
  return r;
}

ResidualMap residual(const Vae<float>& model, const Volume& v) {
  return residual_between(v, reconstruct_volume(model, v));
}

ResidualMap postprocess(const ResidualMap& r, const BrainMask& mask, int erosion_radius,
                        int median_kernel) {
  if (r.postprocessed) throw InvalidStateError("residual map already post-processed");
  if (mask.shape != r.shape) throw std::invalid_argument("mask shape does not match residual");
  BrainMask eroded = erode_mask(mask, erosion_radius);

  Volume tmp;
  tmp.shape = r.shape;
  tmp.data = r.data;
  for (size_t i = 0; i < tmp.data.size(); ++i)
    if (!eroded.data[i]) tmp.data[i] = 0.0f;
  tmp = median_filter(tmp, median_kernel);

  ResidualMap out;
  out.shape = r.shape;
  out.data = std::move(tmp.data);
  out.postprocessed = true;
  out.source_subject = r.source_subject;
  return out;
}

LabelMap binarize(const ResidualMap& r, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw std::invalid_argument("threshold must lie in [0, 1]");
  LabelMap out = make_labels(r.shape, 0);
  for (size_t i = 0; i < r.data.size(); ++i) out.data[i] = r.data[i] > threshold ? 1 : 0;
  return out;
}

std::vector<SliceScore> slice_scores(const ResidualMap& r, const BrainMask& mask,
                                     SliceReduction reduction) {
  if (mask.shape != r.shape) throw std::invalid_argument("mask shape does not match residual");
  std::vector<SliceScore> scores(r.shape.nz);
  for (int z = 0; z < r.shape.nz; ++z) {
    double sum = 0.0;
    size_t count = 0;
    for (int x = 0; x < r.shape.nx; ++x)
      for (int y = 0; y < r.shape.ny; ++y)
        if (mask.at(x, y, z)) {
          sum += r.at(x, y, z);
          ++count;
        }
    scores[z].slice_index = z;
    if (count == 0)
      scores[z].score = 0.0;
    else
      scores[z].score = reduction == SliceReduction::mean ? sum / double(count) : sum;
  }
  return scores;
}

}  // namespace voxuad
