#include "voxuad/grid_ops.hpp"

#include <algorithm>
#include <cmath>

namespace voxuad {

std::string to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::train: return "train";
    case SplitTag::val: return "val";
    case SplitTag::test: return "test";
    default: return "unassigned";
  }
}

SplitTag split_tag_from_string(const std::string& s) {
  if (s == "train") return SplitTag::train;
  if (s == "val") return SplitTag::val;
  if (s == "test") return SplitTag::test;
  if (s == "unassigned" || s.empty()) return SplitTag::unassigned;
  throw std::invalid_argument("unknown split tag: " + s);
}

void validate(const Volume& v) {
  if (!v.spacing.positive()) throw std::invalid_argument("volume spacing must be positive");
  if (v.shape.nx <= 0 || v.shape.ny <= 0 || v.shape.nz <= 0)
    throw std::invalid_argument("volume shape must be positive");
  if (v.data.size() != v.shape.total())
    throw std::invalid_argument("volume data size does not match shape");
}

void validate(const BrainMask& m, bool require_nonempty) {
  if (m.data.size() != m.shape.total())
    throw std::invalid_argument("mask data size does not match shape");
  if (!strictly_binary(m.data)) throw std::invalid_argument("mask is not strictly binary");
  if (require_nonempty && count_foreground(m.data) == 0)
    throw EmptyMaskError("brain mask has no foreground voxel");
}

void validate(const LabelMap& l) {
  if (l.data.size() != l.shape.total())
    throw std::invalid_argument("label data size does not match shape");
  if (!strictly_binary(l.data)) throw std::invalid_argument("labels are not strictly binary");
}

void validate(const SubjectRecord& r) {
  validate(r.volume);
  validate(r.mask);
  if (r.mask.shape != r.volume.shape)
    throw std::invalid_argument("mask shape does not match volume");
  if (r.labels) {
    validate(*r.labels);
    if (r.labels->shape != r.volume.shape)
      throw std::invalid_argument("label shape does not match volume");
  }
}

void validate_normalized(const Volume& v, const BrainMask& m) {
  if (m.shape != v.shape) throw std::invalid_argument("mask shape does not match volume");
  for (size_t i = 0; i < v.data.size(); ++i) {
    if (m.data[i] && (v.data[i] < 0.0f || v.data[i] > 1.0f))
      throw std::invalid_argument("in-mask intensity outside [0, 1]");
  }
}

namespace {

// Keys cubic convolution kernel, a = -0.5. Exact on constant and linear
// inputs, which the resampling tests rely on.
double cubic_weight(double t) {
  constexpr double a = -0.5;
  t = std::fabs(t);
  if (t < 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

int reflect_index(int i, int n) {
  // edge-duplicating reflection: (-1 -> 0), (n -> n-1)
  while (i < 0 || i >= n) {
    if (i < 0) i = -1 - i;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

int clamp_index(int i, int n) { return std::clamp(i, 0, n - 1); }

int output_extent(int n, double spacing, double target) {
  return std::max(1, (int)std::lround(double(n) * spacing / target));
}

// One separable cubic resampling pass along `axis`. Voxel centers of both
// grids are anchored at the same physical origin.
std::vector<float> resample_axis_cubic(const std::vector<float>& in, Shape3 shape, int axis,
                                       int n_out, double ratio) {
  Shape3 out_shape = shape;
  (axis == 0 ? out_shape.nx : axis == 1 ? out_shape.ny : out_shape.nz) = n_out;
  std::vector<float> out(out_shape.total());

  const int n_in = shape[axis];
  struct Tap {
    int idx[4];
    double w[4];
  };
  std::vector<Tap> taps(n_out);
  for (int i = 0; i < n_out; ++i) {
    double u = (i + 0.5) * ratio - 0.5;
    int base = (int)std::floor(u);
    double frac = u - base;
    double wsum = 0.0;
    for (int k = 0; k < 4; ++k) {
      taps[i].idx[k] = clamp_index(base - 1 + k, n_in);
      taps[i].w[k] = cubic_weight(frac - (k - 1));
      wsum += taps[i].w[k];
    }
    for (double& w : taps[i].w) w /= wsum;
  }

  auto stride_of = [](const Shape3& s, int ax) -> size_t {
    if (ax == 0) return size_t(s.ny) * s.nz;
    if (ax == 1) return size_t(s.nz);
    return 1;
  };
  const size_t in_stride = stride_of(shape, axis);
  const size_t out_stride = stride_of(out_shape, axis);

  // iterate over all lines along `axis`
  const int a1 = (axis == 0) ? 1 : 0;
  const int a2 = (axis == 2) ? 1 : 2;
  const int m1 = shape[a1], m2 = shape[a2];
  const size_t in_s1 = stride_of(shape, a1), in_s2 = stride_of(shape, a2);
  const size_t out_s1 = stride_of(out_shape, a1), out_s2 = stride_of(out_shape, a2);

#pragma omp parallel for schedule(static)
  for (int i1 = 0; i1 < m1; ++i1) {
    for (int i2 = 0; i2 < m2; ++i2) {
      const float* src = in.data() + i1 * in_s1 + i2 * in_s2;
      float* dst = out.data() + i1 * out_s1 + i2 * out_s2;
      for (int i = 0; i < n_out; ++i) {
        const Tap& t = taps[i];
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) acc += t.w[k] * src[t.idx[k] * in_stride];
        dst[i * out_stride] = (float)acc;
      }
    }
  }
  return out;
}

// Nearest-neighbor pass for binary grids.
std::vector<uint8_t> resample_axis_nearest(const std::vector<uint8_t>& in, Shape3 shape, int axis,
                                           int n_out, double ratio) {
  Shape3 out_shape = shape;
  (axis == 0 ? out_shape.nx : axis == 1 ? out_shape.ny : out_shape.nz) = n_out;
  std::vector<uint8_t> out(out_shape.total());
  const int n_in = shape[axis];
  std::vector<int> src_idx(n_out);
  for (int i = 0; i < n_out; ++i)
    src_idx[i] = clamp_index((int)std::llround((i + 0.5) * ratio - 0.5), n_in);

  auto stride_of = [](const Shape3& s, int ax) -> size_t {
    if (ax == 0) return size_t(s.ny) * s.nz;
    if (ax == 1) return size_t(s.nz);
    return 1;
  };
  const size_t in_stride = stride_of(shape, axis);
  const size_t out_stride = stride_of(out_shape, axis);
  const int a1 = (axis == 0) ? 1 : 0;
  const int a2 = (axis == 2) ? 1 : 2;
  const int m1 = shape[a1], m2 = shape[a2];
  const size_t in_s1 = stride_of(shape, a1), in_s2 = stride_of(shape, a2);
  const size_t out_s1 = stride_of(out_shape, a1), out_s2 = stride_of(out_shape, a2);

  for (int i1 = 0; i1 < m1; ++i1)
    for (int i2 = 0; i2 < m2; ++i2) {
      const uint8_t* src = in.data() + i1 * in_s1 + i2 * in_s2;
      uint8_t* dst = out.data() + i1 * out_s1 + i2 * out_s2;
      for (int i = 0; i < n_out; ++i) dst[i * out_stride] = src[src_idx[i] * in_stride];
    }
  return out;
}

// Area-overlap weights for one axis of an area-averaging resize.
struct AreaTap {
  int first;
  std::vector<double> w;  // weights over [first, first + w.size())
};

std::vector<AreaTap> area_taps(int n_in, int n_out) {
  const double r = double(n_in) / double(n_out);
  std::vector<AreaTap> taps(n_out);
  for (int i = 0; i < n_out; ++i) {
    double lo = i * r, hi = (i + 1) * r;
    int j0 = (int)std::floor(lo);
    int j1 = std::min(n_in - 1, (int)std::ceil(hi) - 1);
    taps[i].first = j0;
    taps[i].w.resize(j1 - j0 + 1);
    double wsum = 0.0;
    for (int j = j0; j <= j1; ++j) {
      double overlap = std::min(hi, double(j + 1)) - std::max(lo, double(j));
      taps[i].w[j - j0] = std::max(0.0, overlap);
      wsum += taps[i].w[j - j0];
    }
    for (double& w : taps[i].w) w /= wsum;
  }
  return taps;
}

std::vector<float> resize_axis_area(const std::vector<float>& in, Shape3 shape, int axis,
                                    int n_out) {
  Shape3 out_shape = shape;
  (axis == 0 ? out_shape.nx : axis == 1 ? out_shape.ny : out_shape.nz) = n_out;
  std::vector<float> out(out_shape.total());
  auto taps = area_taps(shape[axis], n_out);

  auto stride_of = [](const Shape3& s, int ax) -> size_t {
    if (ax == 0) return size_t(s.ny) * s.nz;
    if (ax == 1) return size_t(s.nz);
    return 1;
  };
  const size_t in_stride = stride_of(shape, axis);
  const size_t out_stride = stride_of(out_shape, axis);
  const int a1 = (axis == 0) ? 1 : 0;
  const int a2 = (axis == 2) ? 1 : 2;
  const int m1 = shape[a1], m2 = shape[a2];
  const size_t in_s1 = stride_of(shape, a1), in_s2 = stride_of(shape, a2);
  const size_t out_s1 = stride_of(out_shape, a1), out_s2 = stride_of(out_shape, a2);

#pragma omp parallel for schedule(static)
  for (int i1 = 0; i1 < m1; ++i1)
    for (int i2 = 0; i2 < m2; ++i2) {
      const float* src = in.data() + i1 * in_s1 + i2 * in_s2;
      float* dst = out.data() + i1 * out_s1 + i2 * out_s2;
      for (int i = 0; i < n_out; ++i) {
        const AreaTap& t = taps[i];
        double acc = 0.0;
        for (size_t k = 0; k < t.w.size(); ++k)
          acc += t.w[k] * src[(t.first + (int)k) * in_stride];
        dst[i * out_stride] = (float)acc;
      }
    }
  return out;
}

template <typename Binary>
Binary downsample_nearest(const Binary& b, const Shape3& target) {
  if (target.nx <= 0 || target.ny <= 0 || target.nz <= 0)
    throw std::invalid_argument("downsample target extent must be positive");
  if (target.nx > b.shape.nx || target.ny > b.shape.ny || target.nz > b.shape.nz)
    throw std::invalid_argument("downsample target exceeds source extent");
  Binary out;
  out.shape = b.shape;
  out.data = b.data;
  for (int axis = 0; axis < 3; ++axis) {
    int n_out = target[axis];
    if (n_out == out.shape[axis]) continue;
    double ratio = double(out.shape[axis]) / double(n_out);
    out.data = resample_axis_nearest(out.data, out.shape, axis, n_out, ratio);
    (axis == 0 ? out.shape.nx : axis == 1 ? out.shape.ny : out.shape.nz) = n_out;
  }
  return out;
}

template <typename Binary>
Binary crop_binary(const Binary& m, const Box3& b) {
  Binary out;
  out.shape = b.shape();
  out.data.resize(out.shape.total());
  for (int x = b.x0; x < b.x1; ++x)
    for (int y = b.y0; y < b.y1; ++y)
      for (int z = b.z0; z < b.z1; ++z)
        out.data[voxel_index(out.shape, x - b.x0, y - b.y0, z - b.z0)] =
            m.data[voxel_index(m.shape, x, y, z)];
  return out;
}

struct PadOffsets {
  int lx, ly, lz;
};

PadOffsets pad_offsets(const Shape3& from, const Shape3& to) {
  if (to.nx < from.nx || to.ny < from.ny || to.nz < from.nz)
    throw std::invalid_argument("pad target smaller than current shape");
  // even split, extra voxel on the high side
  return {(to.nx - from.nx) / 2, (to.ny - from.ny) / 2, (to.nz - from.nz) / 2};
}

template <typename Grid>
Grid pad_grid(const Grid& g, const Shape3& target) {
  PadOffsets off = pad_offsets(g.shape, target);
  Grid out;
  out.shape = target;
  out.data.assign(target.total(), 0);
  for (int x = 0; x < g.shape.nx; ++x)
    for (int y = 0; y < g.shape.ny; ++y) {
      auto* dst = &out.data[voxel_index(target, x + off.lx, y + off.ly, off.lz)];
      const auto* src = &g.data[voxel_index(g.shape, x, y, 0)];
      std::copy(src, src + g.shape.nz, dst);
    }
  return out;
}

}  // namespace

Volume resample_isotropic(const Volume& v, double target_mm) {
  if (!(target_mm > 0.0)) throw std::invalid_argument("target spacing must be positive");
  validate(v);
  Volume out;
  out.subject_id = v.subject_id;
  out.spacing = {target_mm, target_mm, target_mm};
  std::vector<float> data = v.data;
  Shape3 shape = v.shape;
  const double spacings[3] = {v.spacing.sx, v.spacing.sy, v.spacing.sz};
  for (int axis = 0; axis < 3; ++axis) {
    int n_out = output_extent(shape[axis], spacings[axis], target_mm);
    if (n_out == shape[axis] && spacings[axis] == target_mm) continue;
    data = resample_axis_cubic(data, shape, axis, n_out, target_mm / spacings[axis]);
    (axis == 0 ? shape.nx : axis == 1 ? shape.ny : shape.nz) = n_out;
  }
  out.shape = shape;
  out.data = std::move(data);
  return out;
}

BrainMask resample_isotropic(const BrainMask& m, Spacing3 spacing, double target_mm) {
  if (!(target_mm > 0.0)) throw std::invalid_argument("target spacing must be positive");
  BrainMask out = m;
  const double spacings[3] = {spacing.sx, spacing.sy, spacing.sz};
  for (int axis = 0; axis < 3; ++axis) {
    int n_out = output_extent(out.shape[axis], spacings[axis], target_mm);
    if (n_out == out.shape[axis] && spacings[axis] == target_mm) continue;
    out.data = resample_axis_nearest(out.data, out.shape, axis, n_out, target_mm / spacings[axis]);
    (axis == 0 ? out.shape.nx : axis == 1 ? out.shape.ny : out.shape.nz) = n_out;
  }
  return out;
}

LabelMap resample_isotropic(const LabelMap& l, Spacing3 spacing, double target_mm) {
  BrainMask tmp{l.shape, l.data};
  BrainMask res = resample_isotropic(tmp, spacing, target_mm);
  return LabelMap{res.shape, std::move(res.data)};
}

Box3 mask_bounding_box(const BrainMask& m) {
  Box3 b{m.shape.nx, m.shape.ny, m.shape.nz, 0, 0, 0};
  bool any = false;
  for (int x = 0; x < m.shape.nx; ++x)
    for (int y = 0; y < m.shape.ny; ++y)
      for (int z = 0; z < m.shape.nz; ++z)
        if (m.at(x, y, z)) {
          any = true;
          b.x0 = std::min(b.x0, x);
          b.y0 = std::min(b.y0, y);
          b.z0 = std::min(b.z0, z);
          b.x1 = std::max(b.x1, x + 1);
          b.y1 = std::max(b.y1, y + 1);
          b.z1 = std::max(b.z1, z + 1);
        }
  if (!any) throw EmptyMaskError("cannot bound an empty mask");
  return b;
}

Box3 expand_box(const Box3& b, int margin, const Shape3& bounds) {
  return Box3{std::max(0, b.x0 - margin), std::max(0, b.y0 - margin), std::max(0, b.z0 - margin),
              std::min(bounds.nx, b.x1 + margin), std::min(bounds.ny, b.y1 + margin),
              std::min(bounds.nz, b.z1 + margin)};
}

Volume crop(const Volume& v, const Box3& b) {
  Volume out;
  out.shape = b.shape();
  out.spacing = v.spacing;
  out.subject_id = v.subject_id;
  out.data.resize(out.shape.total());
  for (int x = b.x0; x < b.x1; ++x)
    for (int y = b.y0; y < b.y1; ++y) {
      const float* src = &v.data[voxel_index(v.shape, x, y, b.z0)];
      float* dst = &out.data[voxel_index(out.shape, x - b.x0, y - b.y0, 0)];
      std::copy(src, src + (b.z1 - b.z0), dst);
    }
  return out;
}

BrainMask crop(const BrainMask& m, const Box3& b) { return crop_binary(m, b); }
LabelMap crop(const LabelMap& l, const Box3& b) { return crop_binary(l, b); }

std::pair<Volume, BrainMask> crop_to_mask(const Volume& v, const BrainMask& m, int margin) {
  if (v.shape != m.shape) throw std::invalid_argument("volume and mask shapes differ");
  if (margin < 0) throw std::invalid_argument("margin must be nonnegative");
  Box3 box = expand_box(mask_bounding_box(m), margin, v.shape);
  return {crop(v, box), crop(m, box)};
}

Volume pad_to_shape(const Volume& v, const Shape3& target) {
  Volume out = pad_grid(v, target);
  out.spacing = v.spacing;
  out.subject_id = v.subject_id;
  return out;
}

BrainMask pad_to_shape(const BrainMask& m, const Shape3& target) { return pad_grid(m, target); }
LabelMap pad_to_shape(const LabelMap& l, const Shape3& target) { return pad_grid(l, target); }

Volume center_crop(const Volume& v, const Shape3& target) {
  PadOffsets off = pad_offsets(target, v.shape);
  Box3 b{off.lx, off.ly, off.lz, off.lx + target.nx, off.ly + target.ny, off.lz + target.nz};
  return crop(v, b);
}

Volume downsample(const Volume& v, const Shape3& target) {
  if (target.nx <= 0 || target.ny <= 0 || target.nz <= 0)
    throw std::invalid_argument("downsample target extent must be positive");
  if (target.nx > v.shape.nx || target.ny > v.shape.ny || target.nz > v.shape.nz)
    throw std::invalid_argument("downsample target exceeds source extent");
  Volume out;
  out.subject_id = v.subject_id;
  out.spacing = {v.spacing.sx * double(v.shape.nx) / target.nx,
                 v.spacing.sy * double(v.shape.ny) / target.ny,
                 v.spacing.sz * double(v.shape.nz) / target.nz};
  std::vector<float> data = v.data;
  Shape3 shape = v.shape;
  for (int axis = 0; axis < 3; ++axis) {
    if (target[axis] == shape[axis]) continue;
    data = resize_axis_area(data, shape, axis, target[axis]);
    (axis == 0 ? shape.nx : axis == 1 ? shape.ny : shape.nz) = target[axis];
  }
  out.shape = shape;
  out.data = std::move(data);
  return out;
}

BrainMask downsample(const BrainMask& m, const Shape3& target) {
  return downsample_nearest(m, target);
}

LabelMap downsample(const LabelMap& l, const Shape3& target) { return downsample_nearest(l, target); }

double percentile(std::vector<float> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of empty sample");
  std::sort(values.begin(), values.end());
  double rank = q / 100.0 * double(values.size() - 1);
  size_t lo = (size_t)std::floor(rank);
  size_t hi = std::min(values.size() - 1, lo + 1);
  double frac = rank - double(lo);
  return double(values[lo]) + frac * (double(values[hi]) - double(values[lo]));
}

Volume normalize_intensity(const Volume& v, const BrainMask& m, double clip_percentile) {
  if (v.shape != m.shape) throw std::invalid_argument("volume and mask shapes differ");
  std::vector<float> inside;
  inside.reserve(v.data.size() / 2);
  for (size_t i = 0; i < v.data.size(); ++i)
    if (m.data[i]) inside.push_back(v.data[i]);
  if (inside.empty()) throw EmptyMaskError("cannot normalize with an empty mask");

  double lo = *std::min_element(inside.begin(), inside.end());
  double hi = percentile(inside, clip_percentile);
  if (!(hi - lo > 1e-12)) throw DegenerateRangeError("in-mask intensity range is degenerate");

  Volume out = v;
  const double scale = 1.0 / (hi - lo);
  for (size_t i = 0; i < out.data.size(); ++i) {
    if (!m.data[i]) {
      out.data[i] = 0.0f;
    } else {
      double t = (double(out.data[i]) - lo) * scale;
      out.data[i] = (float)std::clamp(t, 0.0, 1.0);
    }
  }
  return out;
}

BrainMask erode_mask(const BrainMask& m, int radius) {
  if (radius < 0) throw std::invalid_argument("erosion radius must be nonnegative");
  if (radius == 0) return m;
  struct Offset {
    int dx, dy, dz;
  };
  std::vector<Offset> ball;
  for (int dx = -radius; dx <= radius; ++dx)
    for (int dy = -radius; dy <= radius; ++dy)
      for (int dz = -radius; dz <= radius; ++dz)
        if (dx * dx + dy * dy + dz * dz <= radius * radius) ball.push_back({dx, dy, dz});

  BrainMask out = make_mask(m.shape, 0);
#pragma omp parallel for schedule(static)
  for (int x = 0; x < m.shape.nx; ++x)
    for (int y = 0; y < m.shape.ny; ++y)
      for (int z = 0; z < m.shape.nz; ++z) {
        if (!m.at(x, y, z)) continue;
        bool keep = true;
        for (const Offset& o : ball) {
          int px = x + o.dx, py = y + o.dy, pz = z + o.dz;
          if (px < 0 || py < 0 || pz < 0 || px >= m.shape.nx || py >= m.shape.ny ||
              pz >= m.shape.nz || !m.at(px, py, pz)) {
            keep = false;
            break;
          }
        }
        out.at(x, y, z) = keep ? 1 : 0;
      }
  return out;
}

Volume median_filter(const Volume& v, int kernel) {
  if (kernel < 1 || kernel % 2 == 0) throw std::invalid_argument("median kernel must be odd");
  if (kernel == 1) return v;
  const int h = kernel / 2;
  Volume out = v;
#pragma omp parallel
  {
    std::vector<float> window;
    window.reserve(size_t(kernel) * kernel * kernel);
#pragma omp for schedule(static)
    for (int x = 0; x < v.shape.nx; ++x)
      for (int y = 0; y < v.shape.ny; ++y)
        for (int z = 0; z < v.shape.nz; ++z) {
          window.clear();
          for (int dx = -h; dx <= h; ++dx)
            for (int dy = -h; dy <= h; ++dy)
              for (int dz = -h; dz <= h; ++dz)
                window.push_back(v.at(reflect_index(x + dx, v.shape.nx),
                                      reflect_index(y + dy, v.shape.ny),
                                      reflect_index(z + dz, v.shape.nz)));
          auto mid = window.begin() + window.size() / 2;
          std::nth_element(window.begin(), mid, window.end());
          out.at(x, y, z) = *mid;
        }
  }
  return out;
}

Volume mirror_x(const Volume& v) {
  Volume out = v;
  for (int x = 0; x < v.shape.nx; ++x)
    for (int y = 0; y < v.shape.ny; ++y) {
      const float* src = &v.data[voxel_index(v.shape, v.shape.nx - 1 - x, y, 0)];
      float* dst = &out.data[voxel_index(v.shape, x, y, 0)];
      std::copy(src, src + v.shape.nz, dst);
    }
  return out;
}

}  // namespace voxuad
