#include "voxuad/erasing.hpp"

#include <algorithm>
#include <cmath>

namespace voxuad {

std::string to_string(EraseStrategy s) {
  switch (s) {
    case EraseStrategy::none: return "none";
    case EraseStrategy::patch: return "patch";
    case EraseStrategy::multi_patch: return "multi-patch";
    case EraseStrategy::half_slice: return "half-slice";
    case EraseStrategy::cube: return "cube";
    case EraseStrategy::multi_cube: return "multi-cube";
    case EraseStrategy::half_volume: return "half-volume";
  }
  return "none";
}

EraseStrategy erase_strategy_from_string(const std::string& s) {
  if (s == "none") return EraseStrategy::none;
  if (s == "patch") return EraseStrategy::patch;
  if (s == "multi-patch" || s == "multi_patch") return EraseStrategy::multi_patch;
  if (s == "half-slice" || s == "half_slice") return EraseStrategy::half_slice;
  if (s == "cube") return EraseStrategy::cube;
  if (s == "multi-cube" || s == "multi_cube") return EraseStrategy::multi_cube;
  if (s == "half-volume" || s == "half_volume") return EraseStrategy::half_volume;
  throw std::invalid_argument("unknown erasing strategy: " + s);
}

std::string to_string(EraseFill f) { return f == EraseFill::zero ? "zero" : "noise"; }

EraseFill erase_fill_from_string(const std::string& s) {
  if (s == "zero" || s == "0") return EraseFill::zero;
  if (s == "noise" || s == "n") return EraseFill::noise;
  throw std::invalid_argument("unknown erasing fill: " + s);
}

int strategy_dims(EraseStrategy s) {
  switch (s) {
    case EraseStrategy::patch:
    case EraseStrategy::multi_patch:
    case EraseStrategy::half_slice: return 2;
    case EraseStrategy::cube:
    case EraseStrategy::multi_cube:
    case EraseStrategy::half_volume: return 3;
    default: return 0;
  }
}

void ErasingSpec::validate() const {
  if (!(probability >= 0.0 && probability <= 1.0))
    throw std::invalid_argument("erasing probability must lie in [0, 1]");
  if (!(0.0 <= min_frac && min_frac <= max_frac && max_frac <= 1.0))
    throw std::invalid_argument("erasing size budget must satisfy 0 <= min <= max <= 1");
  if (max_regions < 1) throw std::invalid_argument("max_regions must be >= 1");
  if (!(1 <= slice_run_min && slice_run_min <= slice_run_max))
    throw std::invalid_argument("slice run bounds must satisfy 1 <= min <= max");
}

namespace {

EraseRegion clip_region(const EraseRegion& r, const Shape3& s) {
  return EraseRegion{std::max(0, r.x0), std::min(s.nx, r.x1), std::max(0, r.y0),
                     std::min(s.ny, r.y1), std::max(0, r.z0), std::min(s.nz, r.z1)};
}

// One axis-aligned box with a random in-image center and random aspect
// ratios realizing approximately target_voxels before boundary clipping.
EraseRegion sample_box(const Shape3& s, double target_voxels, int dims, RngStream& rng) {
  double side = dims == 3 ? std::cbrt(target_voxels) : std::sqrt(target_voxels);
  double f[3] = {1.0, 1.0, 1.0};
  const double log_aspect = std::log(2.0);
  for (int a = 0; a < dims; ++a) f[a] = std::exp(rng.uniform(-log_aspect, log_aspect));
  double gm = dims == 3 ? std::cbrt(f[0] * f[1] * f[2]) : std::sqrt(f[0] * f[1]);
  for (int a = 0; a < dims; ++a) f[a] /= gm;

  int ext[3];
  for (int a = 0; a < 3; ++a) {
    if (a < dims) {
      ext[a] = std::clamp((int)std::lround(side * f[a]), 1, s[a]);
    } else {
      ext[a] = 1;
    }
  }
  int cx = (int)rng.uniform_int(0, s.nx - 1);
  int cy = (int)rng.uniform_int(0, s.ny - 1);
  int cz = dims == 3 ? (int)rng.uniform_int(0, s.nz - 1) : 0;
  EraseRegion r{cx - ext[0] / 2, cx - ext[0] / 2 + ext[0], cy - ext[1] / 2,
                cy - ext[1] / 2 + ext[1], cz - ext[2] / 2, cz - ext[2] / 2 + ext[2]};
  return clip_region(r, s);
}

// Centered box realizing a fraction inside the budget; cannot be clipped.
// Used as the fallback when rejection sampling exhausts its attempts.
std::vector<EraseRegion> centered_fallback(const Shape3& s, double min_frac, double max_frac,
                                           int dims) {
  const double target = 0.5 * (min_frac + max_frac) * double(s.total());
  double side = dims == 3 ? std::cbrt(target) : std::sqrt(target);
  int ext[3] = {1, 1, 1};
  for (int a = 0; a < dims; ++a) ext[a] = std::clamp((int)std::ceil(side), 1, s[a]);
  EraseRegion r{(s.nx - ext[0]) / 2, (s.nx - ext[0]) / 2 + ext[0],
                (s.ny - ext[1]) / 2, (s.ny - ext[1]) / 2 + ext[1],
                (s.nz - ext[2]) / 2, (s.nz - ext[2]) / 2 + ext[2]};
  return {r};
}

size_t paint(std::vector<uint8_t>& mask, const Shape3& s, const std::vector<EraseRegion>& regions) {
  size_t painted = 0;
  for (const auto& r : regions)
    for (int x = r.x0; x < r.x1; ++x)
      for (int y = r.y0; y < r.y1; ++y)
        for (int z = r.z0; z < r.z1; ++z) {
          uint8_t& m = mask[voxel_index(s, x, y, z)];
          painted += (m == 0);
          m = 1;
        }
  return painted;
}

// Draws region sets until the realized (clipped, union) fraction falls inside
// [min_frac, max_frac]; keeps the closest draw as a backstop and falls back
// to a centered box if every attempt misses.
std::vector<EraseRegion> sample_regions(const Shape3& s, const ErasingSpec& spec, int dims,
                                        bool multi, RngStream& rng) {
  constexpr int kMaxAttempts = 100;
  const double total = double(s.total());
  std::vector<EraseRegion> best;
  double best_dist = std::numeric_limits<double>::infinity();
  std::vector<uint8_t> scratch(s.total());

  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    double frac = rng.uniform(spec.min_frac, spec.max_frac);
    int count = multi ? (int)rng.uniform_int(1, spec.max_regions) : 1;

    std::vector<double> weights(count);
    double wsum = 0.0;
    for (double& w : weights) {
      w = rng.uniform(0.05, 1.0);
      wsum += w;
    }

    std::vector<EraseRegion> regions;
    regions.reserve(count);
    for (int i = 0; i < count; ++i)
      regions.push_back(sample_box(s, frac * total * weights[i] / wsum, dims, rng));

    std::fill(scratch.begin(), scratch.end(), 0);
    double realized = double(paint(scratch, s, regions)) / total;
    if (realized >= spec.min_frac && realized <= spec.max_frac) return regions;
    double dist = realized < spec.min_frac ? spec.min_frac - realized : realized - spec.max_frac;
    if (dist < best_dist) {
      best_dist = dist;
      best = std::move(regions);
    }
  }
  // verify the backstop; otherwise use the deterministic centered box
  std::fill(scratch.begin(), scratch.end(), 0);
  double realized = best.empty() ? 0.0 : double(paint(scratch, s, best)) / total;
  if (realized >= spec.min_frac && realized <= spec.max_frac) return best;
  return centered_fallback(s, spec.min_frac, spec.max_frac, dims);
}

std::vector<EraseRegion> sample_half(const Shape3& s, const ErasingSpec& spec, int dims,
                                     RngStream& rng) {
  const int mid = s.nx / 2;
  bool left = rng.coin();
  int x0 = left ? 0 : mid;
  int x1 = left ? mid : s.nx;
  if (dims == 2) return {EraseRegion{x0, x1, 0, s.ny, 0, 1}};
  int run = (int)rng.uniform_int(spec.slice_run_min, std::min(spec.slice_run_max, s.nz));
  int z0 = (int)rng.uniform_int(0, s.nz - run);
  return {EraseRegion{x0, x1, 0, s.ny, z0, z0 + run}};
}

}  // namespace

std::vector<float> sample_noise_fill(const Volume& x, size_t n, RngStream& rng) {
  std::vector<float> out(n);
  if (x.data.empty() && n > 0) throw std::invalid_argument("cannot sample from an empty image");
  for (size_t i = 0; i < n; ++i)
    out[i] = x.data[(size_t)rng.uniform_int(0, (int64_t)x.data.size() - 1)];
  return out;
}

ErasedSample apply_erasing(const Volume& x, const ErasingSpec& spec, RngStream& rng) {
  spec.validate();
  ErasedSample sample;
  sample.target = x;
  sample.input = x;
  sample.erase_mask.assign(x.shape.total(), 0);

  if (spec.strategy == EraseStrategy::none) return sample;

  const int dims = strategy_dims(spec.strategy);
  const bool is_2d_input = x.shape.nz == 1;
  if ((dims == 2) != is_2d_input)
    throw std::invalid_argument("erasing strategy '" + to_string(spec.strategy) +
                                "' does not match input dimensionality");

  if (rng.uniform() >= spec.probability) return sample;  // pass through unmodified

  switch (spec.strategy) {
    case EraseStrategy::patch:
    case EraseStrategy::cube:
      sample.regions = sample_regions(x.shape, spec, dims, /*multi=*/false, rng);
      break;
    case EraseStrategy::multi_patch:
    case EraseStrategy::multi_cube:
      sample.regions = sample_regions(x.shape, spec, dims, /*multi=*/true, rng);
      break;
    case EraseStrategy::half_slice:
    case EraseStrategy::half_volume:
      sample.regions = sample_half(x.shape, spec, dims, rng);
      break;
    default: break;
  }

  paint(sample.erase_mask, x.shape, sample.regions);
  if (spec.fill == EraseFill::zero) {
    for (size_t i = 0; i < sample.erase_mask.size(); ++i)
      if (sample.erase_mask[i]) sample.input.data[i] = 0.0f;
  } else {
    // draws come from the original image's distribution, not the partially
    // overwritten one
    for (size_t i = 0; i < sample.erase_mask.size(); ++i)
      if (sample.erase_mask[i])
        sample.input.data[i] = x.data[(size_t)rng.uniform_int(0, (int64_t)x.data.size() - 1)];
  }
  return sample;
}

}  // namespace voxuad
