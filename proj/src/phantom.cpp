#include "voxuad/phantom.hpp"

#include <algorithm>
#include <cmath>

#include "voxuad/rng.hpp"

namespace voxuad {

namespace {

struct ShellTerm {
  double amplitude;  // coefficient of cos(pi * l * rho)
};

struct TextureTerm {
  double fx, fy, fz;    // cycles per extent (low frequencies)
  double phase_y, phase_z;
};

// All random choices of the construction, resolved once from the seed.
struct PhantomGeometry {
  double cx, cy, cz;      // center; cx is the exact lateral midpoint
  double ax, ay, az;      // ellipsoid semi-axes in voxels
  double base_level;
  std::vector<ShellTerm> shells;
  std::vector<TextureTerm> texture;
  double texture_amplitude;
};

PhantomGeometry derive_geometry(const PhantomSpec& spec) {
  RngStream rng(stream_key(spec.seed, "phantom"));
  PhantomGeometry g;
  const double sx = spec.shape.nx / 64.0, sy = spec.shape.ny / 64.0, sz = spec.shape.nz / 64.0;
  // lateral center stays on the exact mid-plane so phantoms are left-right
  // symmetric; the other axes jitter
  g.cx = (spec.shape.nx - 1) / 2.0;
  g.cy = (spec.shape.ny - 1) / 2.0 + rng.uniform(-2.0, 2.0) * sy;
  g.cz = (spec.shape.nz - 1) / 2.0 + rng.uniform(-2.0, 2.0) * sz;
  g.ax = rng.uniform(19.0, 24.0) * sx;
  g.ay = rng.uniform(23.0, 28.0) * sy;
  g.az = rng.uniform(21.0, 26.0) * sz;
  g.base_level = rng.uniform(0.45, 0.55);

  int layers = std::max(1, spec.tissue_layers);
  g.shells.resize(layers);
  double budget = 0.22;
  for (int l = 0; l < layers; ++l)
    g.shells[l].amplitude = rng.uniform(-1.0, 1.0) * budget / double(layers);

  g.texture.resize(4);
  for (auto& t : g.texture) {
    t.fx = (double)rng.uniform_int(1, 3);
    t.fy = (double)rng.uniform_int(1, 3);
    t.fz = (double)rng.uniform_int(1, 3);
    t.phase_y = rng.uniform(0.0, 2.0 * M_PI);
    t.phase_z = rng.uniform(0.0, 2.0 * M_PI);
  }
  g.texture_amplitude = spec.texture_amplitude / double(g.texture.size());
  return g;
}

struct Ball {
  std::vector<size_t> indices;
  std::vector<double> falloff;  // in [0.5, 1]
};

Ball lesion_ball(const Shape3& shape, const LesionSpec& l) {
  Ball ball;
  if (l.radius <= 0.0) return ball;
  const double r2 = l.radius * l.radius;
  int x0 = std::max(0, (int)std::floor(l.center[0] - l.radius));
  int x1 = std::min(shape.nx - 1, (int)std::ceil(l.center[0] + l.radius));
  int y0 = std::max(0, (int)std::floor(l.center[1] - l.radius));
  int y1 = std::min(shape.ny - 1, (int)std::ceil(l.center[1] + l.radius));
  int z0 = std::max(0, (int)std::floor(l.center[2] - l.radius));
  int z1 = std::min(shape.nz - 1, (int)std::ceil(l.center[2] + l.radius));
  for (int x = x0; x <= x1; ++x)
    for (int y = y0; y <= y1; ++y)
      for (int z = z0; z <= z1; ++z) {
        double dx = std::fabs(double(x) - l.center[0]);
        double dy = double(y) - l.center[1];
        double dz = double(z) - l.center[2];
        double d2 = dx * dx + dy * dy + dz * dz;
        if (d2 <= r2) {
          ball.indices.push_back(voxel_index(shape, x, y, z));
          ball.falloff.push_back(1.0 - 0.5 * d2 / r2);
        }
      }
  return ball;
}

}  // namespace

PhantomSpec mirror_spec(const PhantomSpec& spec) {
  PhantomSpec out = spec;
  if (out.lesion) out.lesion->center[0] = double(spec.shape.nx - 1) - out.lesion->center[0];
  return out;
}

SubjectRecord generate_healthy(const PhantomSpec& spec) {
  if (spec.shape.nx < 8 || spec.shape.ny < 8 || spec.shape.nz < 8)
    throw std::invalid_argument("phantom shape too small");
  PhantomGeometry g = derive_geometry(spec);

  SubjectRecord rec;
  rec.volume = make_volume(spec.shape, 0.0f, {1.0, 1.0, 1.0});
  rec.mask = make_mask(spec.shape, 0);

  const Shape3& s = spec.shape;
  for (int x = 0; x < s.nx; ++x) {
    // all x-dependence goes through |x - cx| so mirroring is exact
    const double ux = std::fabs(double(x) - g.cx);
    for (int y = 0; y < s.ny; ++y) {
      const double dy = double(y) - g.cy;
      for (int z = 0; z < s.nz; ++z) {
        const double dz = double(z) - g.cz;
        double rho = std::sqrt((ux * ux) / (g.ax * g.ax) + (dy * dy) / (g.ay * g.ay) +
                               (dz * dz) / (g.az * g.az));
        if (rho > 1.0) continue;
        double value = g.base_level;
        for (size_t l = 0; l < g.shells.size(); ++l)
          value += g.shells[l].amplitude * std::cos(M_PI * double(l + 1) * rho);
        for (const TextureTerm& t : g.texture)
          value += g.texture_amplitude * std::cos(2.0 * M_PI * t.fx * ux / s.nx) *
                   std::sin(2.0 * M_PI * t.fy * dy / s.ny + t.phase_y) *
                   std::sin(2.0 * M_PI * t.fz * dz / s.nz + t.phase_z);
        rec.volume.at(x, y, z) = (float)std::clamp(value, 0.0, 1.0);
        rec.mask.at(x, y, z) = 1;
      }
    }
  }
  return rec;
}

size_t lesion_voxel_count(const Shape3& shape, const LesionSpec& lesion) {
  return lesion_ball(shape, lesion).indices.size();
}

SubjectRecord inject_lesion(const SubjectRecord& record, const LesionSpec& lesion) {
  validate(record);
  SubjectRecord out = record;
  out.labels = make_labels(record.volume.shape, 0);
  Ball ball = lesion_ball(record.volume.shape, lesion);
  if (ball.indices.empty()) return out;  // radius 0: labels empty, volume unchanged

  for (size_t i : ball.indices)
    if (!record.mask.data[i])
      throw std::invalid_argument("lesion exits the brain mask");

  for (size_t k = 0; k < ball.indices.size(); ++k) {
    size_t i = ball.indices[k];
    double delta = lesion.sign * lesion.intensity_offset * ball.falloff[k];
    double v = double(out.volume.data[i]) + delta;
    if (v < 0.0 || v > 1.0)
      throw std::invalid_argument("lesion intensity offset leaves the [0, 1] range");
    out.volume.data[i] = (float)v;
    out.labels->data[i] = 1;
  }
  return out;
}

std::vector<SubjectRecord> generate_dataset(int n_healthy, int n_lesioned,
                                            const PhantomRanges& ranges, uint64_t seed) {
  if (n_healthy < 0 || n_lesioned < 0) throw std::invalid_argument("counts must be nonnegative");
  std::vector<SubjectRecord> records;
  records.reserve(n_healthy + n_lesioned);

  auto draw_spec = [&](RngStream& rng, uint64_t record_seed) {
    PhantomSpec spec;
    spec.shape = ranges.shape;
    spec.tissue_layers = (int)rng.uniform_int(ranges.tissue_layers_min, ranges.tissue_layers_max);
    spec.texture_amplitude =
        rng.uniform(ranges.texture_amplitude_min, ranges.texture_amplitude_max);
    spec.seed = record_seed;
    return spec;
  };

  char idbuf[16];
  for (int i = 0; i < n_healthy; ++i) {
    RngStream rng(stream_key(seed, "dataset-healthy", (uint64_t)i));
    PhantomSpec spec = draw_spec(rng, stream_key(seed, "record", (uint64_t)i));
    SubjectRecord rec = generate_healthy(spec);
    std::snprintf(idbuf, sizeof(idbuf), "h%04d", i);
    rec.volume.subject_id = idbuf;
    rec.labels = make_labels(spec.shape, 0);  // explicitly healthy
    records.push_back(std::move(rec));
  }

  for (int i = 0; i < n_lesioned; ++i) {
    RngStream rng(stream_key(seed, "dataset-lesioned", (uint64_t)i));
    PhantomSpec spec = draw_spec(rng, stream_key(seed, "record-lesioned", (uint64_t)i));
    SubjectRecord healthy = generate_healthy(spec);
    std::snprintf(idbuf, sizeof(idbuf), "l%04d", i);
    healthy.volume.subject_id = idbuf;

    // rejection loop: find a ball inside the mask with intensity headroom for
    // the requested offset in at least one direction
    SubjectRecord lesioned;
    bool placed = false;
    for (int attempt = 0; attempt < 64 && !placed; ++attempt) {
      LesionSpec l;
      l.radius = rng.uniform(ranges.lesion_radius_min, ranges.lesion_radius_max);
      l.intensity_offset = rng.uniform(ranges.lesion_offset_min, ranges.lesion_offset_max);
      l.center = {rng.uniform(0.25, 0.75) * (spec.shape.nx - 1),
                  rng.uniform(0.3, 0.7) * (spec.shape.ny - 1),
                  rng.uniform(0.3, 0.7) * (spec.shape.nz - 1)};
      Ball ball = lesion_ball(spec.shape, l);
      if (ball.indices.empty()) continue;
      bool inside = true;
      float lo = 1.0f, hi = 0.0f;
      for (size_t idx : ball.indices) {
        if (!healthy.mask.data[idx]) {
          inside = false;
          break;
        }
        lo = std::min(lo, healthy.volume.data[idx]);
        hi = std::max(hi, healthy.volume.data[idx]);
      }
      if (!inside) continue;
      bool up_ok = hi + l.intensity_offset <= 0.995f;
      bool dn_ok = lo - l.intensity_offset >= 0.005f;
      if (!up_ok && !dn_ok) continue;
      if (up_ok && dn_ok)
        l.sign = rng.coin() ? +1 : -1;
      else
        l.sign = up_ok ? +1 : -1;
      lesioned = inject_lesion(healthy, l);
      placed = true;
    }
    if (!placed) throw std::runtime_error("could not place a lesion within the ranges");
    records.push_back(std::move(lesioned));
  }
  return records;
}

}  // namespace voxuad
