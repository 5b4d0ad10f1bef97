#include "doctest.h"
#include "testutil.hpp"
#include "voxuad/grid_ops.hpp"

using namespace voxuad;

namespace {

// independent bounding-box oracle: exhaustive scan with explicit min/max
Box3 bbox_oracle(const BrainMask& m) {
  int x0 = 1 << 30, y0 = 1 << 30, z0 = 1 << 30, x1 = -1, y1 = -1, z1 = -1;
  for (int x = 0; x < m.shape.nx; ++x)
    for (int y = 0; y < m.shape.ny; ++y)
      for (int z = 0; z < m.shape.nz; ++z)
        if (m.at(x, y, z)) {
          if (x < x0) x0 = x;
          if (y < y0) y0 = y;
          if (z < z0) z0 = z;
          if (x > x1) x1 = x;
          if (y > y1) y1 = y;
          if (z > z1) z1 = z;
        }
  return Box3{x0, y0, z0, x1 + 1, y1 + 1, z1 + 1};
}

// independent set-theoretic erosion: keep p iff every ball offset stays inside
BrainMask erosion_oracle(const BrainMask& m, int radius) {
  BrainMask out = make_mask(m.shape, 0);
  for (int x = 0; x < m.shape.nx; ++x)
    for (int y = 0; y < m.shape.ny; ++y)
      for (int z = 0; z < m.shape.nz; ++z) {
        bool keep = m.at(x, y, z) != 0;
        for (int dx = -radius; dx <= radius && keep; ++dx)
          for (int dy = -radius; dy <= radius && keep; ++dy)
            for (int dz = -radius; dz <= radius && keep; ++dz) {
              if (dx * dx + dy * dy + dz * dz > radius * radius) continue;
              int px = x + dx, py = y + dy, pz = z + dz;
              if (px < 0 || py < 0 || pz < 0 || px >= m.shape.nx || py >= m.shape.ny ||
                  pz >= m.shape.nz || !m.at(px, py, pz))
                keep = false;
            }
        out.at(x, y, z) = keep ? 1 : 0;
      }
  return out;
}

double volume_sum(const Volume& v) {
  double s = 0;
  for (float x : v.data) s += x;
  return s;
}

}  // namespace

TEST_CASE("resample_isotropic: identity at matching spacing") {
  Volume v = test::random_volume({10, 10, 10}, 1);
  v.spacing = {1, 1, 1};
  Volume out = resample_isotropic(v, 1.0);
  CHECK(out.shape == v.shape);
  CHECK(out.data == v.data);
}

TEST_CASE("resample_isotropic: physical-extent shape arithmetic and ramp oracle") {
  // spacing (1,1,2), shape (10,10,10) -> (10,10,20) at 1mm
  Volume v = make_volume({10, 10, 10});
  v.spacing = {1, 1, 2};
  // intensity is an affine function of physical z; cubic interpolation must
  // reproduce it exactly away from the clamped border
  for (int x = 0; x < 10; ++x)
    for (int y = 0; y < 10; ++y)
      for (int z = 0; z < 10; ++z) v.at(x, y, z) = float(0.25 + 0.05 * ((z + 0.5) * 2.0));
  Volume out = resample_isotropic(v, 1.0);
  CHECK(out.shape == Shape3{10, 10, 20});
  CHECK(out.spacing == Spacing3{1, 1, 1});
  // interior only: the kernel reaches 2 input voxels, so outputs mapping
  // within that distance of the edge see the clamped border
  for (int z = 3; z <= 16; ++z) {
    double expected = 0.25 + 0.05 * ((z + 0.5) * 1.0);
    CHECK(out.at(5, 5, z) == doctest::Approx(expected).epsilon(1e-5));
  }
}

TEST_CASE("resample_isotropic: exact on constants for any target") {
  Volume v = make_volume({8, 9, 10}, 0.37f);
  v.spacing = {1.3, 0.9, 1.7};
  Volume out = resample_isotropic(v, 1.0);
  for (float x : out.data) CHECK(x == doctest::Approx(0.37f).epsilon(1e-6));
  // extent preserved within one voxel per axis
  CHECK(std::abs(out.shape.nx * 1.0 - 8 * 1.3) <= 1.0);
  CHECK(std::abs(out.shape.ny * 1.0 - 9 * 0.9) <= 1.0);
  CHECK(std::abs(out.shape.nz * 1.0 - 10 * 1.7) <= 1.0);
}

TEST_CASE("resample_isotropic: rejects non-positive target") {
  Volume v = test::random_volume({4, 4, 4}, 2);
  CHECK_THROWS_AS(resample_isotropic(v, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(resample_isotropic(v, -1.0), std::invalid_argument);
}

TEST_CASE("resample nearest keeps masks binary") {
  BrainMask m = test::random_mask({9, 9, 9}, 3);
  BrainMask out = resample_isotropic(m, {1.5, 1.5, 1.5}, 1.0);
  CHECK(out.shape == Shape3{14, 14, 14});
  CHECK(strictly_binary(out.data));
}

TEST_CASE("crop_to_mask: full-foreground mask with margin 0 is the identity") {
  Volume v = test::random_volume({6, 7, 8}, 4);
  BrainMask m = test::solid_mask(v.shape);
  auto [cv, cm] = crop_to_mask(v, m, 0);
  CHECK(cv.shape == v.shape);
  CHECK(cv.data == v.data);
  CHECK(cm.data == m.data);
}

TEST_CASE("crop_to_mask: single voxel gives a 1x1x1 crop") {
  Volume v = test::random_volume({10, 10, 10}, 5);
  BrainMask m = make_mask(v.shape, 0);
  m.at(5, 5, 5) = 1;
  auto [cv, cm] = crop_to_mask(v, m, 0);
  CHECK(cv.shape == Shape3{1, 1, 1});
  CHECK(cv.at(0, 0, 0) == v.at(5, 5, 5));
  CHECK(cm.at(0, 0, 0) == 1);
}

TEST_CASE("crop_to_mask: matches the exhaustive bounding-box oracle") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    BrainMask m = test::random_mask({12, 11, 10}, 100 + seed, 0.1);
    if (count_foreground(m.data) == 0) continue;
    Volume v = test::random_volume(m.shape, 200 + seed);
    Box3 expected = bbox_oracle(m);
    auto [cv, cm] = crop_to_mask(v, m, 0);
    CHECK(cv.shape == expected.shape());
    // all foreground voxels retained
    CHECK(count_foreground(cm.data) == count_foreground(m.data));
  }
}

TEST_CASE("crop_to_mask: empty mask raises the dedicated error") {
  Volume v = test::random_volume({4, 4, 4}, 6);
  BrainMask m = make_mask(v.shape, 0);
  CHECK_THROWS_AS(crop_to_mask(v, m, 0), EmptyMaskError);
}

TEST_CASE("pad_to_shape: equal target is the identity, 2->4 adds one layer per side") {
  Volume v = test::random_volume({2, 2, 2}, 7);
  CHECK(pad_to_shape(v, {2, 2, 2}).data == v.data);

  Volume p = pad_to_shape(v, {4, 4, 4});
  CHECK(p.shape == Shape3{4, 4, 4});
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int z = 0; z < 2; ++z) CHECK(p.at(x + 1, y + 1, z + 1) == v.at(x, y, z));
  CHECK(p.at(0, 0, 0) == 0.0f);
  CHECK(p.at(3, 3, 3) == 0.0f);
  CHECK(volume_sum(p) == doctest::Approx(volume_sum(v)));
}

TEST_CASE("pad_to_shape: odd split puts the extra voxel on the high side") {
  Volume v = test::random_volume({3, 3, 3}, 8);
  Volume p = pad_to_shape(v, {4, 4, 4});
  CHECK(p.at(0, 0, 0) == v.at(0, 0, 0));  // low side gets no padding
  CHECK(p.at(3, 3, 3) == 0.0f);
}

TEST_CASE("pad_to_shape rejects shrinking targets") {
  Volume v = test::random_volume({4, 4, 4}, 9);
  CHECK_THROWS_AS(pad_to_shape(v, {3, 4, 4}), std::invalid_argument);
}

TEST_CASE("property: pad then center-crop is the identity") {
  for (uint64_t seed = 0; seed < 8; ++seed) {
    Shape3 shape{3 + int(seed % 4), 4 + int(seed % 3), 5 + int(seed % 2)};
    Volume v = test::random_volume(shape, 300 + seed);
    Volume p = pad_to_shape(v, {11, 12, 13});
    Volume back = center_crop(p, shape);
    CHECK(back.data == v.data);
  }
}

TEST_CASE("downsample: constant volume stays constant at the target shape") {
  Volume v = make_volume({191, 158, 163}, 0.42f);
  Volume out = downsample(v, {64, 64, 64});
  CHECK(out.shape == Shape3{64, 64, 64});
  for (float x : out.data) CHECK(x == doctest::Approx(0.42f).epsilon(1e-6));
}

TEST_CASE("downsample: mean preserved on a smooth phantom") {
  Volume v = make_volume({48, 40, 44});
  for (int x = 0; x < 48; ++x)
    for (int y = 0; y < 40; ++y)
      for (int z = 0; z < 44; ++z)
        v.at(x, y, z) = float(0.5 + 0.3 * std::sin(2 * M_PI * x / 48.0) *
                                        std::cos(2 * M_PI * y / 40.0) *
                                        std::sin(2 * M_PI * z / 44.0 + 0.3));
  Volume out = downsample(v, {16, 16, 16});
  double mean_in = volume_sum(v) / v.data.size();
  double mean_out = volume_sum(out) / out.data.size();
  CHECK(mean_out == doctest::Approx(mean_in).epsilon(0.01));
}

TEST_CASE("downsample: output never leaves the input range") {
  Volume v = test::random_volume({20, 20, 20}, 10);
  Volume out = downsample(v, {7, 9, 11});
  for (float x : out.data) {
    CHECK(x >= 0.0f);
    CHECK(x <= 1.0f);
  }
}

TEST_CASE("downsample rejects zero or growing targets") {
  Volume v = test::random_volume({8, 8, 8}, 11);
  CHECK_THROWS_AS(downsample(v, {0, 8, 8}), std::invalid_argument);
  CHECK_THROWS_AS(downsample(v, {9, 8, 8}), std::invalid_argument);
}

TEST_CASE("normalize_intensity: endpoints, ramp, idempotence") {
  Volume v = make_volume({10, 10, 10});
  BrainMask m = test::solid_mask(v.shape);
  for (size_t i = 0; i < v.data.size(); ++i) v.data[i] = float(i) / float(v.data.size() - 1);
  Volume n = normalize_intensity(v, m, 100.0);  // no clipping: pure min-max
  double lo = 1e9, hi = -1e9;
  for (float x : n.data) {
    lo = std::min(lo, double(x));
    hi = std::max(hi, double(x));
  }
  CHECK(lo == doctest::Approx(0.0));
  CHECK(hi == doctest::Approx(1.0));
  // uniform ramp maps to a uniform ramp over [0, 1]
  for (size_t i = 0; i < n.data.size(); ++i)
    CHECK(n.data[i] == doctest::Approx(double(i) / double(n.data.size() - 1)).epsilon(1e-5));
  // idempotence up to clipping: values at the clip boundary may shift by the
  // tiny gap between the re-estimated percentile and 1
  Volume n2 = normalize_intensity(n, m, 98.0);
  Volume n3 = normalize_intensity(n2, m, 98.0);
  for (size_t i = 0; i < n2.data.size(); ++i)
    CHECK(std::fabs(n3.data[i] - n2.data[i]) <= 2e-3);
}

TEST_CASE("normalize_intensity: percentile clipping saturates the top tail") {
  Volume v = make_volume({10, 10, 10}, 0.2f);
  BrainMask m = test::solid_mask(v.shape);
  for (size_t i = 0; i < v.data.size(); ++i) v.data[i] = float(i % 100) / 99.0f;
  v.data[0] = 50.0f;  // an extreme outlier must not stretch the range
  Volume n = normalize_intensity(v, m, 98.0);
  CHECK(n.data[0] == 1.0f);
  for (float x : n.data) {
    CHECK(x >= 0.0f);
    CHECK(x <= 1.0f);
  }
  validate_normalized(n, m);
}

TEST_CASE("normalize_intensity: constant in-mask values raise the degenerate-range error") {
  Volume v = make_volume({4, 4, 4}, 0.7f);
  BrainMask m = test::solid_mask(v.shape);
  CHECK_THROWS_AS(normalize_intensity(v, m, 98.0), DegenerateRangeError);
}

TEST_CASE("erode_mask: radius 0 identity; solid 5^3 cube erodes to 3^3") {
  BrainMask m = make_mask({7, 7, 7}, 0);
  for (int x = 1; x <= 5; ++x)
    for (int y = 1; y <= 5; ++y)
      for (int z = 1; z <= 5; ++z) m.at(x, y, z) = 1;
  CHECK(erode_mask(m, 0).data == m.data);

  BrainMask e = erode_mask(m, 1);
  CHECK(count_foreground(e.data) == 27);
  for (int x = 2; x <= 4; ++x)
    for (int y = 2; y <= 4; ++y)
      for (int z = 2; z <= 4; ++z) CHECK(e.at(x, y, z) == 1);
  CHECK(e.data == erosion_oracle(m, 1).data);
}

TEST_CASE("erode_mask: anti-extensive and decreasing in radius on random masks") {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    BrainMask m = test::random_mask({10, 10, 10}, 400 + seed, 0.8);
    BrainMask e1 = erode_mask(m, 1);
    BrainMask e2 = erode_mask(m, 2);
    for (size_t i = 0; i < m.data.size(); ++i) {
      CHECK(e1.data[i] <= m.data[i]);
      CHECK(e2.data[i] <= e1.data[i]);
    }
    CHECK(e1.data == erosion_oracle(m, 1).data);
  }
}

TEST_CASE("median_filter: kernel 1 identity, constants unchanged, spike removed") {
  Volume v = test::random_volume({6, 6, 6}, 12);
  CHECK(median_filter(v, 1).data == v.data);

  Volume c = make_volume({6, 6, 6}, 0.5f);
  CHECK(median_filter(c, 3).data == c.data);

  Volume s = make_volume({7, 7, 7}, 0.1f);
  s.at(3, 3, 3) = 0.9f;  // 26 neighbors at 0.1 outvote the spike
  Volume f = median_filter(s, 3);
  CHECK(f.at(3, 3, 3) == 0.1f);
}

TEST_CASE("median_filter: preserves global min/max bounds") {
  Volume v = test::random_volume({9, 9, 9}, 13, 0.2f, 0.8f);
  Volume f = median_filter(v, 3);
  auto [lo_it, hi_it] = std::minmax_element(v.data.begin(), v.data.end());
  for (float x : f.data) {
    CHECK(x >= *lo_it);
    CHECK(x <= *hi_it);
  }
}

TEST_CASE("median_filter rejects even kernels") {
  Volume v = test::random_volume({4, 4, 4}, 14);
  CHECK_THROWS_AS(median_filter(v, 2), std::invalid_argument);
}

TEST_CASE("full preprocessing chain is deterministic") {
  auto run = [] {
    Volume v = test::random_volume({30, 28, 26}, 77, 0.0f, 2.0f);
    v.spacing = {1.1, 0.9, 1.4};
    BrainMask m = make_mask(v.shape, 0);
    for (int x = 4; x < 26; ++x)
      for (int y = 4; y < 24; ++y)
        for (int z = 4; z < 22; ++z) m.at(x, y, z) = 1;
    Volume r = resample_isotropic(v, 1.0);
    BrainMask rm = resample_isotropic(m, v.spacing, 1.0);
    auto [cv, cm] = crop_to_mask(r, rm, 2);
    Volume p = pad_to_shape(cv, {40, 40, 40});
    BrainMask pm = pad_to_shape(cm, {40, 40, 40});
    Volume d = downsample(p, {16, 16, 16});
    BrainMask dm = downsample(pm, {16, 16, 16});
    return normalize_intensity(d, dm, 98.0).data;
  };
  CHECK(run() == run());
}
