#include "doctest.h"
#include "testutil.hpp"
#include "voxuad/inference.hpp"
#include "voxuad/phantom.hpp"

using namespace voxuad;

namespace {

ResidualMap map_of(Shape3 shape, float value) {
  ResidualMap r;
  r.shape = shape;
  r.data.assign(shape.total(), value);
  return r;
}

}  // namespace

TEST_CASE("residual_between: zero for identical inputs, constant offset, symmetric") {
  Volume x = test::random_volume({8, 8, 8}, 1);
  ResidualMap zero = residual_between(x, x);
  for (float v : zero.data) CHECK(v == 0.0f);

  Volume shifted = x;
  for (auto& v : shifted.data) v += 0.3f;
  ResidualMap r = residual_between(x, shifted);
  for (float v : r.data) CHECK(v == doctest::Approx(0.3f));

  ResidualMap a = residual_between(x, shifted);
  ResidualMap b = residual_between(shifted, x);
  CHECK(a.data == b.data);
}

TEST_CASE("residual: 2D slice-by-slice restack has the 3D map's shape") {
  PhantomSpec spec;
  spec.shape = {16, 16, 16};
  spec.seed = 2;
  SubjectRecord rec = generate_healthy(spec);

  ModelConfig c3;
  c3.dims = 3;
  c3.input_extent = 16;
  c3.latent = 8;
  c3.stage_channels = {4, 8};
  c3.seed = 3;
  ModelConfig c2 = c3;
  c2.dims = 2;
  Vae<float> m3(c3), m2(c2);

  ResidualMap r3 = residual(m3, rec.volume);
  ResidualMap r2 = residual(m2, rec.volume);
  CHECK(r3.shape == rec.volume.shape);
  CHECK(r2.shape == r3.shape);
  for (float v : r2.data) CHECK(v >= 0.0f);
}

TEST_CASE("postprocess: zero map stays zero; out-of-mask residuals vanish; spike suppressed") {
  Shape3 shape{12, 12, 12};
  BrainMask mask = make_mask(shape, 0);
  for (int x = 2; x < 10; ++x)
    for (int y = 2; y < 10; ++y)
      for (int z = 2; z < 10; ++z) mask.at(x, y, z) = 1;

  ResidualMap zero = map_of(shape, 0.0f);
  ResidualMap pz = postprocess(zero, mask, 1, 3);
  CHECK(pz.postprocessed);
  for (float v : pz.data) CHECK(v == 0.0f);

  // residual mass outside the eroded mask is wiped by the mask multiply
  ResidualMap r = map_of(shape, 0.0f);
  r.data[voxel_index(shape, 0, 0, 0)] = 0.9f;   // outside the mask entirely
  r.data[voxel_index(shape, 2, 2, 2)] = 0.8f;   // inside mask but eroded away
  ResidualMap pr = postprocess(r, mask, 1, 1);  // kernel 1: isolate the mask step
  CHECK(pr.at(0, 0, 0) == 0.0f);
  CHECK(pr.at(2, 2, 2) == 0.0f);

  // an isolated in-mask spike is removed by the median step
  ResidualMap s = map_of(shape, 0.0f);
  s.data[voxel_index(shape, 6, 6, 6)] = 1.0f;
  ResidualMap ps = postprocess(s, mask, 1, 3);
  CHECK(ps.at(6, 6, 6) == 0.0f);
}

TEST_CASE("postprocess: double application is an invalid state") {
  Shape3 shape{8, 8, 8};
  BrainMask mask = test::solid_mask(shape);
  ResidualMap r = map_of(shape, 0.1f);
  ResidualMap once = postprocess(r, mask, 1, 3);
  CHECK_THROWS_AS(postprocess(once, mask, 1, 3), InvalidStateError);
}

TEST_CASE("postprocess never increases the maximum residual") {
  Shape3 shape{10, 10, 10};
  BrainMask mask = test::random_mask(shape, 4, 0.9);
  ResidualMap r;
  r.shape = shape;
  RngStream rng(5);
  r.data.resize(shape.total());
  for (auto& v : r.data) v = (float)rng.uniform(0, 0.8);
  float max_before = *std::max_element(r.data.begin(), r.data.end());
  ResidualMap p = postprocess(r, mask, 1, 3);
  float max_after = *std::max_element(p.data.begin(), p.data.end());
  CHECK(max_after <= max_before);
}

TEST_CASE("binarize: edge thresholds and strict inequality") {
  Shape3 shape{4, 4, 4};
  ResidualMap r = map_of(shape, 0.0f);
  r.data[0] = 0.4f;
  r.data[1] = 0.6f;
  r.postprocessed = true;

  LabelMap at_half = binarize(r, 0.5);
  CHECK(at_half.data[0] == 0);
  CHECK(at_half.data[1] == 1);

  LabelMap at_one = binarize(r, 1.0);
  CHECK(count_foreground(at_one.data) == 0);

  LabelMap at_zero = binarize(r, 0.0);
  CHECK(count_foreground(at_zero.data) == 2);  // every strictly positive voxel

  CHECK_THROWS_AS(binarize(r, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(binarize(r, 1.1), std::invalid_argument);
}

TEST_CASE("binarize is monotone in the threshold") {
  Shape3 shape{8, 8, 8};
  ResidualMap r;
  r.shape = shape;
  RngStream rng(6);
  r.data.resize(shape.total());
  for (auto& v : r.data) v = (float)rng.uniform(0, 1);
  LabelMap lo = binarize(r, 0.3);
  LabelMap hi = binarize(r, 0.7);
  for (size_t i = 0; i < lo.data.size(); ++i) CHECK(hi.data[i] <= lo.data[i]);
}

TEST_CASE("slice_scores: zeros, argmax location, and the brute-force oracle") {
  Shape3 shape{6, 6, 6};
  BrainMask mask = test::solid_mask(shape);

  ResidualMap zero = map_of(shape, 0.0f);
  for (const auto& s : slice_scores(zero, mask)) CHECK(s.score == 0.0);

  ResidualMap peak = map_of(shape, 0.01f);
  for (int x = 0; x < 6; ++x)
    for (int y = 0; y < 6; ++y) peak.at(x, y, 3) = 0.9f;
  auto scores = slice_scores(peak, mask);
  int argmax = 0;
  for (int z = 1; z < 6; ++z)
    if (scores[z].score > scores[argmax].score) argmax = z;
  CHECK(argmax == 3);

  // oracle: independent per-slice loop
  ResidualMap r;
  r.shape = shape;
  RngStream rng(7);
  r.data.resize(shape.total());
  for (auto& v : r.data) v = (float)rng.uniform(0, 1);
  BrainMask partial = test::random_mask(shape, 8, 0.6);
  auto got = slice_scores(r, partial);
  for (int z = 0; z < 6; ++z) {
    double sum = 0;
    size_t cnt = 0;
    for (int x = 0; x < 6; ++x)
      for (int y = 0; y < 6; ++y)
        if (partial.at(x, y, z)) {
          sum += r.at(x, y, z);
          ++cnt;
        }
    double expected = cnt == 0 ? 0.0 : sum / double(cnt);
    CHECK(got[z].score == doctest::Approx(expected).epsilon(1e-9));
  }

  // sum reduction is the mean times the in-mask count
  auto sums = slice_scores(r, partial, SliceReduction::sum);
  for (int z = 0; z < 6; ++z) CHECK(sums[z].score >= got[z].score);
}

TEST_CASE("anomalous voxels lie inside the eroded mask after post-processing") {
  Shape3 shape{12, 12, 12};
  BrainMask mask = make_mask(shape, 0);
  for (int x = 3; x < 9; ++x)
    for (int y = 3; y < 9; ++y)
      for (int z = 3; z < 9; ++z) mask.at(x, y, z) = 1;
  ResidualMap r;
  r.shape = shape;
  RngStream rng(9);
  r.data.resize(shape.total());
  for (auto& v : r.data) v = (float)rng.uniform(0, 1);
  ResidualMap p = postprocess(r, mask, 1, 3);
  LabelMap seg = binarize(p, 0.2);
  BrainMask eroded = erode_mask(mask, 1);
  for (size_t i = 0; i < seg.data.size(); ++i)
    if (seg.data[i]) CHECK(eroded.data[i] == 1);
}
