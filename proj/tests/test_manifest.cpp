#include "doctest.h"
#include "testutil.hpp"
#include "voxuad/manifest.hpp"

using namespace voxuad;

namespace {

const char* kBasicManifest = R"({
  "data": { "phantoms": { "n_healthy": 4, "n_lesioned": 2 } },
  "model": { "dims": 3, "stage_channels": [4, 8], "input_extent": 16, "latent": 8 },
  "train": { "batch_size": 2, "max_epochs": 3,
             "erasing": { "strategy": "cube", "fill": "noise", "probability": 0.5 } },
  "eval": { "erosion_radius": 1, "median_kernel": 3 },
  "seeds": { "master": 7 },
  "output_dir": "out"
})";

}  // namespace

TEST_CASE("manifest: happy path populates every section") {
  Manifest m = parse_manifest_text(kBasicManifest);
  CHECK(m.data.phantoms.has_value());
  CHECK(m.data.phantoms->n_healthy == 4);
  CHECK(m.model.dims == 3);
  CHECK(m.model.input_extent == 16);
  CHECK(m.train.batch_size == 2);
  CHECK(m.train.erasing.strategy == EraseStrategy::cube);
  CHECK(m.train.erasing.fill == EraseFill::noise);
  CHECK(m.eval.median_kernel == 3);
  CHECK(m.output_dir == "out");
  CHECK(m.seeds.master == 7);
  // derived seeds land in the nested configs
  CHECK(m.model.seed == m.seeds.model);
  CHECK(m.train.seed == m.seeds.batch);
  CHECK(m.train.erasing.seed == m.seeds.erasing);
}

TEST_CASE("manifest: unknown keys are rejected at every level") {
  std::string bad1 = R"({"data": {"phantoms": {"n_healthy": 1, "n_lesioned": 0}},
                         "output_dir": "o", "bogus": 1})";
  CHECK_THROWS_WITH_AS(parse_manifest_text(bad1), doctest::Contains("bogus"),
                       std::invalid_argument);

  std::string bad2 = R"({"data": {"phantoms": {"n_healthy": 1, "n_lesioned": 0},
                                  "extra": true}, "output_dir": "o"})";
  CHECK_THROWS_WITH_AS(parse_manifest_text(bad2), doctest::Contains("extra"),
                       std::invalid_argument);

  std::string bad3 = R"({"data": {"phantoms": {"n_healthy": 1, "n_lesioned": 0}},
                         "train": {"erasing": {"strategy": "cube", "oops": 2}},
                         "output_dir": "o"})";
  CHECK_THROWS_WITH_AS(parse_manifest_text(bad3), doctest::Contains("oops"),
                       std::invalid_argument);
}

TEST_CASE("manifest: data section and output_dir are required") {
  CHECK_THROWS(parse_manifest_text(R"({"output_dir": "o"})"));
  CHECK_THROWS(parse_manifest_text(
      R"({"data": {"phantoms": {"n_healthy": 1, "n_lesioned": 0}}})"));
}

TEST_CASE("experiment names map to dims, strategy and fill") {
  ExperimentName e = parse_experiment_name("3d-cube-n");
  CHECK(e.dims == 3);
  CHECK(e.strategy == EraseStrategy::cube);
  CHECK(e.fill == EraseFill::noise);

  e = parse_experiment_name("2D-Multi-Patch-0");
  CHECK(e.dims == 2);
  CHECK(e.strategy == EraseStrategy::multi_patch);
  CHECK(e.fill == EraseFill::zero);

  e = parse_experiment_name("3d-half-volume-n");
  CHECK(e.strategy == EraseStrategy::half_volume);

  e = parse_experiment_name("2d-none");
  CHECK(e.dims == 2);
  CHECK(e.strategy == EraseStrategy::none);

  CHECK_THROWS(parse_experiment_name("4d-cube-n"));
  CHECK_THROWS(parse_experiment_name("2d-cube-n"));  // cube is 3D-only
  CHECK_THROWS(parse_experiment_name("3d-cube"));    // missing fill
}

TEST_CASE("manifest: experiment shorthand pins dims and erasing") {
  std::string text = R"({
    "data": { "phantoms": { "n_healthy": 2, "n_lesioned": 0 } },
    "model": { "stage_channels": [4, 8], "input_extent": 16, "latent": 8 },
    "train": { "experiment": "3d-cube-n",
               "erasing": { "probability": 0.5, "size_budget": [0.05, 0.2] } },
    "seeds": { "master": 1 },
    "output_dir": "o"
  })";
  Manifest m = parse_manifest_text(text);
  CHECK(m.experiment_name == "3d-cube-n");
  CHECK(m.model.dims == 3);
  CHECK(m.train.erasing.strategy == EraseStrategy::cube);
  CHECK(m.train.erasing.fill == EraseFill::noise);
  CHECK(m.train.erasing.min_frac == doctest::Approx(0.05));
  CHECK(m.train.erasing.max_frac == doctest::Approx(0.2));
}

TEST_CASE("manifest: master seed override re-derives unpinned seeds, keeps explicit ones") {
  std::string text = R"({
    "data": { "phantoms": { "n_healthy": 2, "n_lesioned": 0 } },
    "model": { "stage_channels": [4, 8], "input_extent": 16, "latent": 8 },
    "seeds": { "master": 1, "model": 999 },
    "output_dir": "o"
  })";
  Manifest m = parse_manifest_text(text);
  CHECK(m.seeds.model == 999);
  uint64_t split_before = m.seeds.split;
  m.apply_master_seed(2);
  CHECK(m.seeds.model == 999);         // explicitly pinned
  CHECK(m.seeds.split != split_before);  // re-derived
}

TEST_CASE("manifest: validation failures propagate") {
  std::string bad_model = R"({
    "data": { "phantoms": { "n_healthy": 1, "n_lesioned": 0 } },
    "model": { "dims": 5 },
    "output_dir": "o"
  })";
  CHECK_THROWS_AS(parse_manifest_text(bad_model), std::invalid_argument);

  std::string bad_fracs = R"({
    "data": { "phantoms": { "n_healthy": 1, "n_lesioned": 0 } },
    "model": { "stage_channels": [4], "input_extent": 16, "latent": 4 },
    "train": { "train_fraction": 0.9, "val_fraction": 0.3 },
    "output_dir": "o"
  })";
  CHECK_THROWS_AS(parse_manifest_text(bad_fracs), std::invalid_argument);
}
