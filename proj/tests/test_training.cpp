#include <set>

#include "doctest.h"
#include "testutil.hpp"
#include "voxuad/phantom.hpp"
#include "voxuad/training.hpp"

using namespace voxuad;

namespace {

std::vector<SubjectRecord> tiny_corpus(int n, Shape3 shape, uint64_t seed) {
  PhantomRanges ranges;
  ranges.shape = shape;
  auto records = generate_dataset(n, 0, ranges, seed);
  return records;
}

ModelConfig smoke_model(int dims, int extent = 8) {
  ModelConfig cfg;
  cfg.dims = dims;
  cfg.input_extent = extent;
  cfg.latent = 4;
  cfg.stage_channels = {4, 8};
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST_CASE("split_dataset: exact arithmetic and determinism") {
  auto records = tiny_corpus(10, {16, 16, 16}, 1);
  split_dataset(records, 0.8, 0.2, 7);
  int n_train = 0, n_val = 0;
  for (const auto& r : records) {
    n_train += r.split_tag == SplitTag::train;
    n_val += r.split_tag == SplitTag::val;
  }
  CHECK(n_train == 8);
  CHECK(n_val == 2);

  auto again = tiny_corpus(10, {16, 16, 16}, 1);
  split_dataset(again, 0.8, 0.2, 7);
  for (size_t i = 0; i < records.size(); ++i) CHECK(records[i].split_tag == again[i].split_tag);

  auto other = tiny_corpus(10, {16, 16, 16}, 1);
  split_dataset(other, 0.8, 0.2, 8);
  bool any_diff = false;
  for (size_t i = 0; i < records.size(); ++i)
    any_diff |= records[i].split_tag != other[i].split_tag;
  CHECK(any_diff);
}

TEST_CASE("split_dataset: 2008 records at (0.9, 0.1) give the 1807/201 split") {
  std::vector<SubjectRecord> records(2008);
  for (size_t i = 0; i < records.size(); ++i) {
    records[i].volume = make_volume({1, 1, 1});
    records[i].mask = test::solid_mask({1, 1, 1});
  }
  split_dataset(records, 0.9, 0.1, 5);
  int n_train = 0, n_val = 0;
  for (const auto& r : records) {
    n_train += r.split_tag == SplitTag::train;
    n_val += r.split_tag == SplitTag::val;
  }
  CHECK(n_train == 1807);
  CHECK(n_val == 201);
}

TEST_CASE("split_dataset: stratification keeps per-stratum proportions") {
  std::vector<SubjectRecord> records(100);
  for (size_t i = 0; i < records.size(); ++i) {
    records[i].volume = make_volume({1, 1, 1});
    records[i].mask = test::solid_mask({1, 1, 1});
    records[i].stratum = i < 40 ? "A" : "B";
  }
  split_dataset(records, 0.8, 0.2, 3);
  int a_train = 0, b_train = 0;
  for (size_t i = 0; i < records.size(); ++i)
    if (records[i].split_tag == SplitTag::train) (i < 40 ? a_train : b_train)++;
  CHECK(a_train == 32);
  CHECK(b_train == 48);
}

TEST_CASE("split_dataset rejects empty input and bad fractions") {
  std::vector<SubjectRecord> empty;
  CHECK_THROWS_AS(split_dataset(empty, 0.8, 0.2, 1), std::invalid_argument);
  auto records = tiny_corpus(4, {16, 16, 16}, 2);
  CHECK_THROWS_AS(split_dataset(records, 0.9, 0.2, 1), std::invalid_argument);
}

TEST_CASE("subsample_training: counts, identity, nesting") {
  auto records = tiny_corpus(10, {16, 16, 16}, 3);
  split_dataset(records, 0.8, 0.2, 7);

  auto full = subsample_training(records, 1.0, 11);
  CHECK(full.size() == records.size());

  auto half = subsample_training(records, 0.5, 11);
  int n_train = 0;
  for (const auto& r : half) n_train += r.split_tag == SplitTag::train;
  CHECK(n_train == 4);  // ceil(0.5 * 8)

  // nested subsets under the same seed
  auto ids_of = [](const std::vector<SubjectRecord>& rs) {
    std::set<std::string> ids;
    for (const auto& r : rs)
      if (r.split_tag == SplitTag::train) ids.insert(r.volume.subject_id);
    return ids;
  };
  auto small = ids_of(subsample_training(records, 0.25, 11));
  auto big = ids_of(subsample_training(records, 0.5, 11));
  for (const auto& id : small) CHECK(big.count(id) == 1);
}

TEST_CASE("make_batches: 64 volumes at batch 32 give 2 batches, shuffled per epoch") {
  std::vector<SampleRef> pool(64);
  for (int i = 0; i < 64; ++i) pool[i] = {i, -1};
  auto b1 = make_batches(pool, 32, 5, 1);
  CHECK(b1.size() == 2);
  CHECK(b1[0].size() == 32);
  CHECK(b1[1].size() == 32);
  auto b1_again = make_batches(pool, 32, 5, 1);
  CHECK(b1[0][0].subject == b1_again[0][0].subject);
  auto b2 = make_batches(pool, 32, 5, 2);
  bool differs = false;
  for (size_t i = 0; i < 32; ++i) differs |= b1[0][i].subject != b2[0][i].subject;
  CHECK(differs);
}

TEST_CASE("materialize_batch: erasing off means input equals target; targets always bit-exact") {
  auto records = tiny_corpus(3, {16, 16, 16}, 4);
  for (auto& r : records) r.split_tag = SplitTag::train;
  std::vector<SampleRef> refs{{0, -1}, {1, -1}, {2, -1}};

  ErasingSpec off;  // strategy none
  Batch b = materialize_batch(records, refs, off, 1);
  for (size_t i = 0; i < refs.size(); ++i) {
    CHECK(b.inputs[i] == b.targets[i]);
    CHECK(b.targets[i] == records[i].volume.data);
  }

  ErasingSpec on;
  on.strategy = EraseStrategy::cube;
  on.fill = EraseFill::noise;
  on.probability = 1.0;
  on.seed = 77;
  Batch be = materialize_batch(records, refs, on, 1);
  for (size_t i = 0; i < refs.size(); ++i) {
    CHECK(be.targets[i] == records[i].volume.data);
    CHECK(be.inputs[i] != be.targets[i]);
  }
}

TEST_CASE("2D training pool enumerates mask-intersecting slices only") {
  auto records = tiny_corpus(2, {16, 16, 16}, 5);
  for (auto& r : records) r.split_tag = SplitTag::train;
  auto pool = training_pool(records, 2, {0, 1});
  CHECK(!pool.empty());
  for (const auto& ref : pool) {
    CHECK(ref.slice >= 0);
    CHECK(mask_slice_nonempty(records[ref.subject].mask, ref.slice));
  }
  // some slices of a 16^3 phantom are outside the ellipsoid
  CHECK(pool.size() < 2u * 16u);
}

TEST_CASE("train: smoke run completes with the expected history length") {
  auto records = tiny_corpus(4, {8, 8, 8}, 6);
  records[0].split_tag = SplitTag::train;
  records[1].split_tag = SplitTag::train;
  records[2].split_tag = SplitTag::train;
  records[3].split_tag = SplitTag::val;

  TrainConfig tc;
  tc.batch_size = 2;
  tc.max_epochs = 2;
  tc.seed = 9;
  TrainResult res = train(records, smoke_model(3), tc);
  CHECK(res.state.loss_history.size() == 2);
  CHECK(res.state.best_epoch >= 1);

  // best_epoch is the argmin of validation recon in the history
  double best = 1e9;
  int best_epoch = -1;
  for (const auto& s : res.state.loss_history)
    if (s.val_recon < best) {
      best = s.val_recon;
      best_epoch = s.epoch;
    }
  CHECK(res.state.best_epoch == best_epoch);
  CHECK(res.state.best_val_recon == doctest::Approx(best));
}

TEST_CASE("train: fixed seeds reproduce the loss history bit-identically") {
  auto make = [] {
    auto records = tiny_corpus(4, {8, 8, 8}, 7);
    records[0].split_tag = SplitTag::train;
    records[1].split_tag = SplitTag::train;
    records[2].split_tag = SplitTag::val;
    records[3].split_tag = SplitTag::train;
    TrainConfig tc;
    tc.batch_size = 2;
    tc.max_epochs = 3;
    tc.seed = 21;
    tc.erasing.strategy = EraseStrategy::cube;
    tc.erasing.probability = 0.5;
    tc.erasing.seed = 22;
    return train(records, smoke_model(3), tc);
  };
  TrainResult a = make();
  TrainResult b = make();
  REQUIRE(a.state.loss_history.size() == b.state.loss_history.size());
  for (size_t i = 0; i < a.state.loss_history.size(); ++i) {
    CHECK(a.state.loss_history[i].total == b.state.loss_history[i].total);
    CHECK(a.state.loss_history[i].val_recon == b.state.loss_history[i].val_recon);
  }
  CHECK(a.model.parameters() == b.model.parameters());
}

TEST_CASE("train: loss decreases when overfitting a single repeated sample") {
  auto records = tiny_corpus(2, {8, 8, 8}, 8);
  records[0].split_tag = SplitTag::train;
  records[1].split_tag = SplitTag::val;

  TrainConfig tc;
  tc.batch_size = 1;
  tc.max_epochs = 50;
  tc.early_stop_patience = 50;
  tc.seed = 10;
  TrainResult res = train(records, smoke_model(3), tc);
  REQUIRE(res.state.loss_history.size() == 50);
  double first = res.state.loss_history[0].recon;
  double last = res.state.loss_history.back().recon;
  CHECK(last < first);
}

TEST_CASE("train rejects pools without train or validation records") {
  auto records = tiny_corpus(2, {8, 8, 8}, 9);
  records[0].split_tag = SplitTag::train;
  records[1].split_tag = SplitTag::test;  // no val
  TrainConfig tc;
  CHECK_THROWS_AS(train(records, smoke_model(3), tc), std::invalid_argument);
}

TEST_CASE("training pool asserts against test-tagged records") {
  auto records = tiny_corpus(1, {8, 8, 8}, 10);
  records[0].split_tag = SplitTag::test;
  CHECK_THROWS_AS(training_pool(records, 3, {0}), std::logic_error);
}

TEST_CASE("2D and 3D training share the loop: 2D smoke run") {
  auto records = tiny_corpus(3, {8, 8, 8}, 11);
  records[0].split_tag = SplitTag::train;
  records[1].split_tag = SplitTag::train;
  records[2].split_tag = SplitTag::val;
  TrainConfig tc;
  tc.batch_size = 4;
  tc.max_epochs = 2;
  tc.seed = 12;
  tc.erasing.strategy = EraseStrategy::patch;
  tc.erasing.probability = 0.5;
  TrainResult res = train(records, smoke_model(2), tc);
  CHECK(res.state.loss_history.size() == 2);
}
