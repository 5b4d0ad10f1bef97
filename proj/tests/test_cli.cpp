#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "testutil.hpp"
#include "voxuad/corpus.hpp"
#include "voxuad/rng.hpp"
#include "voxuad/volume_io.hpp"

using namespace voxuad;
using nlohmann::json;

namespace {

std::string cli_path() {
  const char* p = std::getenv("VOXUAD_CLI");
  REQUIRE_MESSAGE(p != nullptr, "VOXUAD_CLI must point at the CLI binary");
  return p;
}

int run_cli(const std::string& args, const std::filesystem::path& log) {
  std::string cmd = cli_path() + " " + args + " >> " + log.string() + " 2>&1";
  int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string smoke_manifest(const std::filesystem::path& out) {
  json m{
      {"data",
       {{"phantoms",
         {{"n_healthy", 8},
          {"n_lesioned", 4},
          {"shape", {16, 16, 16}},
          {"lesion_radius", {2.0, 3.0}}}}}},
      {"preprocess",
       {{"target_spacing_mm", 1.0},
        {"crop_margin", 1},
        {"pad_shape", {16, 16, 16}},
        {"output_shape", {16, 16, 16}}}},
      {"model",
       {{"dims", 3}, {"input_extent", 16}, {"latent", 8}, {"stage_channels", {4, 8}}}},
      {"train",
       {{"batch_size", 4},
        {"max_epochs", 2},
        {"train_fraction", 0.75},
        {"val_fraction", 0.25},
        {"erasing",
         {{"strategy", "cube"}, {"fill", "noise"}, {"probability", 0.5}}}}},
      {"eval", {{"erosion_radius", 1}, {"median_kernel", 3}, {"lesion_val_fraction", 0.5}}},
      {"seeds", {{"master", 11}}},
      {"output_dir", out.string()}};
  return m.dump(2);
}

}  // namespace

TEST_CASE("CLI pipeline: synth, preprocess, train, threshold, eval, detect-slices") {
  test::TempDir dir("cli");
  auto out = dir.path / "run";
  auto manifest_path = dir.path / "manifest.json";
  auto log = dir.path / "cli.log";
  atomic_write_file(manifest_path, smoke_manifest(out));
  std::string base = "--manifest " + manifest_path.string();

  REQUIRE(run_cli(base + " synth", log) == 0);
  CorpusIndex corpus = read_corpus_index(out / "corpus" / "index.json");
  CHECK(corpus.entries.size() == 12);
  int labeled = 0;
  for (const auto& e : corpus.entries) labeled += !e.labels_file.empty();
  CHECK(labeled == 12);  // healthy subjects carry explicit empty label maps

  REQUIRE(run_cli(base + " preprocess", log) == 0);
  CorpusIndex pre = read_corpus_index(out / "preprocessed" / "index.json");
  CHECK(pre.entries.size() == 12);
  int n_train = 0, n_val = 0, n_test = 0;
  for (const auto& e : pre.entries) {
    n_train += e.split_tag == SplitTag::train;
    n_val += e.split_tag == SplitTag::val;
    n_test += e.split_tag == SplitTag::test;
  }
  CHECK(n_train == 6);  // 8 healthy * 0.75
  CHECK(n_val == 4);    // 2 healthy + 2 annotated
  CHECK(n_test == 2);   // remaining annotated
  Volume v0 = read_volume(pre.root / pre.entries[0].volume_file);
  CHECK(v0.shape == Shape3{16, 16, 16});

  // preprocess rerun is idempotent: byte-identical outputs
  std::string before = slurp(pre.root / pre.entries[0].volume_file);
  REQUIRE(run_cli(base + " preprocess", log) == 0);
  CHECK(slurp(pre.root / pre.entries[0].volume_file) == before);

  REQUIRE(run_cli(base + " train", log) == 0);
  CHECK(std::filesystem::exists(out / "checkpoints" / "best.ckpt"));
  std::string history = slurp(out / "loss_history.csv");
  CHECK(history.find("epoch,total,recon,kl,val_recon") == 0);
  CHECK(std::count(history.begin(), history.end(), '\n') == 3);  // header + 2 epochs
  CHECK(std::filesystem::exists(out / "manifest.json"));

  REQUIRE(run_cli(base + " threshold", log) == 0);
  json thr = json::parse(slurp(out / "threshold.json"));
  CHECK(thr.at("iterations") == 10);
  CHECK(thr.at("trace").size() == 10);
  CHECK(thr.at("final_width").get<double>() == doctest::Approx(std::pow(2.0, -10)));
  double t = thr.at("threshold").get<double>();
  CHECK(t >= 0.0);
  CHECK(t <= 1.0);

  // threshold rerun reproduces the identical trace
  std::string thr_before = slurp(out / "threshold.json");
  REQUIRE(run_cli(base + " threshold", log) == 0);
  CHECK(slurp(out / "threshold.json") == thr_before);

  REQUIRE(run_cli(base + " eval", log) == 0);
  json report = json::parse(slurp(out / "reports" / "report.json"));
  CHECK(report.at("subjects") == 2);
  for (const char* key : {"dice_dataset_percent", "dice_subject_mean_percent",
                          "auprc_voxel_percent", "auprc_slice_percent"}) {
    double val = report.at(key).get<double>();
    CHECK(val >= 0.0);
    CHECK(val <= 100.0);
  }
  CHECK(std::filesystem::exists(out / "reports" / "pr_voxel.csv"));
  CHECK(std::filesystem::exists(out / "reports" / "per_subject.csv"));
  CHECK(std::filesystem::exists(out / "figures" / "pr_voxel.svg"));
  CHECK(std::filesystem::exists(out / "figures" / "lesion_size.svg"));
  CHECK(std::filesystem::exists(out / "residuals"));

  REQUIRE(run_cli(base + " detect-slices", log) == 0);
  json slices = json::parse(slurp(out / "reports" / "slice_detection.json"));
  CHECK(slices.at("slices").get<int>() == 2 * 16);
  double auprc = slices.at("auprc_slice_percent").get<double>();
  CHECK(auprc >= 0.0);
  CHECK(auprc <= 100.0);
}

TEST_CASE("CLI: train rerun reproduces the loss history bit-identically") {
  test::TempDir dir("clidet");
  auto out = dir.path / "run";
  auto manifest_path = dir.path / "manifest.json";
  auto log = dir.path / "cli.log";
  atomic_write_file(manifest_path, smoke_manifest(out));
  std::string base = "--manifest " + manifest_path.string();

  REQUIRE(run_cli(base + " synth", log) == 0);
  REQUIRE(run_cli(base + " preprocess", log) == 0);
  REQUIRE(run_cli(base + " train", log) == 0);
  std::string first = slurp(out / "loss_history.csv");
  REQUIRE(run_cli(base + " train", log) == 0);
  CHECK(slurp(out / "loss_history.csv") == first);
}

TEST_CASE("CLI: missing corpus yields a nonzero exit and a clear message") {
  test::TempDir dir("clierr");
  auto out = dir.path / "run";
  auto manifest_path = dir.path / "manifest.json";
  auto log = dir.path / "cli.log";
  atomic_write_file(manifest_path, smoke_manifest(out));
  // preprocess without synth: the phantom corpus does not exist yet
  CHECK(run_cli("--manifest " + manifest_path.string() + " preprocess", log) != 0);
  CHECK(slurp(log).find("synth") != std::string::npos);
}

TEST_CASE("CLI: seed override changes results; explicit rerun restores them") {
  test::TempDir dir("cliseed");
  auto out = dir.path / "run";
  auto manifest_path = dir.path / "manifest.json";
  auto log = dir.path / "cli.log";
  atomic_write_file(manifest_path, smoke_manifest(out));
  std::string base = "--manifest " + manifest_path.string();

  auto first_volume = [&] {
    CorpusIndex idx = read_corpus_index(out / "corpus" / "index.json");
    return read_volume(idx.root / idx.entries.at(0).volume_file);
  };

  REQUIRE(run_cli(base + " synth", log) == 0);
  Volume v_orig = first_volume();

  REQUIRE(run_cli(base + " --seed 99 synth", log) == 0);
  Volume v_seeded = first_volume();
  CHECK(v_orig.data != v_seeded.data);

  REQUIRE(run_cli(base + " synth", log) == 0);
  Volume v_back = first_volume();
  CHECK(v_back.data == v_orig.data);
}
