/**
 * @file voxuad.cpp
 * @brief CLI for unsupervised anomaly segmentation on volumetric brain
 *        images: phantom synthesis, preprocessing, VAE training, threshold
 *        search, evaluation and slice-wise detection, all driven by a
 *        manifest file.
 */

#include <iostream>

#include "CLI11.hpp"
#include "voxuad/pipeline.hpp"

namespace {

struct GlobalOpts {
  std::string manifest_path;
  std::string out_override;
  int64_t seed_override = -1;
  int workers = 0;
  bool deterministic = false;
};

voxuad::RunContext make_context(const GlobalOpts& g) {
  voxuad::RunContext ctx;
  ctx.manifest = voxuad::parse_manifest(g.manifest_path);
  if (g.seed_override >= 0) ctx.manifest.apply_master_seed((uint64_t)g.seed_override);
  ctx.out = g.out_override.empty() ? std::filesystem::path(ctx.manifest.output_dir)
                                   : std::filesystem::path(g.out_override);
  // all computations are deterministic by construction for any worker count;
  // the flag is accepted so scripts can state the intent explicitly
  ctx.workers = g.deterministic && g.workers == 0 ? 0 : g.workers;
  return ctx;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"voxuad: unsupervised anomaly segmentation for volumetric brain images"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--manifest", g.manifest_path, "experiment manifest (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed_override, "override the manifest master seed");
  app.add_option("--out", g.out_override, "override the manifest output directory");
  app.add_option("--workers", g.workers, "worker thread count (0 = library default)");
  app.add_flag("--deterministic", g.deterministic, "assert deterministic execution");

  auto* synth = app.add_subcommand("synth", "generate a synthetic phantom corpus");
  auto* preprocess =
      app.add_subcommand("preprocess", "resample, crop, pad, downsample and normalize a corpus");
  auto* train = app.add_subcommand("train", "train the model described by the manifest");
  auto* threshold =
      app.add_subcommand("threshold", "greedy binarization-threshold search on validation data");
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  auto* detect = app.add_subcommand("detect-slices", "slice-wise anomaly detection report");

  std::string ckpt_opt, thr_opt;
  threshold->add_option("--checkpoint", ckpt_opt, "checkpoint path (default: <out>/checkpoints/best.ckpt)");
  eval->add_option("--checkpoint", ckpt_opt, "checkpoint path (default: <out>/checkpoints/best.ckpt)");
  eval->add_option("--threshold-file", thr_opt, "threshold file (default: <out>/threshold.json)");
  detect->add_option("--checkpoint", ckpt_opt, "checkpoint path (default: <out>/checkpoints/best.ckpt)");

  CLI11_PARSE(app, argc, argv);

  try {
    voxuad::RunContext ctx = make_context(g);
    std::filesystem::path ckpt =
        ckpt_opt.empty() ? voxuad::checkpoint_path(ctx.out) : std::filesystem::path(ckpt_opt);
    std::filesystem::path thr =
        thr_opt.empty() ? voxuad::threshold_path(ctx.out) : std::filesystem::path(thr_opt);

    if (synth->parsed()) return voxuad::cmd_synth(ctx);
    if (preprocess->parsed()) return voxuad::cmd_preprocess(ctx);
    if (train->parsed()) return voxuad::cmd_train(ctx);
    if (threshold->parsed()) return voxuad::cmd_threshold(ctx, ckpt);
    if (eval->parsed()) return voxuad::cmd_eval(ctx, ckpt, thr);
    if (detect->parsed()) return voxuad::cmd_detect_slices(ctx, ckpt);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
