#pragma once

/**
 * @file pipeline.hpp
 * @brief Command bodies behind the CLI verbs. Each returns a process exit
 *        code; subject-level failures are collected into errors.json under
 *        the output directory and make the command fail.
 *
 * Output directory layout:
 *   manifest.json          verbatim copy of the manifest
 *   corpus/                synthesized phantom corpus (synth)
 *   preprocessed/          preprocessed corpus + index (preprocess)
 *   checkpoints/best.ckpt  best-validation-epoch model (train)
 *   loss_history.csv, logs/train.log
 *   threshold.json         greedy-search result with its 10-iteration trace
 *   reports/, figures/, residuals/
 */

#include <filesystem>

#include "voxuad/manifest.hpp"

namespace voxuad {

struct RunContext {
  Manifest manifest;
  std::filesystem::path out;
  int workers = 0;  // 0: library default
};

int cmd_synth(const RunContext& ctx);
int cmd_preprocess(const RunContext& ctx);
int cmd_train(const RunContext& ctx);
int cmd_threshold(const RunContext& ctx, const std::filesystem::path& checkpoint);
int cmd_eval(const RunContext& ctx, const std::filesystem::path& checkpoint,
             const std::filesystem::path& threshold_file);
int cmd_detect_slices(const RunContext& ctx, const std::filesystem::path& checkpoint);

/// Preprocessing chain for one subject: resample to isotropic target spacing
/// (cubic for intensities, nearest-neighbor for mask/labels), crop to the
/// mask bounding box with margin, zero-pad, anti-aliased downsample, then
/// percentile normalization. Exposed for tests.
SubjectRecord preprocess_subject(const SubjectRecord& in, const PreprocessSection& cfg);

/// Default artifact paths under an output directory.
std::filesystem::path corpus_index_path(const std::filesystem::path& out);
std::filesystem::path preprocessed_index_path(const std::filesystem::path& out);
std::filesystem::path checkpoint_path(const std::filesystem::path& out);
std::filesystem::path threshold_path(const std::filesystem::path& out);

}  // namespace voxuad
