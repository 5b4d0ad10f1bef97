#include "voxuad/pipeline.hpp"

#include <omp.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"
#include "voxuad/corpus.hpp"
#include "voxuad/evaluation.hpp"
#include "voxuad/plots.hpp"
#include "voxuad/volume_io.hpp"

namespace voxuad {

using nlohmann::json;
namespace fs = std::filesystem;

fs::path corpus_index_path(const fs::path& out) { return out / "corpus" / "index.json"; }
fs::path preprocessed_index_path(const fs::path& out) {
  return out / "preprocessed" / "index.json";
}
fs::path checkpoint_path(const fs::path& out) { return out / "checkpoints" / "best.ckpt"; }
fs::path threshold_path(const fs::path& out) { return out / "threshold.json"; }

Volume reconstruct_volume_ws(const Vae<float>& model, const Volume& v, Vae<float>::Workspace& ws,
                             std::vector<float>& recon);

namespace {

struct SubjectError {
  std::string subject;
  std::string stage;
  std::string message;
};

int finish(const fs::path& out, const std::vector<SubjectError>& errors) {
  if (errors.empty()) return 0;
  json list = json::array();
  for (const auto& e : errors)
    list.push_back({{"subject", e.subject}, {"stage", e.stage}, {"message", e.message}});
  atomic_write_file(out / "errors.json", json{{"errors", list}}.dump(2) + "\n");
  std::cerr << errors.size() << " subject-level failure(s); see "
            << (out / "errors.json").string() << "\n";
  return 1;
}

void write_manifest_copy(const RunContext& ctx) {
  atomic_write_file(ctx.out / "manifest.json", ctx.manifest.raw_json);
}

void apply_workers(const RunContext& ctx) {
  if (ctx.workers > 0) omp_set_num_threads(ctx.workers);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

/// Splits loaded records in place: healthy subjects into train/val by the
/// manifest fractions, annotated subjects into val (threshold search) and
/// test. Records that already carry a tag keep it.
void assign_splits(std::vector<SubjectRecord>& records, const Manifest& m) {
  std::vector<size_t> healthy, annotated;
  for (size_t i = 0; i < records.size(); ++i) {
    if (records[i].split_tag != SplitTag::unassigned) continue;
    (has_anomaly_labels(records[i]) ? annotated : healthy).push_back(i);
  }
  if (!healthy.empty()) {
    std::vector<SubjectRecord> tmp;
    tmp.reserve(healthy.size());
    for (size_t i : healthy) tmp.push_back(std::move(records[i]));
    split_dataset(tmp, m.train_fraction, m.val_fraction, m.seeds.split);
    for (size_t k = 0; k < healthy.size(); ++k) records[healthy[k]] = std::move(tmp[k]);
  }
  if (!annotated.empty()) {
    RngStream rng(stream_key(m.seeds.split, "lesioned"));
    std::vector<size_t> order = annotated;
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[(size_t)rng.uniform_int(0, (int64_t)i - 1)]);
    size_t n_val = (size_t)std::llround(m.eval.lesion_val_fraction * double(order.size()));
    for (size_t k = 0; k < order.size(); ++k)
      records[order[k]].split_tag = k < n_val ? SplitTag::val : SplitTag::test;
  }
}

CorpusIndex resolve_input_corpus(const RunContext& ctx) {
  fs::path index_path;
  if (!ctx.manifest.data.corpus_index.empty()) {
    index_path = ctx.manifest.data.corpus_index;
  } else {
    index_path = corpus_index_path(ctx.out);
    if (!fs::exists(index_path))
      throw std::runtime_error("phantom corpus not found; run the synth command first: " +
                               index_path.string());
  }
  return read_corpus_index(index_path);
}

std::vector<SubjectRecord> load_preprocessed(const RunContext& ctx) {
  CorpusIndex index = read_corpus_index(preprocessed_index_path(ctx.out));
  std::vector<SubjectRecord> records = load_corpus(index);
  return records;
}

struct EvalInputs {
  std::vector<SubjectRecord> records;  // only the requested split, with labels
  std::vector<ResidualMap> residuals;  // post-processed
};

EvalInputs residuals_for_split(const RunContext& ctx, const Vae<float>& model, SplitTag tag) {
  EvalInputs in;
  std::vector<SubjectRecord> all = load_preprocessed(ctx);
  for (auto& r : all)
    if (r.split_tag == tag && r.labels) in.records.push_back(std::move(r));
  in.residuals.resize(in.records.size());
#pragma omp parallel
  {
    auto ws = model.make_workspace();
    std::vector<float> recon;
#pragma omp for schedule(dynamic)
    for (long long i = 0; i < (long long)in.records.size(); ++i) {
      const SubjectRecord& rec = in.records[i];
      Volume rv = reconstruct_volume_ws(model, rec.volume, ws, recon);
      ResidualMap raw = residual_between(rec.volume, rv);
      in.residuals[i] = postprocess(raw, rec.mask, ctx.manifest.eval.erosion_radius,
                                    ctx.manifest.eval.median_kernel);
    }
  }
  return in;
}

}  // namespace

// Workspace-reusing variant of reconstruct_volume, for the parallel loops.
Volume reconstruct_volume_ws(const Vae<float>& model, const Volume& v,
                             Vae<float>::Workspace& ws, std::vector<float>& recon) {
  Volume out = v;
  if (model.config().dims == 3) {
    model.reconstruct(std::span<const float>(v.data), recon, ws);
    out.data = recon;
    return out;
  }
  for (int z = 0; z < v.shape.nz; ++z) {
    std::vector<float> slice = extract_axial_slice(v, z);
    model.reconstruct(slice, recon, ws);
    for (int x = 0; x < v.shape.nx; ++x)
      for (int y = 0; y < v.shape.ny; ++y) out.at(x, y, z) = recon[size_t(x) * v.shape.ny + y];
  }
  return out;
}

SubjectRecord preprocess_subject(const SubjectRecord& in, const PreprocessSection& cfg) {
  validate(in);
  SubjectRecord r;
  r.stratum = in.stratum;
  r.split_tag = in.split_tag;

  Spacing3 spacing = in.volume.spacing;
  r.volume = resample_isotropic(in.volume, cfg.target_spacing_mm);
  r.mask = resample_isotropic(in.mask, spacing, cfg.target_spacing_mm);
  if (in.labels) r.labels = resample_isotropic(*in.labels, spacing, cfg.target_spacing_mm);
  // nearest-neighbor rounding can differ from the cubic grid by one voxel
  if (r.mask.shape != r.volume.shape)
    throw std::runtime_error("resampled mask shape diverged from volume");

  Box3 box = expand_box(mask_bounding_box(r.mask), cfg.crop_margin, r.volume.shape);
  r.volume = crop(r.volume, box);
  r.mask = crop(r.mask, box);
  if (r.labels) r.labels = crop(*r.labels, box);

  Shape3 pad = cfg.pad_shape;
  // very large subjects are clamped to the padding grid rather than rejected
  pad.nx = std::max(pad.nx, r.volume.shape.nx);
  pad.ny = std::max(pad.ny, r.volume.shape.ny);
  pad.nz = std::max(pad.nz, r.volume.shape.nz);
  r.volume = pad_to_shape(r.volume, pad);
  r.mask = pad_to_shape(r.mask, pad);
  if (r.labels) r.labels = pad_to_shape(*r.labels, pad);

  r.volume = downsample(r.volume, cfg.output_shape);
  r.mask = downsample(r.mask, cfg.output_shape);
  if (r.labels) r.labels = downsample(*r.labels, cfg.output_shape);

  r.volume = normalize_intensity(r.volume, r.mask, cfg.clip_percentile);
  r.volume.subject_id = in.volume.subject_id;
  return r;
}

int cmd_synth(const RunContext& ctx) {
  apply_workers(ctx);
  const auto& block = ctx.manifest.data.phantoms;
  if (!block) throw std::invalid_argument("manifest has no data.phantoms block");
  fs::create_directories(ctx.out);
  write_manifest_copy(ctx);

  std::vector<SubjectRecord> records =
      generate_dataset(block->n_healthy, block->n_lesioned, block->ranges,
                       ctx.manifest.seeds.phantom);
  CorpusIndex index;
  fs::path dir = ctx.out / "corpus";
  index.root = dir;
  index.entries.resize(records.size());
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < (long long)records.size(); ++i)
    index.entries[i] = store_subject(dir, records[i]);
  write_corpus_index(corpus_index_path(ctx.out), index);
  std::cout << "synth: wrote " << records.size() << " phantoms to " << dir.string() << "\n";
  return 0;
}

int cmd_preprocess(const RunContext& ctx) {
  apply_workers(ctx);
  fs::create_directories(ctx.out);
  write_manifest_copy(ctx);
  CorpusIndex input = resolve_input_corpus(ctx);

  // optional shared cache keyed by input + settings
  fs::path out_dir = ctx.out / "preprocessed";
  const char* cache_root = std::getenv("VOXUAD_CACHE");
  if (cache_root && *cache_root) {
    std::ostringstream key;
    key << ctx.manifest.raw_json << "|";
    for (const auto& e : input.entries) key << e.subject_id << "," << e.volume_file << ";";
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  (unsigned long long)fnv1a64(key.str().data(), key.str().size()));
    out_dir = fs::path(cache_root) / hex;
    if (fs::exists(out_dir / "index.json")) {
      fs::create_directories(ctx.out / "preprocessed");
      fs::copy_file(out_dir / "index.json", preprocessed_index_path(ctx.out),
                    fs::copy_options::overwrite_existing);
      std::cout << "preprocess: cache hit at " << out_dir.string() << "\n";
      return 0;
    }
  }

  std::vector<SubjectRecord> outputs(input.entries.size());
  std::vector<SubjectError> errors;
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < (long long)input.entries.size(); ++i) {
    try {
      SubjectRecord rec = load_subject(input, input.entries[i]);
      outputs[i] = preprocess_subject(rec, ctx.manifest.preprocess);
    } catch (const std::exception& ex) {
#pragma omp critical
      errors.push_back({input.entries[i].subject_id, "preprocess", ex.what()});
    }
  }
  if (!errors.empty()) return finish(ctx.out, errors);

  // split assignment happens here so it is recorded on disk once
  assign_splits(outputs, ctx.manifest);

  CorpusIndex out_index;
  out_index.root = out_dir;
  out_index.entries.resize(outputs.size());
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < (long long)outputs.size(); ++i)
    out_index.entries[i] = store_subject(out_dir, outputs[i]);
  write_corpus_index(out_dir / "index.json", out_index);
  if (out_dir != ctx.out / "preprocessed") {
    // cache mode: reference the cache from the run directory via absolute paths
    CorpusIndex ref = out_index;
    for (auto& e : ref.entries) {
      e.volume_file = fs::absolute(out_dir / e.volume_file).string();
      e.mask_file = fs::absolute(out_dir / e.mask_file).string();
      if (!e.labels_file.empty())
        e.labels_file = fs::absolute(out_dir / e.labels_file).string();
    }
    write_corpus_index(preprocessed_index_path(ctx.out), ref);
  }
  std::cout << "preprocess: wrote " << outputs.size() << " subjects to " << out_dir.string()
            << "\n";
  return 0;
}

int cmd_train(const RunContext& ctx) {
  apply_workers(ctx);
  fs::create_directories(ctx.out / "logs");
  write_manifest_copy(ctx);
  std::vector<SubjectRecord> records = load_preprocessed(ctx);

  std::ofstream log(ctx.out / "logs" / "train.log");
  std::ostringstream history;
  // wall time stays out of the history file so reruns are byte-identical
  history << "epoch,total,recon,kl,val_recon\n";
  auto on_epoch = [&](const EpochStats& s) {
    std::ostringstream line;
    line << "epoch " << s.epoch << " total " << format_double(s.total) << " recon "
         << format_double(s.recon) << " kl " << format_double(s.kl) << " val_recon "
         << format_double(s.val_recon) << " wall " << format_double(s.wall_seconds) << "s";
    log << line.str() << "\n";
    log.flush();
    std::cout << line.str() << "\n";
    history << s.epoch << "," << format_double(s.total) << "," << format_double(s.recon) << ","
            << format_double(s.kl) << "," << format_double(s.val_recon) << "\n";
  };

  TrainResult result = train(records, ctx.manifest.model, ctx.manifest.train, on_epoch);

  atomic_write_file(ctx.out / "loss_history.csv", history.str());
  CheckpointInfo info;
  info.config = ctx.manifest.model;
  info.epoch = result.state.epoch;
  info.best_epoch = result.state.best_epoch;
  info.best_val_recon = result.state.best_val_recon;
  info.extra = json{{"experiment", ctx.manifest.experiment_name}}.dump();
  save_checkpoint(checkpoint_path(ctx.out), result.model, info);
  std::cout << "train: best epoch " << result.state.best_epoch << " val_recon "
            << format_double(result.state.best_val_recon) << ", checkpoint at "
            << checkpoint_path(ctx.out).string() << "\n";
  return 0;
}

int cmd_threshold(const RunContext& ctx, const fs::path& checkpoint) {
  apply_workers(ctx);
  fs::create_directories(ctx.out);
  Vae<float> model = model_from_checkpoint(load_checkpoint(checkpoint));
  EvalInputs val = residuals_for_split(ctx, model, SplitTag::val);
  if (val.records.empty())
    throw std::runtime_error("threshold search needs annotated validation subjects");
  std::vector<LabelMap> truths;
  truths.reserve(val.records.size());
  for (auto& r : val.records) truths.push_back(*r.labels);

  ThresholdSearchResult res =
      greedy_threshold_search(val.residuals, truths, ctx.manifest.eval.search_iterations);

  json trace = json::array();
  for (const auto& row : res.trace)
    trace.push_back({{"iteration", row.iteration},
                     {"lo", row.lo},
                     {"hi", row.hi},
                     {"q1", row.q1},
                     {"q3", row.q3},
                     {"dice_q1", row.dice_q1},
                     {"dice_q3", row.dice_q3},
                     {"kept_lower", row.kept_lower}});
  json out{{"threshold", res.threshold},
           {"validation_dice_dataset", res.dice},
           {"iterations", (int)res.trace.size()},
           {"final_width", res.trace.empty() ? 1.0
                                             : 0.5 * (res.trace.back().hi - res.trace.back().lo)},
           {"trace", trace}};
  atomic_write_file(threshold_path(ctx.out), out.dump(2) + "\n");
  std::cout << "threshold: " << format_double(res.threshold) << " (validation DICE_D "
            << format_double(res.dice) << ")\n";
  return 0;
}

namespace {

void write_pr_csv(const fs::path& path, const PRCurve& curve) {
  std::ostringstream csv;
  csv << "recall,precision,threshold\n";
  for (const auto& p : curve.points)
    csv << format_double(p.recall) << "," << format_double(p.precision) << ","
        << format_double(p.threshold) << "\n";
  atomic_write_file(path, csv.str());
}

PlotSeries pr_series(const PRCurve& curve, const std::string& label) {
  PlotSeries s;
  s.label = label;
  s.points.emplace_back(0.0, curve.points.empty() ? 1.0 : curve.points.front().precision);
  for (const auto& p : curve.points) s.points.emplace_back(p.recall, p.precision);
  return s;
}

}  // namespace

int cmd_eval(const RunContext& ctx, const fs::path& checkpoint, const fs::path& threshold_file) {
  apply_workers(ctx);
  fs::create_directories(ctx.out / "reports");
  fs::create_directories(ctx.out / "figures");
  Vae<float> model = model_from_checkpoint(load_checkpoint(checkpoint));

  std::ifstream tin(threshold_file);
  if (!tin) throw std::runtime_error("cannot open threshold file " + threshold_file.string());
  const double threshold = json::parse(tin).at("threshold").get<double>();

  EvalInputs test = residuals_for_split(ctx, model, SplitTag::test);
  if (test.records.empty()) throw std::runtime_error("no annotated test subjects");
  const size_t n = test.records.size();

  std::vector<LabelMap> preds(n), truths(n);
  std::vector<float> voxel_scores;
  std::vector<uint8_t> voxel_labels;
  std::vector<float> slice_score_pool;
  std::vector<uint8_t> slice_label_pool;
  std::ostringstream subjects_csv, slices_csv;
  subjects_csv << "subject,threshold,pred_voxels,truth_voxels,dice,lesion_voxels\n";
  slices_csv << "subject,slice,score,label\n";

  for (size_t i = 0; i < n; ++i) {
    const SubjectRecord& rec = test.records[i];
    const ResidualMap& res = test.residuals[i];
    preds[i] = binarize(res, threshold);
    truths[i] = *rec.labels;
    voxel_scores.insert(voxel_scores.end(), res.data.begin(), res.data.end());
    voxel_labels.insert(voxel_labels.end(), rec.labels->data.begin(), rec.labels->data.end());

    auto scores = slice_scores(res, rec.mask, ctx.manifest.eval.slice_score);
    auto labels = slice_labels(*rec.labels);
    for (size_t z = 0; z < scores.size(); ++z) {
      slice_score_pool.push_back((float)scores[z].score);
      slice_label_pool.push_back(labels[z]);
      slices_csv << rec.volume.subject_id << "," << z << "," << format_double(scores[z].score)
                 << "," << int(labels[z]) << "\n";
    }

    double d = dice(preds[i], truths[i]);
    subjects_csv << rec.volume.subject_id << "," << format_double(threshold) << ","
                 << count_foreground(preds[i].data) << "," << count_foreground(truths[i].data)
                 << "," << format_double(d) << "," << count_foreground(truths[i].data) << "\n";

    if (ctx.manifest.eval.save_residuals) {
      Volume res_vol;
      res_vol.shape = res.shape;
      res_vol.spacing = rec.volume.spacing;
      res_vol.data = res.data;
      write_nifti(ctx.out / "residuals" / (rec.volume.subject_id + "_residual.nii.gz"), res_vol);
      write_nifti(ctx.out / "residuals" / (rec.volume.subject_id + "_segmentation.nii.gz"),
                  preds[i], rec.volume.spacing);
    }
  }

  const double dice_d = dice_dataset(preds, truths);
  SubjectwiseDice dice_s = dice_subjectwise(preds, truths);
  PRCurve curve_voxel = pr_curve(voxel_scores, voxel_labels);
  const double auprc_voxel = auprc(curve_voxel);
  PRCurve curve_slice = pr_curve(slice_score_pool, slice_label_pool);
  const double auprc_slice = auprc(curve_slice);
  LesionSizeBreakdown breakdown = lesion_size_breakdown(dice_s.values, truths);

  size_t slice_pos = 0;
  for (uint8_t l : slice_label_pool) slice_pos += l != 0;
  size_t voxel_pos = 0;
  for (uint8_t l : voxel_labels) voxel_pos += l != 0;

  json report{{"dataset", "test"},
              {"subjects", n},
              {"threshold", threshold},
              {"dice_dataset_percent", 100.0 * dice_d},
              {"dice_subject_mean_percent", 100.0 * dice_s.mean},
              {"dice_subject_std_percent", 100.0 * dice_s.stddev},
              {"auprc_voxel_percent", 100.0 * auprc_voxel},
              {"auprc_slice_percent", 100.0 * auprc_slice},
              {"voxel_prevalence", double(voxel_pos) / double(voxel_labels.size())},
              {"slice_prevalence", double(slice_pos) / double(slice_label_pool.size())}};
  atomic_write_file(ctx.out / "reports" / "report.json", report.dump(2) + "\n");

  std::ostringstream txt;
  txt << "subjects: " << n << "\n";
  txt << "threshold: " << format_double(threshold) << "\n";
  txt << "DICE_D: " << format_double(100.0 * dice_d) << "%\n";
  txt << "DICE_S: " << format_double(100.0 * dice_s.mean) << "% +/- "
      << format_double(100.0 * dice_s.stddev) << "%\n";
  txt << "AUPRC (voxel): " << format_double(100.0 * auprc_voxel) << "%\n";
  txt << "AUPRC (slice): " << format_double(100.0 * auprc_slice) << "%\n";
  atomic_write_file(ctx.out / "reports" / "report.txt", txt.str());

  atomic_write_file(ctx.out / "reports" / "per_subject.csv", subjects_csv.str());
  atomic_write_file(ctx.out / "reports" / "slice_scores.csv", slices_csv.str());
  write_pr_csv(ctx.out / "reports" / "pr_voxel.csv", curve_voxel);
  write_pr_csv(ctx.out / "reports" / "pr_slice.csv", curve_slice);

  std::ostringstream lesion_csv;
  lesion_csv << "lesion_voxels,dice\n";
  for (const auto& row : breakdown.rows)
    lesion_csv << row.lesion_voxels << "," << format_double(row.dice) << "\n";
  atomic_write_file(ctx.out / "reports" / "lesion_size.csv", lesion_csv.str());

  PlotSpec pr_plot;
  pr_plot.title = "Precision-recall (voxel)";
  pr_plot.x_label = "recall";
  pr_plot.y_label = "precision";
  pr_plot.x_lo = 0, pr_plot.x_hi = 1, pr_plot.y_lo = 0, pr_plot.y_hi = 1.02;
  pr_plot.series.push_back(pr_series(curve_voxel, "voxel"));
  write_svg_plot(ctx.out / "figures" / "pr_voxel.svg", pr_plot);

  PlotSpec prs_plot;
  prs_plot.title = "Precision-recall (slice)";
  prs_plot.x_label = "recall";
  prs_plot.y_label = "precision";
  prs_plot.x_lo = 0, prs_plot.x_hi = 1, prs_plot.y_lo = 0, prs_plot.y_hi = 1.02;
  prs_plot.series.push_back(pr_series(curve_slice, "slice"));
  write_svg_plot(ctx.out / "figures" / "pr_slice.svg", prs_plot);

  PlotSpec lesion_plot;
  lesion_plot.title = "Subject DICE over lesion size";
  lesion_plot.x_label = "lesion voxels";
  lesion_plot.y_label = "DICE";
  PlotSeries dots;
  dots.label = "subjects";
  dots.draw_line = false;
  dots.draw_markers = true;
  for (const auto& row : breakdown.rows)
    dots.points.emplace_back(double(row.lesion_voxels), row.dice);
  lesion_plot.series.push_back(dots);
  if (breakdown.has_trend) {
    PlotSeries trend;
    trend.label = "cubic trend";
    trend.color = "#c1403d";
    for (int k = 0; k <= 60; ++k) {
      double x = breakdown.size_lo + (breakdown.size_hi - breakdown.size_lo) * k / 60.0;
      trend.points.emplace_back(
          x, polyval(breakdown.trend_coeffs, breakdown.size_lo, breakdown.size_hi, x));
    }
    lesion_plot.series.push_back(trend);
  }
  write_svg_plot(ctx.out / "figures" / "lesion_size.svg", lesion_plot);

  std::cout << "eval: DICE_D " << format_double(100.0 * dice_d) << "% DICE_S "
            << format_double(100.0 * dice_s.mean) << "+/-" << format_double(100.0 * dice_s.stddev)
            << "% AUPRC(voxel) " << format_double(100.0 * auprc_voxel) << "% AUPRC(slice) "
            << format_double(100.0 * auprc_slice) << "%\n";
  return 0;
}

int cmd_detect_slices(const RunContext& ctx, const fs::path& checkpoint) {
  apply_workers(ctx);
  fs::create_directories(ctx.out / "reports");
  Vae<float> model = model_from_checkpoint(load_checkpoint(checkpoint));
  EvalInputs test = residuals_for_split(ctx, model, SplitTag::test);
  if (test.records.empty()) throw std::runtime_error("no annotated test subjects");

  std::vector<float> pool_scores;
  std::vector<uint8_t> pool_labels;
  std::ostringstream csv;
  csv << "subject,slice,score,label\n";
  for (size_t i = 0; i < test.records.size(); ++i) {
    auto scores =
        slice_scores(test.residuals[i], test.records[i].mask, ctx.manifest.eval.slice_score);
    auto labels = slice_labels(*test.records[i].labels);
    for (size_t z = 0; z < scores.size(); ++z) {
      pool_scores.push_back((float)scores[z].score);
      pool_labels.push_back(labels[z]);
      csv << test.records[i].volume.subject_id << "," << z << ","
          << format_double(scores[z].score) << "," << int(labels[z]) << "\n";
    }
  }
  atomic_write_file(ctx.out / "reports" / "slice_detection.csv", csv.str());

  const double a = auprc_of(pool_scores, pool_labels);
  size_t pos = 0;
  for (uint8_t l : pool_labels) pos += l != 0;
  json report{{"auprc_slice_percent", 100.0 * a},
              {"slice_prevalence", double(pos) / double(pool_labels.size())},
              {"slices", pool_labels.size()}};
  atomic_write_file(ctx.out / "reports" / "slice_detection.json", report.dump(2) + "\n");
  std::cout << "detect-slices: AUPRC " << format_double(100.0 * a) << "% over "
            << pool_labels.size() << " slices\n";
  return 0;
}

}  // namespace voxuad
