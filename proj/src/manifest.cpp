#include "voxuad/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace voxuad {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& context,
                const std::set<std::string>& allowed) {
  if (!j.is_object()) throw std::invalid_argument("manifest: " + context + " must be an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key))
      throw std::invalid_argument("manifest: unknown key '" + key + "' in " + context);
  }
}

Shape3 shape_from(const json& j, const std::string& context) {
  if (!j.is_array() || j.size() != 3)
    throw std::invalid_argument("manifest: " + context + " must be [nx, ny, nz]");
  return Shape3{j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
}

template <typename T>
std::pair<T, T> range_from(const json& j, const std::string& context) {
  if (!j.is_array() || j.size() != 2)
    throw std::invalid_argument("manifest: " + context + " must be [min, max]");
  return {j[0].get<T>(), j[1].get<T>()};
}

PhantomBlock phantoms_from(const json& j) {
  check_keys(j, "data.phantoms",
             {"n_healthy", "n_lesioned", "shape", "tissue_layers", "texture_amplitude",
              "lesion_radius", "lesion_offset"});
  PhantomBlock b;
  b.n_healthy = j.at("n_healthy").get<int>();
  b.n_lesioned = j.at("n_lesioned").get<int>();
  if (j.contains("shape")) b.ranges.shape = shape_from(j["shape"], "data.phantoms.shape");
  if (j.contains("tissue_layers"))
    std::tie(b.ranges.tissue_layers_min, b.ranges.tissue_layers_max) =
        range_from<int>(j["tissue_layers"], "data.phantoms.tissue_layers");
  if (j.contains("texture_amplitude"))
    std::tie(b.ranges.texture_amplitude_min, b.ranges.texture_amplitude_max) =
        range_from<double>(j["texture_amplitude"], "data.phantoms.texture_amplitude");
  if (j.contains("lesion_radius"))
    std::tie(b.ranges.lesion_radius_min, b.ranges.lesion_radius_max) =
        range_from<double>(j["lesion_radius"], "data.phantoms.lesion_radius");
  if (j.contains("lesion_offset"))
    std::tie(b.ranges.lesion_offset_min, b.ranges.lesion_offset_max) =
        range_from<double>(j["lesion_offset"], "data.phantoms.lesion_offset");
  return b;
}

ErasingSpec erasing_from(const json& j) {
  check_keys(j, "train.erasing",
             {"strategy", "fill", "probability", "size_budget", "max_regions", "slice_run"});
  ErasingSpec e;
  if (j.contains("strategy")) e.strategy = erase_strategy_from_string(j["strategy"].get<std::string>());
  if (j.contains("fill")) e.fill = erase_fill_from_string(j["fill"].get<std::string>());
  if (j.contains("probability")) e.probability = j["probability"].get<double>();
  if (j.contains("size_budget"))
    std::tie(e.min_frac, e.max_frac) = range_from<double>(j["size_budget"], "train.erasing.size_budget");
  if (j.contains("max_regions")) e.max_regions = j["max_regions"].get<int>();
  if (j.contains("slice_run"))
    std::tie(e.slice_run_min, e.slice_run_max) = range_from<int>(j["slice_run"], "train.erasing.slice_run");
  return e;
}

}  // namespace

Seeds Seeds::derive(uint64_t master, const std::optional<uint64_t>& split,
                    const std::optional<uint64_t>& model, const std::optional<uint64_t>& erasing,
                    const std::optional<uint64_t>& batch, const std::optional<uint64_t>& phantom) {
  Seeds s;
  s.master = master;
  s.split = split.value_or(stream_key(master, "seed.split"));
  s.model = model.value_or(stream_key(master, "seed.model"));
  s.erasing = erasing.value_or(stream_key(master, "seed.erasing"));
  s.batch = batch.value_or(stream_key(master, "seed.batch"));
  s.phantom = phantom.value_or(stream_key(master, "seed.phantom"));
  return s;
}

void Manifest::apply_master_seed(uint64_t master) {
  seeds = Seeds::derive(master, seed_split, seed_model, seed_erasing, seed_batch, seed_phantom);
  model.seed = seeds.model;
  train.seed = seeds.batch;
  train.erasing.seed = seeds.erasing;
}

ExperimentName parse_experiment_name(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  ExperimentName e;
  if (s.rfind("2d-", 0) == 0)
    e.dims = 2;
  else if (s.rfind("3d-", 0) == 0)
    e.dims = 3;
  else
    throw std::invalid_argument("experiment name must start with 2d- or 3d-: " + name);
  std::string rest = s.substr(3);
  if (rest == "none") {
    e.strategy = EraseStrategy::none;
    return e;
  }
  auto cut = rest.rfind('-');
  if (cut == std::string::npos)
    throw std::invalid_argument("experiment name needs a fill suffix (-0 or -n): " + name);
  std::string fill = rest.substr(cut + 1);
  e.fill = erase_fill_from_string(fill);
  e.strategy = erase_strategy_from_string(rest.substr(0, cut));
  if (strategy_dims(e.strategy) != e.dims)
    throw std::invalid_argument("experiment name mixes dimensionalities: " + name);
  return e;
}

Manifest parse_manifest_text(const std::string& text) {
  json j = json::parse(text);
  check_keys(j, "manifest",
             {"data", "preprocess", "model", "train", "eval", "seeds", "output_dir"});
  Manifest m;
  m.raw_json = text;

  if (!j.contains("data")) throw std::invalid_argument("manifest: missing data section");
  check_keys(j["data"], "data", {"corpus", "phantoms"});
  if (j["data"].contains("corpus")) m.data.corpus_index = j["data"]["corpus"].get<std::string>();
  if (j["data"].contains("phantoms")) m.data.phantoms = phantoms_from(j["data"]["phantoms"]);
  if (m.data.corpus_index.empty() && !m.data.phantoms)
    throw std::invalid_argument("manifest: data needs either corpus or phantoms");

  if (j.contains("preprocess")) {
    const json& p = j["preprocess"];
    check_keys(p, "preprocess",
               {"target_spacing_mm", "crop_margin", "pad_shape", "output_shape",
                "clip_percentile"});
    if (p.contains("target_spacing_mm"))
      m.preprocess.target_spacing_mm = p["target_spacing_mm"].get<double>();
    if (p.contains("crop_margin")) m.preprocess.crop_margin = p["crop_margin"].get<int>();
    if (p.contains("pad_shape"))
      m.preprocess.pad_shape = shape_from(p["pad_shape"], "preprocess.pad_shape");
    if (p.contains("output_shape"))
      m.preprocess.output_shape = shape_from(p["output_shape"], "preprocess.output_shape");
    if (p.contains("clip_percentile"))
      m.preprocess.clip_percentile = p["clip_percentile"].get<double>();
  }

  if (j.contains("model")) {
    const json& mo = j["model"];
    check_keys(mo, "model", {"dims", "input_extent", "latent", "stage_channels", "kl_weight"});
    if (mo.contains("dims")) m.model.dims = mo["dims"].get<int>();
    if (mo.contains("input_extent")) m.model.input_extent = mo["input_extent"].get<int>();
    if (mo.contains("latent")) m.model.latent = mo["latent"].get<int>();
    if (mo.contains("stage_channels"))
      m.model.stage_channels = mo["stage_channels"].get<std::vector<int>>();
    if (mo.contains("kl_weight")) m.model.kl_weight = mo["kl_weight"].get<double>();
  }

  if (j.contains("train")) {
    const json& t = j["train"];
    check_keys(t, "train",
               {"experiment", "batch_size", "learning_rate", "max_epochs", "early_stop_patience",
                "train_fraction", "val_fraction", "data_fraction", "erasing"});
    if (t.contains("experiment")) {
      m.experiment_name = t["experiment"].get<std::string>();
      ExperimentName e = parse_experiment_name(m.experiment_name);
      m.model.dims = e.dims;
      m.train.erasing.strategy = e.strategy;
      m.train.erasing.fill = e.fill;
    }
    if (t.contains("erasing")) {
      ErasingSpec base = erasing_from(t["erasing"]);
      if (!m.experiment_name.empty()) {
        // the experiment name pins strategy and fill; the block tunes the rest
        base.strategy = m.train.erasing.strategy;
        base.fill = m.train.erasing.fill;
      }
      m.train.erasing = base;
    }
    if (t.contains("batch_size")) m.train.batch_size = t["batch_size"].get<int>();
    if (t.contains("learning_rate")) m.train.learning_rate = t["learning_rate"].get<double>();
    if (t.contains("max_epochs")) m.train.max_epochs = t["max_epochs"].get<int>();
    if (t.contains("early_stop_patience"))
      m.train.early_stop_patience = t["early_stop_patience"].get<int>();
    if (t.contains("train_fraction")) m.train_fraction = t["train_fraction"].get<double>();
    if (t.contains("val_fraction")) m.val_fraction = t["val_fraction"].get<double>();
    if (t.contains("data_fraction")) m.train.data_fraction = t["data_fraction"].get<double>();
  }

  if (j.contains("eval")) {
    const json& e = j["eval"];
    check_keys(e, "eval",
               {"erosion_radius", "median_kernel", "search_iterations", "slice_score",
                "lesion_val_fraction", "save_residuals"});
    if (e.contains("erosion_radius")) m.eval.erosion_radius = e["erosion_radius"].get<int>();
    if (e.contains("median_kernel")) m.eval.median_kernel = e["median_kernel"].get<int>();
    if (e.contains("search_iterations"))
      m.eval.search_iterations = e["search_iterations"].get<int>();
    if (e.contains("slice_score")) {
      std::string s = e["slice_score"].get<std::string>();
      if (s == "mean")
        m.eval.slice_score = SliceReduction::mean;
      else if (s == "sum")
        m.eval.slice_score = SliceReduction::sum;
      else
        throw std::invalid_argument("manifest: eval.slice_score must be mean or sum");
    }
    if (e.contains("lesion_val_fraction"))
      m.eval.lesion_val_fraction = e["lesion_val_fraction"].get<double>();
    if (e.contains("save_residuals")) m.eval.save_residuals = e["save_residuals"].get<bool>();
  }

  uint64_t master = 0;
  if (j.contains("seeds")) {
    const json& s = j["seeds"];
    check_keys(s, "seeds", {"master", "split", "model", "erasing", "batch", "phantom"});
    if (s.contains("master")) master = s["master"].get<uint64_t>();
    if (s.contains("split")) m.seed_split = s["split"].get<uint64_t>();
    if (s.contains("model")) m.seed_model = s["model"].get<uint64_t>();
    if (s.contains("erasing")) m.seed_erasing = s["erasing"].get<uint64_t>();
    if (s.contains("batch")) m.seed_batch = s["batch"].get<uint64_t>();
    if (s.contains("phantom")) m.seed_phantom = s["phantom"].get<uint64_t>();
  }
  m.apply_master_seed(master);

  if (j.contains("output_dir")) m.output_dir = j["output_dir"].get<std::string>();
  if (m.output_dir.empty()) throw std::invalid_argument("manifest: output_dir is required");

  m.model.validate();
  m.train.validate();
  if (!(m.train_fraction > 0.0) || !(m.val_fraction > 0.0) ||
      m.train_fraction + m.val_fraction > 1.0 + 1e-12)
    throw std::invalid_argument("manifest: train/val fractions must be positive, sum <= 1");
  if (!(m.eval.lesion_val_fraction >= 0.0 && m.eval.lesion_val_fraction <= 1.0))
    throw std::invalid_argument("manifest: eval.lesion_val_fraction must lie in [0, 1]");
  return m;
}

Manifest parse_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest_text(ss.str());
}

}  // namespace voxuad
