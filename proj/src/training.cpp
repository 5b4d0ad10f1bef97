#include "voxuad/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

namespace voxuad {

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
  if (early_stop_patience < 1) throw std::invalid_argument("early_stop_patience must be >= 1");
  if (!(data_fraction > 0.0 && data_fraction <= 1.0))
    throw std::invalid_argument("data_fraction must lie in (0, 1]");
  erasing.validate();
}

Adam::Adam(size_t n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(n, 0.0f), v_(n, 0.0f) {}

void Adam::step(std::vector<float>& params, const std::vector<float>& grad) {
  ++t_;
  const double alpha = lr_ * std::sqrt(1.0 - std::pow(beta2_, t_)) / (1.0 - std::pow(beta1_, t_));
  const float b1 = (float)beta1_, b2 = (float)beta2_;
  const float a = (float)alpha, e = (float)eps_;
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < (long long)params.size(); ++i) {
    float g = grad[i];
    m_[i] = b1 * m_[i] + (1.0f - b1) * g;
    v_[i] = b2 * v_[i] + (1.0f - b2) * g * g;
    params[i] -= a * m_[i] / (std::sqrt(v_[i]) + e);
  }
}

namespace {

template <typename T>
void shuffle_indices(std::vector<T>& v, RngStream& rng) {
  for (size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[(size_t)rng.uniform_int(0, (int64_t)i - 1)]);
}

int rounded_count(double frac, size_t n) {
  return (int)std::llround(frac * double(n));
}

}  // namespace

void split_dataset(std::vector<SubjectRecord>& records, double train_frac, double val_frac,
                   uint64_t seed) {
  if (records.empty()) throw std::invalid_argument("cannot split an empty record list");
  if (!(train_frac > 0.0) || !(val_frac > 0.0) || train_frac + val_frac > 1.0 + 1e-12)
    throw std::invalid_argument("split fractions must be positive and sum to at most 1");

  // group by stratum; a single unnamed group when no record carries one
  std::map<std::string, std::vector<size_t>> strata;
  for (size_t i = 0; i < records.size(); ++i) strata[records[i].stratum].push_back(i);

  RngStream rng(stream_key(seed, "split"));
  for (auto& [name, members] : strata) {
    shuffle_indices(members, rng);
    int n_train = std::min<int>(rounded_count(train_frac, members.size()), (int)members.size());
    int n_val = std::min<int>(rounded_count(val_frac, members.size()),
                              (int)members.size() - n_train);
    for (size_t k = 0; k < members.size(); ++k) {
      SplitTag tag = k < (size_t)n_train            ? SplitTag::train
                     : k < (size_t)(n_train + n_val) ? SplitTag::val
                                                     : SplitTag::test;
      records[members[k]].split_tag = tag;
    }
  }
}

std::vector<size_t> subsample_indices(size_t n, double fraction, uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw std::invalid_argument("fraction must lie in (0, 1]");
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  RngStream rng(stream_key(seed, "subsample"));
  shuffle_indices(order, rng);
  size_t keep = (size_t)std::ceil(fraction * double(n));
  order.resize(std::min(keep, n));
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<SubjectRecord> subsample_training(const std::vector<SubjectRecord>& records,
                                              double fraction, uint64_t seed) {
  std::vector<size_t> train_pos;
  for (size_t i = 0; i < records.size(); ++i)
    if (records[i].split_tag == SplitTag::train) train_pos.push_back(i);
  std::vector<size_t> kept = subsample_indices(train_pos.size(), fraction, seed);
  std::vector<bool> keep_train(records.size(), false);
  for (size_t k : kept) keep_train[train_pos[k]] = true;

  std::vector<SubjectRecord> out;
  out.reserve(records.size());
  for (size_t i = 0; i < records.size(); ++i)
    if (records[i].split_tag != SplitTag::train || keep_train[i]) out.push_back(records[i]);
  return out;
}

std::vector<float> extract_axial_slice(const Volume& v, int z) {
  std::vector<float> s(size_t(v.shape.nx) * v.shape.ny);
  for (int x = 0; x < v.shape.nx; ++x)
    for (int y = 0; y < v.shape.ny; ++y) s[size_t(x) * v.shape.ny + y] = v.at(x, y, z);
  return s;
}

bool mask_slice_nonempty(const BrainMask& m, int z) {
  for (int x = 0; x < m.shape.nx; ++x)
    for (int y = 0; y < m.shape.ny; ++y)
      if (m.at(x, y, z)) return true;
  return false;
}

Volume slice_as_volume(const Volume& v, int z) {
  Volume s;
  s.shape = {v.shape.nx, v.shape.ny, 1};
  s.spacing = v.spacing;
  s.subject_id = v.subject_id;
  s.data = extract_axial_slice(v, z);
  return s;
}

std::vector<SampleRef> training_pool(const std::vector<SubjectRecord>& records, int dims,
                                     const std::vector<size_t>& subject_indices) {
  std::vector<SampleRef> pool;
  for (size_t idx : subject_indices) {
    const SubjectRecord& r = records[idx];
    if (r.split_tag == SplitTag::test)
      throw std::logic_error("test-tagged record reached the training pool");
    if (dims == 3) {
      pool.push_back({(int)idx, -1});
    } else {
      for (int z = 0; z < r.volume.shape.nz; ++z)
        if (mask_slice_nonempty(r.mask, z)) pool.push_back({(int)idx, z});
    }
  }
  return pool;
}

std::vector<std::vector<SampleRef>> make_batches(const std::vector<SampleRef>& pool,
                                                 int batch_size, uint64_t seed, int epoch) {
  std::vector<SampleRef> shuffled = pool;
  RngStream rng(stream_key(seed, "batches", (uint64_t)epoch));
  shuffle_indices(shuffled, rng);
  std::vector<std::vector<SampleRef>> batches;
  for (size_t i = 0; i < shuffled.size(); i += batch_size) {
    size_t end = std::min(shuffled.size(), i + batch_size);
    batches.emplace_back(shuffled.begin() + i, shuffled.begin() + end);
  }
  return batches;
}

Batch materialize_batch(const std::vector<SubjectRecord>& records,
                        const std::vector<SampleRef>& refs, const ErasingSpec& erasing,
                        int epoch) {
  Batch batch;
  batch.refs = refs;
  batch.inputs.reserve(refs.size());
  batch.targets.reserve(refs.size());
  for (const SampleRef& ref : refs) {
    const SubjectRecord& r = records[ref.subject];
    Volume sample = ref.slice < 0 ? r.volume : slice_as_volume(r.volume, ref.slice);
    RngStream rng(stream_key(erasing.seed, "erase", r.volume.subject_id,
                             (uint64_t)(ref.slice + 1), (uint64_t)epoch));
    ErasedSample erased = apply_erasing(sample, erasing, rng);
    batch.inputs.push_back(std::move(erased.input.data));
    batch.targets.push_back(std::move(erased.target.data));
  }
  return batch;
}

double validation_recon(const Vae<float>& model, const SubjectRecord& record,
                        Vae<float>::Workspace& ws) {
  const Volume& v = record.volume;
  const BrainMask& m = record.mask;
  double err = 0.0;
  size_t in_mask = count_foreground(m.data);
  if (in_mask == 0) return 0.0;

  std::vector<float> recon;
  if (model.config().dims == 3) {
    model.reconstruct(std::span<const float>(v.data), recon, ws);
    for (size_t i = 0; i < v.data.size(); ++i)
      if (m.data[i]) err += std::fabs(double(v.data[i]) - recon[i]);
  } else {
    for (int z = 0; z < v.shape.nz; ++z) {
      if (!mask_slice_nonempty(m, z)) continue;
      std::vector<float> slice = extract_axial_slice(v, z);
      model.reconstruct(slice, recon, ws);
      for (int x = 0; x < v.shape.nx; ++x)
        for (int y = 0; y < v.shape.ny; ++y)
          if (m.at(x, y, z))
            err += std::fabs(double(v.at(x, y, z)) - recon[size_t(x) * v.shape.ny + y]);
    }
  }
  return err / double(in_mask);
}

TrainResult train(const std::vector<SubjectRecord>& records, const ModelConfig& model_cfg,
                  const TrainConfig& train_cfg, const EpochCallback& on_epoch) {
  model_cfg.validate();
  train_cfg.validate();
  if (train_cfg.erasing.strategy != EraseStrategy::none &&
      strategy_dims(train_cfg.erasing.strategy) != model_cfg.dims)
    throw std::invalid_argument("erasing strategy dimensionality does not match the model");

  std::vector<size_t> train_subjects, val_subjects;
  for (size_t i = 0; i < records.size(); ++i) {
    if (records[i].split_tag == SplitTag::train) train_subjects.push_back(i);
    // epoch selection runs on healthy validation subjects only
    if (records[i].split_tag == SplitTag::val && !has_anomaly_labels(records[i]))
      val_subjects.push_back(i);
  }
  if (train_cfg.data_fraction < 1.0) {
    std::vector<size_t> kept =
        subsample_indices(train_subjects.size(), train_cfg.data_fraction, train_cfg.seed);
    std::vector<size_t> reduced;
    for (size_t k : kept) reduced.push_back(train_subjects[k]);
    train_subjects = std::move(reduced);
  }
  if (train_subjects.empty()) throw std::invalid_argument("no train-tagged records");
  if (val_subjects.empty())
    throw std::invalid_argument("no healthy validation records for epoch selection");

  Vae<float> model(model_cfg);
  auto ws = model.make_workspace();
  std::vector<float> grad(model.param_count(), 0.0f);
  Adam adam(model.param_count(), train_cfg.learning_rate, train_cfg.beta1, train_cfg.beta2,
            train_cfg.adam_eps);
  const size_t nz = model_cfg.resolved_latent();

  std::vector<SampleRef> pool = training_pool(records, model_cfg.dims, train_subjects);

  TrainResult result{std::move(model), TrainState{}};
  std::vector<float> best_params = result.model.parameters();

  for (int epoch = 1; epoch <= train_cfg.max_epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    double sum_total = 0.0, sum_recon = 0.0, sum_kl = 0.0;
    size_t n_samples = 0;

    auto batches = make_batches(pool, train_cfg.batch_size, train_cfg.seed, epoch);
    for (const auto& refs : batches) {
      Batch batch = materialize_batch(records, refs, train_cfg.erasing, epoch);
      std::fill(grad.begin(), grad.end(), 0.0f);
      const double scale = 1.0 / double(refs.size());
      std::vector<float> eps(nz);
      for (size_t s = 0; s < refs.size(); ++s) {
        const SubjectRecord& r = records[refs[s].subject];
        RngStream eps_rng(stream_key(train_cfg.seed, "eps", r.volume.subject_id,
                                     (uint64_t)(refs[s].slice + 1), (uint64_t)epoch));
        for (auto& e : eps) e = (float)eps_rng.normal();
        LossTerms lt = result.model.forward_backward_scaled(batch.inputs[s], batch.targets[s],
                                                            eps, grad, ws, scale);
        sum_total += lt.total;
        sum_recon += lt.recon;
        sum_kl += lt.kl;
        ++n_samples;
      }
      if (!std::isfinite(sum_total))
        throw TrainingDivergedError(epoch, sum_total, "non-finite training loss at epoch " +
                                                          std::to_string(epoch));
      adam.step(result.model.parameters(), grad);
    }

    double val = 0.0;
    for (size_t idx : val_subjects) val += validation_recon(result.model, records[idx], ws);
    val /= double(val_subjects.size());
    if (!std::isfinite(val))
      throw TrainingDivergedError(epoch, val,
                                  "non-finite validation loss at epoch " + std::to_string(epoch));

    EpochStats stats;
    stats.epoch = epoch;
    stats.total = sum_total / double(n_samples);
    stats.recon = sum_recon / double(n_samples);
    stats.kl = sum_kl / double(n_samples);
    stats.val_recon = val;
    stats.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.state.loss_history.push_back(stats);
    result.state.epoch = epoch;

    if (val < result.state.best_val_recon) {
      result.state.best_val_recon = val;
      result.state.best_epoch = epoch;
      best_params = result.model.parameters();
    }
    if (on_epoch) on_epoch(stats);
    if (epoch - result.state.best_epoch >= train_cfg.early_stop_patience) break;
  }

  result.model.parameters() = best_params;
  return result;
}

}  // namespace voxuad
