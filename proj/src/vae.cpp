#include "voxuad/vae.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "voxuad/volume_io.hpp"

namespace voxuad {

using nlohmann::json;

void ModelConfig::validate() const {
  if (dims != 2 && dims != 3) throw std::invalid_argument("dims must be 2 or 3");
  if (stage_channels.empty()) throw std::invalid_argument("at least one encoder stage required");
  for (int c : stage_channels)
    if (c < 1) throw std::invalid_argument("stage channels must be positive");
  if (input_extent < (1 << stages()) || input_extent % (1 << stages()) != 0)
    throw std::invalid_argument("input extent must be divisible by 2^stages");
  if (resolved_latent() < 1) throw std::invalid_argument("latent size must be positive");
  if (!(kl_weight > 0.0)) throw std::invalid_argument("kl_weight must be positive");
}

template <typename T>
Vae<T>::Vae(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  build_layout();
  RngStream rng(stream_key(cfg_.seed, "init"));
  for (int i = 0; i < cfg_.stages(); ++i) {
    nn::init_uniform(params_.data() + enc_w_[i], enc_[i].weight_size(), enc_[i].kcol(), rng);
    // biases start at zero
  }
  const size_t nz = cfg_.resolved_latent();
  nn::init_uniform(params_.data() + mean_w_, nz * flat_size_, flat_size_, rng);
  nn::init_uniform(params_.data() + logvar_w_, nz * flat_size_, flat_size_, rng);
  nn::init_uniform(params_.data() + decfc_w_, flat_size_ * nz, nz, rng);
  for (int j = 0; j < cfg_.stages(); ++j) {
    size_t fan_in = size_t(dec_[j].co) * dec_[j].kx * dec_[j].ky * dec_[j].kz;
    nn::init_uniform(params_.data() + dec_w_[j], dec_[j].weight_size(), fan_in, rng);
  }
}

template <typename T>
void Vae<T>::build_layout() {
  const int S = cfg_.stages();
  const int base = cfg_.bottleneck_extent();
  enc_.clear();
  dec_.clear();
  for (int i = 0; i < S; ++i) {
    int extent = cfg_.input_extent >> i;
    int ci = i == 0 ? 1 : cfg_.stage_channels[i - 1];
    enc_.push_back(nn::halving_conv(cfg_.dims, extent, ci, cfg_.stage_channels[i]));
  }
  size_t bspatial = size_t(base) * base * (cfg_.dims == 3 ? base : 1);
  flat_size_ = size_t(cfg_.stage_channels[S - 1]) * bspatial;
  for (int j = 0; j < S; ++j) {
    int big_extent = base << (j + 1);
    int small_ch = cfg_.stage_channels[S - 1 - j];
    int big_ch = (j == S - 1) ? 1 : cfg_.stage_channels[S - 2 - j];
    dec_.push_back(nn::halving_conv(cfg_.dims, big_extent, big_ch, small_ch));
  }

  const size_t nz = cfg_.resolved_latent();
  size_t off = 0;
  auto add = [&](const std::string& name, size_t size) {
    segments_.push_back({name, off, size});
    size_t at = off;
    off += size;
    return at;
  };
  enc_w_.resize(S);
  enc_b_.resize(S);
  dec_w_.resize(S);
  dec_b_.resize(S);
  for (int i = 0; i < S; ++i) {
    enc_w_[i] = add("enc" + std::to_string(i) + ".w", enc_[i].weight_size());
    enc_b_[i] = add("enc" + std::to_string(i) + ".b", enc_[i].co);
  }
  mean_w_ = add("mean.w", nz * flat_size_);
  mean_b_ = add("mean.b", nz);
  logvar_w_ = add("logvar.w", nz * flat_size_);
  logvar_b_ = add("logvar.b", nz);
  decfc_w_ = add("decfc.w", flat_size_ * nz);
  decfc_b_ = add("decfc.b", flat_size_);
  for (int j = 0; j < S; ++j) {
    dec_w_[j] = add("dec" + std::to_string(j) + ".w", dec_[j].weight_size());
    dec_b_[j] = add("dec" + std::to_string(j) + ".b", dec_[j].ci);
  }
  params_.assign(off, T(0));
}

template <typename T>
typename Vae<T>::Workspace Vae<T>::make_workspace() const {
  Workspace ws;
  const int S = cfg_.stages();
  const size_t nz = cfg_.resolved_latent();
  ws.enc_act.resize(S + 1);
  ws.d_enc.resize(S + 1);
  ws.enc_act[0].resize(cfg_.input_size());
  ws.d_enc[0].resize(cfg_.input_size());
  size_t max_col = 0;
  for (int i = 0; i < S; ++i) {
    ws.enc_act[i + 1].resize(enc_[i].out_size());
    ws.d_enc[i + 1].resize(enc_[i].out_size());
    max_col = std::max(max_col, enc_[i].col_size());
  }
  ws.mean.resize(nz);
  ws.log_var.resize(nz);
  ws.z.resize(nz);
  ws.d_mean.resize(nz);
  ws.d_log_var.resize(nz);
  ws.d_z.resize(nz);
  ws.dec_act.resize(S + 1);
  ws.d_dec.resize(S + 1);
  ws.dec_act[0].resize(flat_size_);
  ws.d_dec[0].resize(flat_size_);
  for (int j = 0; j < S; ++j) {
    ws.dec_act[j + 1].resize(dec_[j].in_size());
    ws.d_dec[j + 1].resize(dec_[j].in_size());
    max_col = std::max(max_col, dec_[j].col_size());
  }
  ws.col.reserve(max_col);
  return ws;
}

template <typename T>
void Vae<T>::forward_internal(std::span<const T> x, std::span<const T> eps, bool sample,
                              Workspace& ws) const {
  if (x.size() != cfg_.input_size())
    throw std::invalid_argument("input size does not match model configuration");
  const int S = cfg_.stages();
  const size_t nz = cfg_.resolved_latent();
  const T* P = params_.data();

  std::copy(x.begin(), x.end(), ws.enc_act[0].begin());
  for (int i = 0; i < S; ++i) {
    nn::conv_forward(enc_[i], P + enc_w_[i], P + enc_b_[i], ws.enc_act[i].data(),
                     ws.enc_act[i + 1].data(), ws.col);
    nn::elu_forward(ws.enc_act[i + 1].data(), ws.enc_act[i + 1].data(), enc_[i].out_size());
  }
  nn::dense_forward(P + mean_w_, P + mean_b_, ws.enc_act[S].data(), ws.mean.data(), (int)nz,
                    (int)flat_size_);
  nn::dense_forward(P + logvar_w_, P + logvar_b_, ws.enc_act[S].data(), ws.log_var.data(),
                    (int)nz, (int)flat_size_);
  for (size_t i = 0; i < nz; ++i)
    ws.log_var[i] = (T)kLogVarBound * std::tanh(ws.log_var[i] / (T)kLogVarBound);

  if (sample) {
    if (eps.size() != nz) throw std::invalid_argument("eps size must equal latent size");
    for (size_t i = 0; i < nz; ++i)
      ws.z[i] = ws.mean[i] + std::exp(T(0.5) * ws.log_var[i]) * eps[i];
  } else {
    std::copy(ws.mean.begin(), ws.mean.end(), ws.z.begin());
  }

  nn::dense_forward(P + decfc_w_, P + decfc_b_, ws.z.data(), ws.dec_act[0].data(),
                    (int)flat_size_, (int)nz);
  nn::elu_forward(ws.dec_act[0].data(), ws.dec_act[0].data(), flat_size_);
  for (int j = 0; j < S; ++j) {
    nn::tconv_forward(dec_[j], P + dec_w_[j], P + dec_b_[j], ws.dec_act[j].data(),
                      ws.dec_act[j + 1].data(), ws.col);
    if (j < S - 1)
      nn::elu_forward(ws.dec_act[j + 1].data(), ws.dec_act[j + 1].data(), dec_[j].in_size());
    else
      nn::sigmoid_forward(ws.dec_act[j + 1].data(), ws.dec_act[j + 1].data(), dec_[j].in_size());
  }
}

template <typename T>
Latent<T> Vae<T>::encode(std::span<const T> x) const {
  if (x.size() != cfg_.input_size())
    throw std::invalid_argument("input size does not match model configuration");
  Workspace ws = make_workspace();
  const int S = cfg_.stages();
  const size_t nz = cfg_.resolved_latent();
  const T* P = params_.data();
  std::copy(x.begin(), x.end(), ws.enc_act[0].begin());
  for (int i = 0; i < S; ++i) {
    nn::conv_forward(enc_[i], P + enc_w_[i], P + enc_b_[i], ws.enc_act[i].data(),
                     ws.enc_act[i + 1].data(), ws.col);
    nn::elu_forward(ws.enc_act[i + 1].data(), ws.enc_act[i + 1].data(), enc_[i].out_size());
  }
  Latent<T> d;
  d.mean.resize(nz);
  d.log_variance.resize(nz);
  nn::dense_forward(P + mean_w_, P + mean_b_, ws.enc_act[S].data(), d.mean.data(), (int)nz,
                    (int)flat_size_);
  nn::dense_forward(P + logvar_w_, P + logvar_b_, ws.enc_act[S].data(), d.log_variance.data(),
                    (int)nz, (int)flat_size_);
  for (size_t i = 0; i < nz; ++i)
    d.log_variance[i] = (T)kLogVarBound * std::tanh(d.log_variance[i] / (T)kLogVarBound);
  return d;
}

template <typename T>
std::vector<T> Vae<T>::decode(std::span<const T> z) const {
  const size_t nz = cfg_.resolved_latent();
  if (z.size() != nz) throw std::invalid_argument("latent vector length must equal latent size");
  Workspace ws = make_workspace();
  const int S = cfg_.stages();
  const T* P = params_.data();
  nn::dense_forward(P + decfc_w_, P + decfc_b_, z.data(), ws.dec_act[0].data(), (int)flat_size_,
                    (int)nz);
  nn::elu_forward(ws.dec_act[0].data(), ws.dec_act[0].data(), flat_size_);
  for (int j = 0; j < S; ++j) {
    nn::tconv_forward(dec_[j], P + dec_w_[j], P + dec_b_[j], ws.dec_act[j].data(),
                      ws.dec_act[j + 1].data(), ws.col);
    if (j < S - 1)
      nn::elu_forward(ws.dec_act[j + 1].data(), ws.dec_act[j + 1].data(), dec_[j].in_size());
    else
      nn::sigmoid_forward(ws.dec_act[j + 1].data(), ws.dec_act[j + 1].data(), dec_[j].in_size());
  }
  return ws.dec_act[S];
}

template <typename T>
std::vector<T> Vae<T>::reparameterize(const Latent<T>& d, RngStream* rng) {
  if (d.mean.size() != d.log_variance.size())
    throw std::invalid_argument("latent mean/log-variance lengths differ");
  std::vector<T> z(d.mean.size());
  if (!rng) {
    std::copy(d.mean.begin(), d.mean.end(), z.begin());
    return z;
  }
  for (size_t i = 0; i < z.size(); ++i)
    z[i] = d.mean[i] + std::exp(T(0.5) * d.log_variance[i]) * (T)rng->normal();
  return z;
}

template <typename T>
Recon<T> Vae<T>::forward(std::span<const T> x, RngStream* rng) const {
  Workspace ws = make_workspace();
  const size_t nz = cfg_.resolved_latent();
  std::vector<T> eps;
  if (rng) {
    eps.resize(nz);
    for (auto& e : eps) e = (T)rng->normal();
  }
  forward_internal(x, eps, rng != nullptr, ws);
  Recon<T> r;
  r.output = ws.dec_act[cfg_.stages()];
  r.latent.mean = ws.mean;
  r.latent.log_variance = ws.log_var;
  r.sampled_z = ws.z;
  return r;
}

template <typename T>
LossTerms Vae<T>::loss(std::span<const T> target, const Recon<T>& r) const {
  if (target.size() != r.output.size())
    throw std::invalid_argument("target shape does not match reconstruction");
  LossTerms lt;
  double acc = 0.0;
  for (size_t i = 0; i < target.size(); ++i) acc += std::fabs(double(target[i]) - r.output[i]);
  lt.recon = acc / double(target.size());
  double kl = 0.0;
  for (size_t i = 0; i < r.latent.mean.size(); ++i) {
    double m = r.latent.mean[i], lv = r.latent.log_variance[i];
    kl += -0.5 * (1.0 + lv - m * m - std::exp(lv));
  }
  lt.kl = kl;
  lt.total = lt.recon + cfg_.kl_weight * lt.kl;
  return lt;
}

template <typename T>
LossTerms Vae<T>::forward_backward(std::span<const T> input, std::span<const T> target,
                                   std::span<const T> eps, std::vector<T>& grad,
                                   Workspace& ws) const {
  return forward_backward_scaled(input, target, eps, grad, ws, 1.0);
}

template <typename T>
LossTerms Vae<T>::forward_backward_scaled(std::span<const T> input, std::span<const T> target,
                                          std::span<const T> eps, std::vector<T>& grad,
                                          Workspace& ws, double scale) const {
  if (target.size() != cfg_.input_size())
    throw std::invalid_argument("target size does not match model configuration");
  if (grad.size() != params_.size()) throw std::invalid_argument("gradient buffer size mismatch");
  const bool sample = !eps.empty();
  forward_internal(input, eps, sample, ws);

  const int S = cfg_.stages();
  const size_t nz = cfg_.resolved_latent();
  const size_t N = cfg_.input_size();
  const T* P = params_.data();
  T* G = grad.data();
  const std::vector<T>& y = ws.dec_act[S];

  LossTerms lt;
  double acc = 0.0;
  for (size_t i = 0; i < N; ++i) acc += std::fabs(double(target[i]) - y[i]);
  lt.recon = acc / double(N);
  double kl = 0.0;
  for (size_t i = 0; i < nz; ++i) {
    double m = ws.mean[i], lv = ws.log_var[i];
    kl += -0.5 * (1.0 + lv - m * m - std::exp(lv));
  }
  lt.kl = kl;
  lt.total = lt.recon + cfg_.kl_weight * lt.kl;

  // d recon / d y, then through the output sigmoid
  std::vector<T>& dy = ws.d_dec[S];
  const T unit = (T)(scale / double(N));
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < (long long)N; ++i) {
    T diff = y[i] - target[i];
    dy[i] = diff > T(0) ? unit : (diff < T(0) ? -unit : T(0));
  }
  nn::sigmoid_backward(y.data(), dy.data(), dy.data(), N);

  for (int j = S - 1; j >= 0; --j) {
    nn::tconv_backward(dec_[j], P + dec_w_[j], ws.dec_act[j].data(), ws.d_dec[j + 1].data(),
                       G + dec_w_[j], G + dec_b_[j], ws.d_dec[j].data(), ws.col);
    if (j > 0)
      nn::elu_backward(ws.dec_act[j].data(), ws.d_dec[j].data(), ws.d_dec[j].data(),
                       dec_[j].out_size());
  }
  nn::elu_backward(ws.dec_act[0].data(), ws.d_dec[0].data(), ws.d_dec[0].data(), flat_size_);
  nn::dense_backward(P + decfc_w_, ws.z.data(), ws.d_dec[0].data(), G + decfc_w_, G + decfc_b_,
                     ws.d_z.data(), (int)flat_size_, (int)nz);

  const T w = (T)(cfg_.kl_weight * scale);
  for (size_t i = 0; i < nz; ++i) {
    ws.d_mean[i] = ws.d_z[i] + w * ws.mean[i];
    T dlv = T(0.5) * w * (std::exp(ws.log_var[i]) - T(1));
    if (sample) dlv += ws.d_z[i] * eps[i] * T(0.5) * std::exp(T(0.5) * ws.log_var[i]);
    // through the tanh squashing of the log-variance head
    T u = ws.log_var[i] / (T)kLogVarBound;
    ws.d_log_var[i] = dlv * (T(1) - u * u);
  }
  nn::dense_backward(P + mean_w_, ws.enc_act[S].data(), ws.d_mean.data(), G + mean_w_,
                     G + mean_b_, ws.d_enc[S].data(), (int)nz, (int)flat_size_);
  nn::dense_backward(P + logvar_w_, ws.enc_act[S].data(), ws.d_log_var.data(), G + logvar_w_,
                     G + logvar_b_, ws.d_enc[S].data(), (int)nz, (int)flat_size_,
                     /*accumulate_din=*/true);

  for (int i = S - 1; i >= 0; --i) {
    nn::elu_backward(ws.enc_act[i + 1].data(), ws.d_enc[i + 1].data(), ws.d_enc[i + 1].data(),
                     enc_[i].out_size());
    nn::conv_backward(enc_[i], P + enc_w_[i], ws.enc_act[i].data(), ws.d_enc[i + 1].data(),
                      G + enc_w_[i], G + enc_b_[i], i > 0 ? ws.d_enc[i].data() : nullptr, ws.col);
  }
  return lt;
}

template <typename T>
void Vae<T>::reconstruct(std::span<const T> x, std::vector<T>& out, Workspace& ws) const {
  forward_internal(x, {}, false, ws);
  out = ws.dec_act[cfg_.stages()];
}

template class Vae<float>;
template class Vae<double>;

// --- checkpoints -------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'V', 'X', 'U', 'A', 'D', 'C', 'K', '1'};
constexpr int kFormatVersion = 1;

json config_to_json(const ModelConfig& c) {
  return json{{"dims", c.dims},
              {"input_extent", c.input_extent},
              {"latent", c.resolved_latent()},
              {"stage_channels", c.stage_channels},
              {"kl_weight", c.kl_weight},
              {"seed", c.seed}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.dims = j.at("dims").get<int>();
  c.input_extent = j.at("input_extent").get<int>();
  c.latent = j.at("latent").get<int>();
  c.stage_channels = j.at("stage_channels").get<std::vector<int>>();
  c.kl_weight = j.at("kl_weight").get<double>();
  c.seed = j.at("seed").get<uint64_t>();
  return c;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Vae<float>& model,
                     const CheckpointInfo& info) {
  json header{{"version", kFormatVersion},
              {"config", config_to_json(model.config())},
              {"epoch", info.epoch},
              {"best_epoch", info.best_epoch},
              {"best_val_recon", info.best_val_recon},
              {"extra", info.extra},
              {"param_count", model.param_count()}};
  std::string header_str = header.dump();

  std::string blob;
  blob.reserve(16 + header_str.size() + model.param_count() * sizeof(float) + 8);
  blob.append(kMagic, sizeof(kMagic));
  uint64_t hlen = header_str.size();
  blob.append(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  blob.append(header_str);
  blob.append(reinterpret_cast<const char*>(model.parameters().data()),
              model.param_count() * sizeof(float));
  uint64_t digest = fnv1a64(blob.data() + sizeof(kMagic) + sizeof(hlen),
                            blob.size() - sizeof(kMagic) - sizeof(hlen));
  blob.append(reinterpret_cast<const char*>(&digest), sizeof(digest));
  atomic_write_file(path, blob);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (blob.size() < sizeof(kMagic) + 16 || std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a checkpoint file: " + path.string());
  uint64_t hlen;
  std::memcpy(&hlen, blob.data() + sizeof(kMagic), sizeof(hlen));
  size_t body_off = sizeof(kMagic) + sizeof(hlen);
  if (blob.size() < body_off + hlen + 8)
    throw std::runtime_error("truncated checkpoint: " + path.string());

  uint64_t stored_digest;
  std::memcpy(&stored_digest, blob.data() + blob.size() - 8, sizeof(stored_digest));
  uint64_t digest = fnv1a64(blob.data() + body_off, blob.size() - body_off - 8);
  if (digest != stored_digest)
    throw std::runtime_error("checkpoint digest mismatch (corrupt file): " + path.string());

  json header = json::parse(blob.substr(body_off, hlen));
  if (header.at("version").get<int>() != kFormatVersion)
    throw std::runtime_error("unsupported checkpoint version in " + path.string());

  LoadedCheckpoint ck;
  ck.info.config = config_from_json(header.at("config"));
  ck.info.epoch = header.value("epoch", 0);
  ck.info.best_epoch = header.value("best_epoch", 0);
  ck.info.best_val_recon = header.value("best_val_recon", 0.0);
  ck.info.extra = header.value("extra", "");
  size_t n = header.at("param_count").get<size_t>();
  size_t params_off = body_off + hlen;
  if (blob.size() - params_off - 8 != n * sizeof(float))
    throw std::runtime_error("checkpoint parameter block size mismatch: " + path.string());
  ck.params.resize(n);
  std::memcpy(ck.params.data(), blob.data() + params_off, n * sizeof(float));
  return ck;
}

Vae<float> model_from_checkpoint(const LoadedCheckpoint& ck) {
  Vae<float> model(ck.info.config);
  if (model.param_count() != ck.params.size())
    throw std::runtime_error("checkpoint does not match the configured architecture");
  model.parameters() = ck.params;
  return model;
}

}  // namespace voxuad
