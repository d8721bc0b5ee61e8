#include <lasers/autoencoder.hpp>

#include <cmath>
#include <iostream>
#include <sstream>

namespace lasers {

AffineCoder AffineCoder::raw_patch() { return AffineCoder{}; }

AffineCoder AffineCoder::affine(int input_dim, int latent_dim, std::uint64_t seed) {
  if (input_dim < 1 || latent_dim < 1) throw ConfigError("AffineCoder: dims must be positive");
  AffineCoder c;
  c.mode = CoderMode::Affine;
  Rng rng(seed);
  const double enc_scale = 1.0 / std::sqrt(double(input_dim));
  const double dec_scale = 1.0 / std::sqrt(double(latent_dim));
  c.enc_w = Matrix::Zero(latent_dim, input_dim);
  c.dec_w = Matrix::Zero(input_dim, latent_dim);
  for (int i = 0; i < latent_dim; ++i)
    for (int j = 0; j < input_dim; ++j) c.enc_w(i, j) = enc_scale * rng.normal();
  for (int i = 0; i < input_dim; ++i)
    for (int j = 0; j < latent_dim; ++j) c.dec_w(i, j) = dec_scale * rng.normal();
  c.enc_b = Vector::Zero(latent_dim);
  c.dec_b = Vector::Zero(input_dim);
  return c;
}

SignalMatrix encode(const SignalMatrix& x, const AffineCoder& c) {
  if (c.mode == CoderMode::RawPatch) return x;
  require(x.rows() == c.enc_w.cols(), "encode: input dim mismatch");
  return (c.enc_w * x).colwise() + c.enc_b;
}

SignalMatrix decode(const SignalMatrix& zhat, const AffineCoder& c) {
  if (c.mode == CoderMode::RawPatch) return zhat;
  require(zhat.rows() == c.dec_w.cols(), "decode: latent dim mismatch");
  return (c.dec_w * zhat).colwise() + c.dec_b;
}

void TrainConfig::validate() const {
  if (k < 1 || l < 1) throw ConfigError("config: k and l must be >= 1");
  if (s < 1 || s > k) throw ConfigError("config: need 1 <= s <= k");
  if (lr <= 0.0) throw ConfigError("config: lr must be > 0");
  if (beta < 0.0 || eta < 0.0) throw ConfigError("config: beta and eta must be >= 0");
  if (ema_decay < 0.0 || ema_decay >= 1.0) throw ConfigError("config: ema_decay must be in [0, 1)");
  if (epochs < 0) throw ConfigError("config: epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
}

CoderGradients coder_gradients(const SignalMatrix& batch, const AffineCoder& coder,
                               const Bottleneck& bn, const TrainConfig& cfg) {
  CoderGradients g;
  g.z_e = encode(batch, coder);
  const LatentTensor z_t = tensor_from_columns(g.z_e);
  g.bottleneck_out = bn.forward(z_t);
  const LatentTensor st = straight_through(z_t, g.bottleneck_out.zhat);
  const SignalMatrix zhat = columns_from_tensor(st);
  const SignalMatrix xhat = decode(zhat, coder);

  g.metrics.recon_mse = mse(batch, xhat);
  g.metrics.codebook_term = g.bottleneck_out.codebook_term;
  g.metrics.commitment_term = g.bottleneck_out.commitment_term;
  g.metrics.objective = cfg.eta * g.metrics.recon_mse +
                        dl_objective(0.0, g.metrics.codebook_term, g.metrics.commitment_term,
                                     cfg.beta);

  if (coder.mode == CoderMode::Affine) {
    const double m_n = double(batch.size());
    const double l_n = double(g.z_e.size());
    const SignalMatrix d_xhat = (2.0 * cfg.eta / m_n) * (xhat - batch);
    g.dec_w = d_xhat * zhat.transpose();
    g.dec_b = d_xhat.rowwise().sum();
    // Straight-through: the bottleneck Jacobian is replaced by the identity,
    // so the reconstruction gradient lands on z_e directly. The commitment
    // term adds the pull toward the (stop-gradded) compressed latents.
    SignalMatrix d_z = coder.dec_w.transpose() * d_xhat;
    d_z += (2.0 * cfg.beta / l_n) * (g.z_e - zhat);
    g.enc_w = d_z * batch.transpose();
    g.enc_b = d_z.rowwise().sum();
  }
  return g;
}

EvalMetrics evaluate(const SignalMatrix& data, const AffineCoder& coder, const Bottleneck& bn,
                     int threads) {
  Bottleneck local = bn;
  local.threads = threads;
  const SignalMatrix z_e = encode(data, coder);
  const LatentTensor z_t = tensor_from_columns(z_e);
  const BottleneckOutput out = local.forward(z_t);
  const SignalMatrix xhat = decode(columns_from_tensor(out.zhat), coder);

  EvalMetrics m;
  m.mse = mse(data, xhat);
  m.psnr = psnr_from_mse(m.mse);
  m.latent_mse = out.codebook_term;
  if (!out.usage.empty()) {
    const UsageHistogram h = UsageHistogram::from_counts(out.usage);
    if (h.total > 0) {
      m.perplexity = perplexity(h);
      m.utilization = utilization(h);
    }
  }
  return m;
}

Trainer::Trainer(TrainConfig cfg, const SignalMatrix& init_data, int threads)
    : cfg_(cfg), threads_(threads) {
  cfg_.validate();
  const int input_dim = int(init_data.rows());
  if (init_data.cols() < 1) throw DataError("Trainer: empty dataset");

  if (cfg_.coder == CoderMode::RawPatch) {
    coder_ = AffineCoder::raw_patch();
    cfg_.l = input_dim;  // the coding units themselves are the latents
  } else {
    coder_ = AffineCoder::affine(input_dim, cfg_.l, cfg_.seed);
  }

  if (cfg_.kind == BottleneckKind::Identity) {
    bottleneck_ = Bottleneck::identity();
    bottleneck_.threads = threads_;
    return;
  }

  // Initialize the codebook/dictionary in coding-unit space.
  const SignalMatrix latents = encode(init_data, coder_);
  const SignalMatrix units = unfold(tensor_from_columns(latents), cfg_.geometry);
  const int unit_dim = int(units.rows());
  Dictionary d;
  if (cfg_.init == InitStrategy::DataSample && units.cols() >= cfg_.k) {
    d = init_dictionary(cfg_.k, unit_dim, InitStrategy::DataSample, cfg_.seed, &units);
  } else {
    if (cfg_.init == InitStrategy::DataSample)
      std::cerr << "warning: data-sample init needs >= " << cfg_.k
                << " coding units, using gaussian init\n";
    d = init_dictionary(cfg_.k, unit_dim, InitStrategy::GaussianNormalized, cfg_.seed);
  }

  if (cfg_.kind == BottleneckKind::VQ) {
    bottleneck_ = Bottleneck::vq(Codebook::from_dictionary(std::move(d), cfg_.ema_decay,
                                                           cfg_.ema_epsilon));
  } else {
    if (cfg_.s > std::min(cfg_.k, unit_dim))
      throw ConfigError("config: need s <= min(K, coding unit dim)");
    bottleneck_ = Bottleneck::dl(std::move(d), cfg_.s, cfg_.geometry);
    dict_adam_ = AdamState::zeros(cfg_.k, unit_dim);
    bcd_state_ = OnlineDLState::init(cfg_.k, unit_dim, 0);
  }
  bottleneck_.threads = threads_;
  epoch_usage_.assign(std::size_t(cfg_.k), 0);
}

void Trainer::apply_bottleneck_updates(const SignalMatrix& z_e, const BottleneckOutput& out) {
  const SignalMatrix units = unfold(tensor_from_columns(z_e), bottleneck_.geometry);
  if (cfg_.kind == BottleneckKind::VQ) {
    ema_update(bottleneck_.codebook, units, *out.assignment);
    if (cfg_.vq_codebook_grad) {
      // One-hot codes make the codebook-term gradient reuse the dictionary
      // gradient assembly.
      SparseCode one_hot;
      one_hot.k = bottleneck_.codebook.k();
      one_hot.columns.resize(out.assignment->indices.size());
      for (std::size_t i = 0; i < out.assignment->indices.size(); ++i) {
        one_hot.columns[i].support = {out.assignment->indices[i]};
        one_hot.columns[i].coeffs = {1.0};
      }
      if (dict_adam_.m.size() == 0)
        dict_adam_ = AdamState::zeros(bottleneck_.codebook.k(), bottleneck_.codebook.l());
      Matrix grad = dict_gradient(bottleneck_.codebook.embedding, units, one_hot);
      grad /= double(units.size());
      AdamParams params;
      params.lr = cfg_.lr;
      adam_step(bottleneck_.codebook.embedding.atoms, grad, dict_adam_, params);
    }
    return;
  }
  if (cfg_.kind != BottleneckKind::DL) return;
  if (cfg_.update_rule == UpdateRule::Gradient) {
    Matrix grad = dict_gradient(bottleneck_.dictionary, units, *out.code);
    grad /= double(units.size());  // codebook term is mean-reduced
    AdamParams params;
    params.lr = cfg_.lr;
    apply_gradient_update(bottleneck_.dictionary, grad, dict_adam_, params);
  } else {
    online_bcd_update(bcd_state_, bottleneck_.dictionary, units, *out.code);
  }
}

StepMetrics Trainer::train_step(const SignalMatrix& batch) {
  const CoderGradients g = coder_gradients(batch, coder_, bottleneck_, cfg_);
  ++step_count_;

  if (!std::isfinite(g.metrics.objective)) {
    std::ostringstream oss;
    oss << "training diverged at step " << step_count_ << ": objective=" << g.metrics.objective
        << " recon=" << g.metrics.recon_mse << " codebook=" << g.metrics.codebook_term;
    throw DivergenceError(oss.str());
  }

  if (coder_.mode == CoderMode::Affine) {
    AdamParams params;
    params.lr = cfg_.lr;
    adam_step(coder_.enc_w, g.enc_w, enc_w_adam_, params);
    adam_step(coder_.dec_w, g.dec_w, dec_w_adam_, params);
    adam_step(coder_.enc_b, g.enc_b, enc_b_adam_, params);
    adam_step(coder_.dec_b, g.dec_b, dec_b_adam_, params);
  }

  apply_bottleneck_updates(g.z_e, g.bottleneck_out);

  for (std::size_t j = 0; j < g.bottleneck_out.usage.size(); ++j)
    epoch_usage_[j] += g.bottleneck_out.usage[j];
  return g.metrics;
}

std::vector<EpochMetrics> Trainer::train(const SignalMatrix& dataset) {
  const std::int64_t n = dataset.cols();
  if (n < 1) throw DataError("train: empty dataset");
  std::vector<EpochMetrics> series;
  series.reserve(std::size_t(cfg_.epochs));

  // Batch order comes from its own generator so ablations that change the
  // init seed keep the same data order.
  Rng shuffle_rng(cfg_.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::int64_t> order(static_cast<std::size_t>(n), 0);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = std::int64_t(i);

  for (int epoch = 1; epoch <= cfg_.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    std::fill(epoch_usage_.begin(), epoch_usage_.end(), 0L);
    double recon_acc = 0.0, cb_acc = 0.0, commit_acc = 0.0;
    std::int64_t seen = 0;

    for (std::int64_t start = 0; start < n; start += cfg_.batch_size) {
      const std::int64_t count = std::min<std::int64_t>(cfg_.batch_size, n - start);
      SignalMatrix batch(dataset.rows(), count);
      for (std::int64_t i = 0; i < count; ++i)
        batch.col(i) = dataset.col(order[std::size_t(start + i)]);
      const StepMetrics m = train_step(batch);
      recon_acc += m.recon_mse * double(count);
      cb_acc += m.codebook_term * double(count);
      commit_acc += m.commitment_term * double(count);
      seen += count;
    }

    EpochMetrics em;
    em.epoch = epoch;
    em.mse = recon_acc / double(seen);
    em.psnr = psnr_from_mse(em.mse);
    em.codebook_term = cb_acc / double(seen);
    em.commitment_term = commit_acc / double(seen);
    if (!epoch_usage_.empty()) {
      const UsageHistogram h = UsageHistogram::from_counts(epoch_usage_);
      if (h.total > 0) {
        em.perplexity = perplexity(h);
        em.utilization = utilization(h);
      }
    }
    series.push_back(em);

    if (cfg_.reseed_threshold > 0 && cfg_.kind == BottleneckKind::DL) {
      const SignalMatrix latents = encode(dataset, coder_);
      const SignalMatrix units = unfold(tensor_from_columns(latents), bottleneck_.geometry);
      reseed_dead_atoms(bottleneck_.dictionary, epoch_usage_, units, cfg_.reseed_threshold,
                        cfg_.seed + std::uint64_t(epoch));
    }
  }
  return series;
}

}  // namespace lasers
