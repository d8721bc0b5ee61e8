#ifndef LASERS_AUTOENCODER_HPP
#define LASERS_AUTOENCODER_HPP

#include <lasers/bottleneck.hpp>
#include <lasers/metrics.hpp>

namespace lasers {

enum class CoderMode { RawPatch, Affine };

// Affine encoder/decoder pair. RawPatch mode is the identity on both sides
// (the coding units themselves are the latents); Affine maps input dim M to
// latent dim L and back.
struct AffineCoder {
  CoderMode mode = CoderMode::RawPatch;
  Matrix enc_w;  // L x M
  Vector enc_b;  // L
  Matrix dec_w;  // M x L
  Vector dec_b;  // M

  static AffineCoder raw_patch();
  static AffineCoder affine(int input_dim, int latent_dim, std::uint64_t seed);

  int latent_dim(int input_dim) const {
    return mode == CoderMode::RawPatch ? input_dim : int(enc_w.rows());
  }
};

SignalMatrix encode(const SignalMatrix& x, const AffineCoder& c);
SignalMatrix decode(const SignalMatrix& zhat, const AffineCoder& c);

enum class UpdateRule { Gradient, BCD };

struct TrainConfig {
  int k = 512;
  int l = 16;
  int s = 5;
  double beta = 0.25;
  double eta = 1.0;
  double ema_decay = 0.99;
  double ema_epsilon = 1e-5;
  double lr = 1e-4;
  int epochs = 1;
  int batch_size = 64;
  std::uint64_t seed = 0;
  BottleneckKind kind = BottleneckKind::DL;
  UpdateRule update_rule = UpdateRule::Gradient;
  PatchGeometry geometry;
  long reseed_threshold = 0;  // 0 disables dead-atom reseeding
  CoderMode coder = CoderMode::RawPatch;
  InitStrategy init = InitStrategy::DataSample;
  bool vq_codebook_grad = false;  // add a gradient codebook update on top of EMA

  void validate() const;
};

struct StepMetrics {
  double recon_mse = 0.0;
  double codebook_term = 0.0;
  double commitment_term = 0.0;
  double objective = 0.0;
};

struct EpochMetrics {
  int epoch = 0;
  double mse = 0.0;
  double psnr = 0.0;
  double perplexity = 0.0;
  double utilization = 0.0;
  double codebook_term = 0.0;
  double commitment_term = 0.0;
};

// Analytic coder gradients for one batch against a frozen bottleneck.
// Encoder gradients combine the straight-through reconstruction path with
// the commitment pull toward the compressed latents; the codebook term stops
// gradients at the encoder output.
struct CoderGradients {
  Matrix enc_w;
  Vector enc_b;
  Matrix dec_w;
  Vector dec_b;
  StepMetrics metrics;
  BottleneckOutput bottleneck_out;
  SignalMatrix z_e;
};

CoderGradients coder_gradients(const SignalMatrix& batch, const AffineCoder& coder,
                               const Bottleneck& bn, const TrainConfig& cfg);

struct EvalMetrics {
  double mse = 0.0;
  double psnr = 0.0;
  double latent_mse = 0.0;
  double perplexity = 0.0;
  double utilization = 0.0;
};

EvalMetrics evaluate(const SignalMatrix& data, const AffineCoder& coder, const Bottleneck& bn,
                     int threads = 1);

// Joint training of coder and bottleneck parameters: straight-through
// reconstruction gradients plus the commitment pull for the encoder, exact
// gradients for the decoder, EMA or Adam/BCD updates for the codebook or
// dictionary. Minibatch order comes from a shuffle generator seeded
// separately from parameter initialization.
class Trainer {
 public:
  Trainer(TrainConfig cfg, const SignalMatrix& init_data, int threads = 1);

  StepMetrics train_step(const SignalMatrix& batch);
  std::vector<EpochMetrics> train(const SignalMatrix& dataset);

  const TrainConfig& config() const { return cfg_; }
  const AffineCoder& coder() const { return coder_; }
  const Bottleneck& bottleneck() const { return bottleneck_; }
  Bottleneck& bottleneck() { return bottleneck_; }
  const std::vector<long>& epoch_usage() const { return epoch_usage_; }

 private:
  void apply_bottleneck_updates(const SignalMatrix& z_e, const BottleneckOutput& out);

  TrainConfig cfg_;
  int threads_ = 1;
  AffineCoder coder_;
  Bottleneck bottleneck_;
  AdamState dict_adam_;
  AdamState enc_w_adam_, enc_b_adam_, dec_w_adam_, dec_b_adam_;
  OnlineDLState bcd_state_;
  std::vector<long> epoch_usage_;
  long step_count_ = 0;
};

}  // namespace lasers

#endif
