#pragma once

// End-to-end wiring: run configuration with strict key checking, dataset
// splitting, the simulate -> smooth -> synthesize trigger chain, the full
// poisoning attack and the ablation detection pipeline.

#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "audiotaint/anomaly.hpp"
#include "audiotaint/dataset.hpp"
#include "audiotaint/diffusion.hpp"
#include "audiotaint/features.hpp"
#include "audiotaint/finance.hpp"
#include "audiotaint/fluid.hpp"
#include "audiotaint/lyapunov.hpp"
#include "audiotaint/synthetic.hpp"
#include "audiotaint/trigger.hpp"
#include "audiotaint/victim.hpp"

namespace taint::pipeline {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Run configuration. Unknown keys are rejected at every level so a typo in
// an attack parameter cannot silently fall back to a default.
// ---------------------------------------------------------------------------

namespace detail {

inline void check_keys(const json& j, const std::string& section,
                       const std::set<std::string>& allowed) {
  if (!j.is_object())
    throw std::invalid_argument("config section '" + section + "' must be an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key))
      throw std::invalid_argument("unknown key '" + key + "' in config section '" + section +
                                  "'");
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

struct TriggerConfig {
  double imperceptibility = 0.008;
  int length_samples = 2400;  // 150 ms at 16 kHz
  int k_positions = 3;
  int n_states = 256;
  int n_actions = 4;
  std::string source = "cir";  // cir | execution | fluid
  double smooth_beta = 0.2;
  double smooth_sigma = 0.0;
  double carrier_hz = 450.0;  // 0 disables the carrier
  trigger::RlParams rl;
};

struct PoisonConfig {
  dataset::PoisonSpec spec;
  std::string manifest;  // empty: generate the bundled synthetic corpus
  double test_fraction = 0.25;
  int n_classes = 10;     // used when loading a manifest without metadata
  synthetic::SyntheticSpec synthetic;
};

struct DetectConfig {
  double confidence = 0.95;
  int n_resamples = 1000;
  int window = 10;
};

struct AblationConfig {
  anomaly::AnomalyConfig cfg;
  bool tau_given = false;
  double tau_quantile = 0.95;
  int epochs = 30;
  double learning_rate = 0.01;
  int frame_stride = 4;  // keep every k-th spectrogram frame
};

struct HftConfig {
  int n_trades = 1000;
  double start_price = 100.0;
  double volatility = 0.5;
  double spread = 0.05;
};

struct FluidRunConfig {
  fluid::GridSpec grid;
  fluid::FluidParams params;
  int steps = 100;
  double smooth_weight = 0.0;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  finance::CirParams cir;
  finance::BatesParams bates;
  finance::LiquidationParams execution;
  HftConfig hft;
  FluidRunConfig fluid_run;
  struct {
    int steps = 100;
    double beta_start = 0.01;
    double beta_end = 0.3;
    double prior_mean = 0.0;
    double x_init = 1.0;
  } diffusion;
  TriggerConfig trig;
  PoisonConfig poison;
  // Attack-run training budget; heavier than the bare TrainConfig defaults
  // so the two-term objective is fit to convergence on small corpora.
  victim::TrainConfig train{0.03, 250, 16, 10};
  std::vector<int> hidden_dims{64, 32};
  DetectConfig detect;
  AblationConfig ablation;
};

inline RunConfig parse_config(const json& j) {
  detail::check_keys(j, "<root>",
                     {"seed", "output_dir", "cir", "bates", "execution", "hft", "fluid",
                      "diffusion", "trigger", "poison", "train", "detect", "ablation"});
  RunConfig c;
  detail::get_if(j, "seed", c.seed);
  detail::get_if(j, "output_dir", c.output_dir);

  if (j.contains("cir")) {
    const auto& s = j.at("cir");
    detail::check_keys(s, "cir", {"kappa", "theta", "sigma", "r0", "horizon", "steps"});
    detail::get_if(s, "kappa", c.cir.kappa);
    detail::get_if(s, "theta", c.cir.theta);
    detail::get_if(s, "sigma", c.cir.sigma);
    detail::get_if(s, "r0", c.cir.r0);
    detail::get_if(s, "horizon", c.cir.horizon);
    detail::get_if(s, "steps", c.cir.steps);
  }
  if (j.contains("bates")) {
    const auto& s = j.at("bates");
    detail::check_keys(s, "bates",
                       {"s0", "v0", "rate", "jump_intensity", "jump_size", "mean_rel_jump",
                        "kappa_v", "theta_v", "sigma_v", "rho", "horizon", "steps"});
    detail::get_if(s, "s0", c.bates.s0);
    detail::get_if(s, "v0", c.bates.v0);
    detail::get_if(s, "rate", c.bates.rate);
    detail::get_if(s, "jump_intensity", c.bates.jump_intensity);
    detail::get_if(s, "jump_size", c.bates.jump_size);
    detail::get_if(s, "mean_rel_jump", c.bates.mean_rel_jump);
    detail::get_if(s, "kappa_v", c.bates.kappa_v);
    detail::get_if(s, "theta_v", c.bates.theta_v);
    detail::get_if(s, "sigma_v", c.bates.sigma_v);
    detail::get_if(s, "rho", c.bates.rho);
    detail::get_if(s, "horizon", c.bates.horizon);
    detail::get_if(s, "steps", c.bates.steps);
  }
  if (j.contains("execution")) {
    const auto& s = j.at("execution");
    detail::check_keys(s, "execution",
                       {"total_shares", "horizon", "temp_impact", "terminal_penalty",
                        "fill_mu", "fill_beta", "fill_theta", "sigma", "gamma", "dt", "s0",
                        "steps"});
    detail::get_if(s, "total_shares", c.execution.total_shares);
    detail::get_if(s, "horizon", c.execution.horizon);
    detail::get_if(s, "temp_impact", c.execution.temp_impact);
    detail::get_if(s, "terminal_penalty", c.execution.terminal_penalty);
    detail::get_if(s, "fill_mu", c.execution.fill_mu);
    detail::get_if(s, "fill_beta", c.execution.fill_beta);
    detail::get_if(s, "fill_theta", c.execution.fill_theta);
    detail::get_if(s, "sigma", c.execution.sigma);
    detail::get_if(s, "gamma", c.execution.gamma);
    detail::get_if(s, "dt", c.execution.dt);
    detail::get_if(s, "s0", c.execution.s0);
    detail::get_if(s, "steps", c.execution.steps);
  }
  if (j.contains("hft")) {
    const auto& s = j.at("hft");
    detail::check_keys(s, "hft", {"n_trades", "start_price", "volatility", "spread"});
    detail::get_if(s, "n_trades", c.hft.n_trades);
    detail::get_if(s, "start_price", c.hft.start_price);
    detail::get_if(s, "volatility", c.hft.volatility);
    detail::get_if(s, "spread", c.hft.spread);
  }
  if (j.contains("fluid")) {
    const auto& s = j.at("fluid");
    detail::check_keys(s, "fluid",
                       {"lx", "ly", "lz", "nx", "ny", "nz", "density", "viscosity", "dt",
                        "pressure_coeff", "steps", "smooth_weight"});
    detail::get_if(s, "lx", c.fluid_run.grid.lx);
    detail::get_if(s, "ly", c.fluid_run.grid.ly);
    detail::get_if(s, "lz", c.fluid_run.grid.lz);
    detail::get_if(s, "nx", c.fluid_run.grid.nx);
    detail::get_if(s, "ny", c.fluid_run.grid.ny);
    detail::get_if(s, "nz", c.fluid_run.grid.nz);
    detail::get_if(s, "density", c.fluid_run.params.density);
    detail::get_if(s, "viscosity", c.fluid_run.params.viscosity);
    detail::get_if(s, "dt", c.fluid_run.params.dt);
    detail::get_if(s, "pressure_coeff", c.fluid_run.params.pressure_coeff);
    detail::get_if(s, "steps", c.fluid_run.steps);
    detail::get_if(s, "smooth_weight", c.fluid_run.smooth_weight);
  }
  if (j.contains("diffusion")) {
    const auto& s = j.at("diffusion");
    detail::check_keys(s, "diffusion",
                       {"steps", "beta_start", "beta_end", "prior_mean", "x_init"});
    detail::get_if(s, "steps", c.diffusion.steps);
    detail::get_if(s, "beta_start", c.diffusion.beta_start);
    detail::get_if(s, "beta_end", c.diffusion.beta_end);
    detail::get_if(s, "prior_mean", c.diffusion.prior_mean);
    detail::get_if(s, "x_init", c.diffusion.x_init);
  }
  if (j.contains("trigger")) {
    const auto& s = j.at("trigger");
    detail::check_keys(s, "trigger",
                       {"imperceptibility", "length_samples", "k_positions", "n_states",
                        "n_actions", "source", "smooth_beta", "smooth_sigma", "carrier_hz",
                        "learning_rate", "discount_factor", "episodes", "reward_scale"});
    detail::get_if(s, "imperceptibility", c.trig.imperceptibility);
    detail::get_if(s, "length_samples", c.trig.length_samples);
    detail::get_if(s, "k_positions", c.trig.k_positions);
    detail::get_if(s, "n_states", c.trig.n_states);
    detail::get_if(s, "n_actions", c.trig.n_actions);
    detail::get_if(s, "source", c.trig.source);
    detail::get_if(s, "smooth_beta", c.trig.smooth_beta);
    detail::get_if(s, "smooth_sigma", c.trig.smooth_sigma);
    detail::get_if(s, "carrier_hz", c.trig.carrier_hz);
    detail::get_if(s, "learning_rate", c.trig.rl.learning_rate);
    detail::get_if(s, "discount_factor", c.trig.rl.discount_factor);
    detail::get_if(s, "episodes", c.trig.rl.episodes);
    detail::get_if(s, "reward_scale", c.trig.rl.reward_scale);
  }
  if (j.contains("poison")) {
    const auto& s = j.at("poison");
    detail::check_keys(s, "poison",
                       {"poison_rate", "target_label", "relabel", "manifest", "test_fraction",
                        "n_classes", "n_samples"});
    detail::get_if(s, "poison_rate", c.poison.spec.poison_rate);
    detail::get_if(s, "target_label", c.poison.spec.target_label);
    detail::get_if(s, "relabel", c.poison.spec.relabel);
    detail::get_if(s, "manifest", c.poison.manifest);
    detail::get_if(s, "test_fraction", c.poison.test_fraction);
    detail::get_if(s, "n_classes", c.poison.n_classes);
    detail::get_if(s, "n_samples", c.poison.synthetic.n_samples);
    c.poison.synthetic.n_classes = c.poison.n_classes;
  }
  if (j.contains("train")) {
    const auto& s = j.at("train");
    detail::check_keys(s, "train",
                       {"learning_rate", "epochs", "batch_size", "snapshot_every", "hidden"});
    detail::get_if(s, "learning_rate", c.train.learning_rate);
    detail::get_if(s, "epochs", c.train.epochs);
    detail::get_if(s, "batch_size", c.train.batch_size);
    detail::get_if(s, "snapshot_every", c.train.snapshot_every);
    detail::get_if(s, "hidden", c.hidden_dims);
  }
  if (j.contains("detect")) {
    const auto& s = j.at("detect");
    detail::check_keys(s, "detect", {"confidence", "n_resamples", "window"});
    detail::get_if(s, "confidence", c.detect.confidence);
    detail::get_if(s, "n_resamples", c.detect.n_resamples);
    detail::get_if(s, "window", c.detect.window);
  }
  if (j.contains("ablation")) {
    const auto& s = j.at("ablation");
    detail::check_keys(s, "ablation",
                       {"tau", "tau_quantile", "pca_dims", "k_clusters", "lof_neighbors",
                        "lof_threshold", "hidden_dim", "latent_dim", "epochs",
                        "learning_rate", "frame_stride"});
    if (s.contains("tau")) {
      c.ablation.cfg.tau = s.at("tau").get<double>();
      c.ablation.tau_given = true;
    }
    detail::get_if(s, "tau_quantile", c.ablation.tau_quantile);
    detail::get_if(s, "pca_dims", c.ablation.cfg.pca_dims);
    detail::get_if(s, "k_clusters", c.ablation.cfg.k_clusters);
    detail::get_if(s, "lof_neighbors", c.ablation.cfg.lof_neighbors);
    detail::get_if(s, "lof_threshold", c.ablation.cfg.lof_threshold);
    detail::get_if(s, "hidden_dim", c.ablation.cfg.hidden_dim);
    detail::get_if(s, "latent_dim", c.ablation.cfg.latent_dim);
    detail::get_if(s, "epochs", c.ablation.epochs);
    detail::get_if(s, "learning_rate", c.ablation.learning_rate);
    detail::get_if(s, "frame_stride", c.ablation.frame_stride);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Dataset staging
// ---------------------------------------------------------------------------

// Stratified split: within each class the first ceil(test_fraction * n_c)
// samples of a seeded shuffle go to the test set.
inline std::pair<dataset::Dataset, dataset::Dataset> split_dataset(const dataset::Dataset& d,
                                                                   double test_fraction,
                                                                   std::uint64_t seed) {
  if (test_fraction <= 0.0 || test_fraction >= 1.0)
    throw std::invalid_argument("split_dataset: test_fraction must lie in (0,1)");
  d.validate();
  std::vector<std::vector<int>> by_class(d.n_classes);
  for (std::size_t i = 0; i < d.samples.size(); ++i)
    by_class[d.samples[i].label].push_back(static_cast<int>(i));

  dataset::Dataset train_set, test_set;
  train_set.n_classes = test_set.n_classes = d.n_classes;
  for (int c = 0; c < d.n_classes; ++c) {
    auto& idx = by_class[c];
    Rng rng = Rng::derive(seed, 0xabcd0000ull + c);
    for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.uniform_index(i + 1));
      std::swap(idx[i], idx[j]);
    }
    const std::size_t n_test =
        static_cast<std::size_t>(std::ceil(test_fraction * static_cast<double>(idx.size())));
    for (std::size_t i = 0; i < idx.size(); ++i)
      (i < n_test ? test_set : train_set).samples.push_back(d.samples[idx[i]]);
  }
  return {std::move(train_set), std::move(test_set)};
}

inline dataset::FeatureMatrix stage_features(const dataset::Dataset& d, int n_mels = 40) {
  dataset::FeatureMatrix f;
  f.rows.resize(static_cast<Eigen::Index>(d.samples.size()), n_mels);
  f.labels.reserve(d.samples.size());
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    f.rows.row(static_cast<Eigen::Index>(i)) =
        features::mean_pooled_features(d.samples[i], n_mels).transpose();
    f.labels.push_back(d.samples[i].label);
  }
  return f;
}

// Per-band standardization fitted on the training features; the same
// transform is applied at prediction time.
struct FeatureScaler {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd inv_std;

  static FeatureScaler fit(const Eigen::MatrixXd& rows) {
    FeatureScaler s;
    s.mean = rows.colwise().mean();
    const Eigen::MatrixXd centered = rows.rowwise() - s.mean;
    const Eigen::RowVectorXd var =
        centered.array().square().colwise().sum() / std::max<double>(1.0, rows.rows() - 1);
    s.inv_std = (var.array() + 1e-12).sqrt().inverse();
    return s;
  }
  Eigen::MatrixXd apply(const Eigen::MatrixXd& rows) const {
    return (rows.rowwise() - mean).array().rowwise() * inv_std.array();
  }
  Eigen::VectorXd apply(const Eigen::VectorXd& row) const {
    return ((row.transpose() - mean).array() * inv_std.array()).transpose();
  }
};

// ---------------------------------------------------------------------------
// Trigger construction chain: simulate -> smooth -> synthesize
// ---------------------------------------------------------------------------

inline std::vector<double> trigger_source_signal(const RunConfig& c, std::uint64_t seed) {
  if (c.trig.source == "cir") {
    return finance::simulate_cir(c.cir, seed).values;
  }
  if (c.trig.source == "execution") {
    return finance::simulate_execution(c.execution, seed).price.values;
  }
  if (c.trig.source == "fluid") {
    // Scanline through the initialized field after one update step.
    const auto field = fluid::navier_stokes_step(fluid::initialize_system(c.fluid_run.grid),
                                                 c.fluid_run.grid, c.fluid_run.params);
    std::vector<double> line;
    const int j = c.fluid_run.grid.ny / 2, k = c.fluid_run.grid.nz / 2;
    for (int rep = 0; rep < 8; ++rep)  // tile the scanline for enough support
      for (int i = 0; i < c.fluid_run.grid.nx; ++i) line.push_back(field.u.at(i, j, k));
    return line;
  }
  throw std::invalid_argument("trigger source must be cir, execution or fluid, got '" +
                              c.trig.source + "'");
}

// Builds the poison payload for a host corpus: learns insertion buckets on
// the corpus mean envelope, shapes the smoothed simulation signal into an
// envelope and rides it on a quiet-band carrier. A near-DC waveform would be
// discarded by the mel front-end, so the carrier keeps the payload inside a
// measurable band while the simulation trace still sets its shape.
inline trigger::Trigger build_trigger(const RunConfig& c, const dataset::Dataset& hosts,
                                      std::uint64_t seed) {
  if (hosts.samples.empty()) throw std::invalid_argument("build_trigger: empty host corpus");
  const int sr = hosts.samples.front().sampling_rate;

  const auto raw = trigger_source_signal(c, mix64(seed) ^ 0x7177ull);
  const auto smoothed =
      diffusion::smooth_signal(raw, c.trig.smooth_beta, c.trig.smooth_sigma, mix64(seed) + 1);

  std::size_t min_len = hosts.samples.front().waveform.size();
  for (const auto& s : hosts.samples) min_len = std::min(min_len, s.waveform.size());

  // Mean envelope over the corpus drives the insertion reward.
  std::vector<double> envelope(min_len, 0.0);
  for (const auto& s : hosts.samples)
    for (std::size_t i = 0; i < min_len; ++i)
      envelope[i] += std::abs(s.waveform[i]) / static_cast<double>(hosts.samples.size());

  const auto reward = trigger::envelope_reward(envelope, c.trig.n_states);
  const auto q = trigger::learn_insertion_policy(c.trig.n_states, c.trig.n_actions, c.trig.rl,
                                                 reward, mix64(seed) + 2);

  // Greedy Q-ranked selection with a spacing constraint so the k insertions
  // never overlap once mapped onto sample offsets.
  const int span = static_cast<int>(min_len) - c.trig.length_samples;
  const int state_gap =
      span > 0 ? std::max(1, (c.trig.length_samples * (c.trig.n_states - 1) + span - 1) / span)
               : c.trig.n_states;
  std::vector<int> ranked = trigger::extract_positions(q, c.trig.n_states);
  std::stable_sort(ranked.begin(), ranked.end(), [&q](int a, int b) {
    const double va = q.max_over_actions(a), vb = q.max_over_actions(b);
    if (va != vb) return va > vb;
    return a < b;
  });
  std::vector<int> states;
  for (int s : ranked) {
    bool ok = true;
    for (int kept : states)
      if (std::abs(kept - s) < state_gap) ok = false;
    if (ok) states.push_back(s);
    if (static_cast<int>(states.size()) == c.trig.k_positions) break;
  }
  std::sort(states.begin(), states.end());

  std::vector<double> shaped;
  if (c.trig.carrier_hz > 0.0) {
    const auto env = trigger::synthesize_trigger(smoothed, 1.0, sr, c.trig.length_samples);
    shaped.resize(env.waveform.size());
    for (std::size_t i = 0; i < shaped.size(); ++i)
      shaped[i] = env.waveform[i] *
                  std::sin(2.0 * kPi * c.trig.carrier_hz * static_cast<double>(i) / sr);
  } else {
    shaped = smoothed;
  }

  auto t = trigger::synthesize_trigger(shaped, c.trig.imperceptibility, sr,
                                       c.trig.length_samples);
  t.positions = trigger::states_to_offsets(states, c.trig.n_states, static_cast<int>(min_len),
                                           c.trig.length_samples);
  return t;
}

// ---------------------------------------------------------------------------
// Full attack: poison -> train -> evaluate -> V stream
// ---------------------------------------------------------------------------

struct AttackResult {
  trigger::Trigger payload;
  dataset::Dataset train_clean;
  dataset::Dataset train_poisoned;
  dataset::Dataset test_clean;
  std::vector<int> poisoned_indices;
  FeatureScaler scaler;
  victim::TrainResult trained;
  dataset::AttackMetrics metrics;
  std::vector<double> v_stream;
  Eigen::VectorXd feature_mean;  // raw (pre-scaling) mel-feature batch mean
  std::vector<int> dims;
};

inline std::function<int(const audio::AudioSample&)> make_classifier(
    const victim::MlpModel& model, const FeatureScaler& scaler) {
  return [&model, &scaler](const audio::AudioSample& s) {
    return victim::predict(model, scaler.apply(features::mean_pooled_features(s))).first;
  };
}

inline AttackResult run_attack(const RunConfig& c, const dataset::Dataset& full,
                               std::uint64_t seed) {
  AttackResult r;
  auto [train_set, test_set] = split_dataset(full, c.poison.test_fraction, seed);
  r.train_clean = std::move(train_set);
  r.test_clean = std::move(test_set);

  r.payload = build_trigger(c, r.train_clean, seed);
  auto [poisoned, idx] =
      dataset::poison_dataset(r.train_clean, c.poison.spec, r.payload, mix64(seed) + 10);
  r.train_poisoned = std::move(poisoned);
  r.poisoned_indices = std::move(idx);

  auto feats = stage_features(r.train_poisoned);
  r.feature_mean = feats.rows.colwise().mean();
  r.scaler = FeatureScaler::fit(feats.rows);
  feats.rows = r.scaler.apply(feats.rows);

  r.dims = {static_cast<int>(feats.rows.cols())};
  for (int h : c.hidden_dims) r.dims.push_back(h);
  r.dims.push_back(full.n_classes);

  r.trained = victim::train(feats, r.dims, c.train, mix64(seed) + 20);
  r.metrics = dataset::compute_metrics(make_classifier(r.trained.model, r.scaler),
                                       r.test_clean, r.payload, c.poison.spec.target_label);

  r.v_stream = lyapunov::v_stream_from_trajectory(r.trained.trajectory, r.dims, r.feature_mean);
  return r;
}

// ---------------------------------------------------------------------------
// Ablation pipeline: spectrogram frames -> autoencoder -> scores
// ---------------------------------------------------------------------------

struct AblationResult {
  anomaly::SeqAutoencoder model;
  std::vector<double> recon_losses;
  double tau = 0.0;
  std::vector<bool> recon_flags;
  Eigen::VectorXd lof;
  std::vector<bool> lof_flags;
  Eigen::MatrixXd pca_coords;  // 3D scatter staging
  anomaly::DetectionAccuracy accuracy;  // vs ground truth when provided
};

inline std::vector<Eigen::MatrixXd> spectrogram_frames(const dataset::Dataset& d, int stride,
                                                       int n_mels = 40) {
  std::vector<Eigen::MatrixXd> frames;
  frames.reserve(d.samples.size());
  for (const auto& s : d.samples) {
    const Eigen::MatrixXd full = features::extract_features(s, n_mels);
    const int kept = (static_cast<int>(full.rows()) + stride - 1) / stride;
    Eigen::MatrixXd sub(kept, full.cols());
    for (int r = 0; r < kept; ++r) sub.row(r) = full.row(r * stride);
    frames.push_back(std::move(sub));
  }
  return frames;
}

inline AblationResult run_ablation(const AblationConfig& cfg, const dataset::Dataset& mixed,
                                   const std::vector<int>& benign_indices,
                                   const std::vector<int>& poisoned_indices,
                                   std::uint64_t seed) {
  AblationResult r;
  const auto frames = spectrogram_frames(mixed, cfg.frame_stride);

  r.model = anomaly::train_autoencoder(frames, cfg.cfg, cfg.epochs, cfg.learning_rate, seed);

  r.recon_losses.reserve(frames.size());
  for (const auto& f : frames) r.recon_losses.push_back(anomaly::reconstruction_loss(r.model, f));

  if (cfg.tau_given) {
    r.tau = cfg.cfg.tau;
  } else {
    std::vector<double> benign_losses;
    for (int i : benign_indices) benign_losses.push_back(r.recon_losses[i]);
    r.tau = anomaly::threshold_from_benign(benign_losses, cfg.tau_quantile);
  }
  r.recon_flags.resize(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) r.recon_flags[i] = r.recon_losses[i] > r.tau;

  // Clustering route on flattened spectrogram features.
  Eigen::Index flat_dim = frames.front().size();
  Eigen::MatrixXd flat(static_cast<Eigen::Index>(frames.size()), flat_dim);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Eigen::Map<const Eigen::VectorXd> v(frames[i].data(), frames[i].size());
    flat.row(static_cast<Eigen::Index>(i)) = v.head(flat_dim).transpose();
  }
  const int pca_dims = std::min<int>(cfg.cfg.pca_dims, static_cast<int>(flat.cols()));
  const auto pca = anomaly::pca_reduce(flat, pca_dims);
  const auto km = anomaly::kmeans_cluster(pca.projected,
                                          std::min<int>(cfg.cfg.k_clusters,
                                                        static_cast<int>(frames.size())),
                                          mix64(seed) + 3);
  const Eigen::VectorXd dist = anomaly::centroid_distances(pca.projected, km.centroids);
  (void)dist;  // exported distances feed the LOF stage on reduced features
  r.lof = anomaly::lof_scores(pca.projected,
                              std::min<int>(cfg.cfg.lof_neighbors,
                                            static_cast<int>(frames.size()) - 1));
  r.lof_flags.resize(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i)
    r.lof_flags[i] = r.lof(static_cast<Eigen::Index>(i)) > cfg.cfg.lof_threshold;

  const auto pca3 = anomaly::pca_reduce(flat, std::min<Eigen::Index>(3, flat.cols()));
  r.pca_coords = pca3.projected;

  if (!poisoned_indices.empty())
    r.accuracy = anomaly::detection_accuracy(r.recon_flags, poisoned_indices);
  return r;
}

}  // namespace taint::pipeline
