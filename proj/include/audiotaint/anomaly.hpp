#pragma once

// Ablation detector: a recurrent sequence autoencoder scored by
// reconstruction loss, plus PCA -> K-means -> centroid-distance -> LOF
// anomaly scoring with recall/false-positive reporting and mixed retraining.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "audiotaint/rng.hpp"

namespace taint::anomaly {

// Single-cell recurrent autoencoder: tanh encoder cell -> latent vector ->
// tanh decoder cell conditioned on the latent at every step.
struct SeqAutoencoder {
  int input_dim = 0, hidden_dim = 0, latent_dim = 0;
  Eigen::MatrixXd w_in;      // hidden x input
  Eigen::MatrixXd u_enc;     // hidden x hidden
  Eigen::VectorXd b_enc;     // hidden
  Eigen::MatrixXd w_latent;  // latent x hidden
  Eigen::VectorXd b_latent;  // latent
  Eigen::MatrixXd w_dec;     // hidden x latent
  Eigen::VectorXd b_dec;     // hidden
  Eigen::MatrixXd u_dec;     // hidden x hidden
  Eigen::MatrixXd w_out;     // input x hidden
  Eigen::VectorXd b_out;     // input

  int n_params() const {
    return static_cast<int>(w_in.size() + u_enc.size() + b_enc.size() + w_latent.size() +
                            b_latent.size() + w_dec.size() + b_dec.size() + u_dec.size() +
                            w_out.size() + b_out.size());
  }
  Eigen::VectorXd flatten() const {
    Eigen::VectorXd v(n_params());
    int off = 0;
    for (const Eigen::MatrixXd* m : {&w_in, &u_enc, &w_latent, &w_dec, &u_dec, &w_out})
      for (Eigen::Index i = 0; i < m->size(); ++i) v(off++) = m->data()[i];
    for (const Eigen::VectorXd* b : {&b_enc, &b_latent, &b_dec, &b_out})
      for (Eigen::Index i = 0; i < b->size(); ++i) v(off++) = (*b)(i);
    return v;
  }
  void unflatten(const Eigen::VectorXd& v) {
    int off = 0;
    for (Eigen::MatrixXd* m : {&w_in, &u_enc, &w_latent, &w_dec, &u_dec, &w_out})
      for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = v(off++);
    for (Eigen::VectorXd* b : {&b_enc, &b_latent, &b_dec, &b_out})
      for (Eigen::Index i = 0; i < b->size(); ++i) (*b)(i) = v(off++);
  }
};

struct AnomalyConfig {
  double tau = 0.0;          // reconstruction threshold
  int pca_dims = 8;
  int k_clusters = 2;
  int lof_neighbors = 20;
  double lof_threshold = 1.5;
  int hidden_dim = 32;
  int latent_dim = 8;
};

inline SeqAutoencoder init_autoencoder(int input_dim, int hidden_dim, int latent_dim,
                                       std::uint64_t seed) {
  if (input_dim < 1 || hidden_dim < 1 || latent_dim < 1)
    throw std::invalid_argument("init_autoencoder: dims must be >= 1");
  SeqAutoencoder m;
  m.input_dim = input_dim;
  m.hidden_dim = hidden_dim;
  m.latent_dim = latent_dim;
  Rng rng(seed);
  const auto fill = [&rng](Eigen::MatrixXd& mat, int rows, int cols) {
    mat.resize(rows, cols);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
    for (Eigen::Index i = 0; i < mat.size(); ++i) mat.data()[i] = scale * rng.normal();
  };
  fill(m.w_in, hidden_dim, input_dim);
  fill(m.u_enc, hidden_dim, hidden_dim);
  fill(m.w_latent, latent_dim, hidden_dim);
  fill(m.w_dec, hidden_dim, latent_dim);
  fill(m.u_dec, hidden_dim, hidden_dim);
  fill(m.w_out, input_dim, hidden_dim);
  m.b_enc = Eigen::VectorXd::Zero(hidden_dim);
  m.b_latent = Eigen::VectorXd::Zero(latent_dim);
  m.b_dec = Eigen::VectorXd::Zero(hidden_dim);
  m.b_out = Eigen::VectorXd::Zero(input_dim);
  return m;
}

// Unrolls the autoencoder over the rows of x (frames x input_dim).
inline Eigen::MatrixXd reconstruct(const SeqAutoencoder& m, const Eigen::MatrixXd& x) {
  if (x.cols() != m.input_dim)
    throw std::invalid_argument("reconstruct: input dimension mismatch");
  const int T = static_cast<int>(x.rows());
  Eigen::VectorXd h = Eigen::VectorXd::Zero(m.hidden_dim);
  for (int t = 0; t < T; ++t)
    h = (m.w_in * x.row(t).transpose() + m.u_enc * h + m.b_enc).array().tanh();
  const Eigen::VectorXd z = m.w_latent * h + m.b_latent;

  Eigen::MatrixXd out(T, m.input_dim);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(m.hidden_dim);
  for (int t = 0; t < T; ++t) {
    g = (m.u_dec * g + m.w_dec * z + m.b_dec).array().tanh();
    out.row(t) = (m.w_out * g + m.b_out).transpose();
  }
  return out;
}

// Squared Frobenius distance between input and reconstruction.
inline double reconstruction_loss(const SeqAutoencoder& m, const Eigen::MatrixXd& x) {
  return (x - reconstruct(m, x)).squaredNorm();
}

// Mean squared error (the training objective) and its gradient through the
// unrolled chain. grad, when non-null, receives a model-shaped gradient.
inline double loss_and_gradient(const SeqAutoencoder& m, const Eigen::MatrixXd& x,
                                SeqAutoencoder* grad) {
  if (x.cols() != m.input_dim)
    throw std::invalid_argument("loss_and_gradient: input dimension mismatch");
  const int T = static_cast<int>(x.rows());
  const double scale = 1.0 / (static_cast<double>(T) * m.input_dim);

  // Forward with cached activations.
  std::vector<Eigen::VectorXd> h(T + 1), g(T + 1);
  h[0] = Eigen::VectorXd::Zero(m.hidden_dim);
  for (int t = 0; t < T; ++t)
    h[t + 1] = (m.w_in * x.row(t).transpose() + m.u_enc * h[t] + m.b_enc).array().tanh();
  const Eigen::VectorXd z = m.w_latent * h[T] + m.b_latent;
  g[0] = Eigen::VectorXd::Zero(m.hidden_dim);
  Eigen::MatrixXd recon(T, m.input_dim);
  for (int t = 0; t < T; ++t) {
    g[t + 1] = (m.u_dec * g[t] + m.w_dec * z + m.b_dec).array().tanh();
    recon.row(t) = (m.w_out * g[t + 1] + m.b_out).transpose();
  }
  const Eigen::MatrixXd err = recon - x;
  const double loss = scale * err.squaredNorm();
  if (!grad) return loss;

  *grad = m;
  grad->w_in.setZero();
  grad->u_enc.setZero();
  grad->b_enc.setZero();
  grad->w_latent.setZero();
  grad->b_latent.setZero();
  grad->w_dec.setZero();
  grad->b_dec.setZero();
  grad->u_dec.setZero();
  grad->w_out.setZero();
  grad->b_out.setZero();

  Eigen::VectorXd dz = Eigen::VectorXd::Zero(m.latent_dim);
  Eigen::VectorXd dg_next = Eigen::VectorXd::Zero(m.hidden_dim);  // dL/dc_{t+1}
  for (int t = T - 1; t >= 0; --t) {
    const Eigen::VectorXd e = 2.0 * scale * err.row(t).transpose();
    grad->w_out.noalias() += e * g[t + 1].transpose();
    grad->b_out += e;
    const Eigen::VectorXd dg = m.w_out.transpose() * e + m.u_dec.transpose() * dg_next;
    const Eigen::VectorXd dc =
        dg.cwiseProduct((1.0 - g[t + 1].array().square()).matrix());
    grad->u_dec.noalias() += dc * g[t].transpose();
    grad->w_dec.noalias() += dc * z.transpose();
    grad->b_dec += dc;
    dz.noalias() += m.w_dec.transpose() * dc;
    dg_next = dc;
  }
  grad->w_latent.noalias() += dz * h[T].transpose();
  grad->b_latent += dz;
  Eigen::VectorXd dh = m.w_latent.transpose() * dz;
  for (int t = T - 1; t >= 0; --t) {
    const Eigen::VectorXd da = dh.cwiseProduct((1.0 - h[t + 1].array().square()).matrix());
    grad->w_in.noalias() += da * x.row(t);
    grad->u_enc.noalias() += da * h[t].transpose();
    grad->b_enc += da;
    dh = m.u_enc.transpose() * da;
  }
  return loss;
}

namespace detail {
inline void apply_gradient(SeqAutoencoder& m, const SeqAutoencoder& grad, double lr) {
  m.w_in -= lr * grad.w_in;
  m.u_enc -= lr * grad.u_enc;
  m.b_enc -= lr * grad.b_enc;
  m.w_latent -= lr * grad.w_latent;
  m.b_latent -= lr * grad.b_latent;
  m.w_dec -= lr * grad.w_dec;
  m.b_dec -= lr * grad.b_dec;
  m.u_dec -= lr * grad.u_dec;
  m.w_out -= lr * grad.w_out;
  m.b_out -= lr * grad.b_out;
}
}  // namespace detail

// Seeded SGD over time-unrolled frames, one sample per update.
inline SeqAutoencoder train_autoencoder(const std::vector<Eigen::MatrixXd>& frames,
                                        const AnomalyConfig& cfg, int epochs, double lr,
                                        std::uint64_t seed) {
  if (frames.empty()) throw std::invalid_argument("train_autoencoder: no training frames");
  const int input_dim = static_cast<int>(frames.front().cols());
  for (const auto& f : frames) {
    if (f.cols() != input_dim)
      throw std::invalid_argument("train_autoencoder: inconsistent feature dimension");
    if (!f.allFinite()) throw std::invalid_argument("train_autoencoder: non-finite input");
  }
  SeqAutoencoder m = init_autoencoder(input_dim, cfg.hidden_dim, cfg.latent_dim, seed);
  std::vector<int> order(frames.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    Rng shuffle_rng = Rng::derive(seed, 7000003ull + epoch);
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
      const int j = static_cast<int>(shuffle_rng.uniform_index(i + 1));
      std::swap(order[i], order[j]);
    }
    for (int idx : order) {
      SeqAutoencoder grad;
      const double loss = loss_and_gradient(m, frames[idx], &grad);
      if (!std::isfinite(loss))
        throw std::runtime_error("train_autoencoder: non-finite loss in epoch " +
                                 std::to_string(epoch));
      detail::apply_gradient(m, grad, lr);
    }
  }
  return m;
}

// Continues training on clean plus flagged frames, with flagged gradients
// down-weighted to 0.1.
inline SeqAutoencoder retrain_mixed(const SeqAutoencoder& trained,
                                    const std::vector<Eigen::MatrixXd>& clean_frames,
                                    const std::vector<Eigen::MatrixXd>& flagged_frames,
                                    int epochs, double lr, std::uint64_t seed) {
  if (clean_frames.empty())
    throw std::invalid_argument("retrain_mixed: need at least one clean frame");
  SeqAutoencoder m = trained;
  const int n_clean = static_cast<int>(clean_frames.size());
  const int n_total = n_clean + static_cast<int>(flagged_frames.size());
  std::vector<int> order(n_total);
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    Rng shuffle_rng = Rng::derive(seed, 9000001ull + epoch);
    for (int i = n_total - 1; i > 0; --i) {
      const int j = static_cast<int>(shuffle_rng.uniform_index(i + 1));
      std::swap(order[i], order[j]);
    }
    for (int idx : order) {
      const bool flagged = idx >= n_clean;
      const Eigen::MatrixXd& f = flagged ? flagged_frames[idx - n_clean] : clean_frames[idx];
      SeqAutoencoder grad;
      const double loss = loss_and_gradient(m, f, &grad);
      if (!std::isfinite(loss)) throw std::runtime_error("retrain_mixed: non-finite loss");
      detail::apply_gradient(m, grad, flagged ? 0.1 * lr : lr);
    }
  }
  return m;
}

// Empirical quantile (linear interpolation between order statistics).
inline double threshold_from_benign(const std::vector<double>& losses, double quantile = 0.95) {
  if (losses.empty()) throw std::invalid_argument("threshold_from_benign: empty input");
  if (quantile <= 0.0 || quantile >= 1.0)
    throw std::invalid_argument("threshold_from_benign: quantile must lie in (0,1)");
  std::vector<double> sorted = losses;
  std::sort(sorted.begin(), sorted.end());
  const double pos = quantile * (sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  return lo + 1 < sorted.size() ? sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
                                : sorted[lo];
}

// Flag per sample: loss strictly above tau.
inline std::vector<bool> detect_by_reconstruction(const SeqAutoencoder& m,
                                                  const std::vector<Eigen::MatrixXd>& samples,
                                                  double tau) {
  std::vector<bool> flags(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    flags[i] = reconstruction_loss(m, samples[i]) > tau;
  return flags;
}

struct PcaResult {
  Eigen::MatrixXd projected;           // rows x dims
  Eigen::VectorXd explained_variance;  // nonincreasing
  Eigen::MatrixXd components;          // feature_dim x dims, orthonormal columns
};

// Mean-centered projection onto the top principal directions of the sample
// covariance. Components beyond the data rank are zero-padded.
inline PcaResult pca_reduce(const Eigen::MatrixXd& data, int dims) {
  if (data.rows() < 2) throw std::invalid_argument("pca_reduce: need at least 2 rows");
  if (dims < 1 || dims > data.cols())
    throw std::invalid_argument("pca_reduce: dims must lie in [1, feature_dim]");

  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - mean;
  const Eigen::MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(data.rows() - 1);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("pca_reduce: eigendecomposition failed");

  // SelfAdjointEigenSolver sorts ascending; take the top `dims` in reverse.
  PcaResult r;
  r.components = Eigen::MatrixXd::Zero(data.cols(), dims);
  r.explained_variance = Eigen::VectorXd::Zero(dims);
  const double floor = 1e-12 * std::max(1.0, solver.eigenvalues().maxCoeff());
  for (int c = 0; c < dims; ++c) {
    const Eigen::Index src = data.cols() - 1 - c;
    const double ev = solver.eigenvalues()(src);
    if (ev > floor) {
      r.components.col(c) = solver.eigenvectors().col(src);
      r.explained_variance(c) = ev;
    }  // rank-deficient direction: leave the zero padding
  }
  r.projected = centered * r.components;
  return r;
}

struct KmeansResult {
  Eigen::VectorXi assignments;
  Eigen::MatrixXd centroids;  // k x dim
  std::vector<double> wcss_history;
};

// Lloyd iterations from k distinct seeded initial points, until the
// assignment fixpoint or 100 iterations.
inline KmeansResult kmeans_cluster(const Eigen::MatrixXd& points, int k, std::uint64_t seed) {
  const int n = static_cast<int>(points.rows());
  if (k < 1 || k > n) throw std::invalid_argument("kmeans_cluster: need 1 <= k <= #points");

  Rng rng(seed);
  std::vector<int> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(rng.uniform_index(n - i));
    std::swap(pool[i], pool[j]);
  }
  KmeansResult r;
  r.centroids.resize(k, points.cols());
  for (int c = 0; c < k; ++c) r.centroids.row(c) = points.row(pool[c]);
  r.assignments = Eigen::VectorXi::Constant(n, -1);

  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    double wcss = 0.0;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (points.row(i) - r.centroids.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double d = (points.row(i) - r.centroids.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      wcss += best_d;
      if (r.assignments(i) != best) {
        r.assignments(i) = best;
        changed = true;
      }
    }
    r.wcss_history.push_back(wcss);
    if (!changed) break;
    for (int c = 0; c < k; ++c) {
      Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(points.cols());
      int count = 0;
      for (int i = 0; i < n; ++i)
        if (r.assignments(i) == c) {
          acc += points.row(i);
          ++count;
        }
      if (count > 0) r.centroids.row(c) = acc / count;  // empty cluster keeps its centroid
    }
  }
  return r;
}

// Euclidean distance from each point to its nearest centroid.
inline Eigen::VectorXd centroid_distances(const Eigen::MatrixXd& points,
                                          const Eigen::MatrixXd& centroids) {
  if (centroids.rows() < 1) throw std::invalid_argument("centroid_distances: no centroids");
  if (centroids.cols() != points.cols())
    throw std::invalid_argument("centroid_distances: dimension mismatch");
  Eigen::VectorXd out(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centroids.rows(); ++c)
      best = std::min(best, (points.row(i) - centroids.row(c)).norm());
    out(i) = best;
  }
  return out;
}

// Standard LOF with exactly n_neighbors nearest neighbors (distance ties
// broken by index). Local reachability densities are capped at 1e12 so
// duplicated points cannot divide by zero.
inline Eigen::VectorXd lof_scores(const Eigen::MatrixXd& points, int n_neighbors) {
  const int n = static_cast<int>(points.rows());
  if (n_neighbors < 1 || n_neighbors >= n)
    throw std::invalid_argument("lof_scores: need 1 <= n_neighbors < #points");

  Eigen::MatrixXd dist(n, n);
  for (int i = 0; i < n; ++i) {
    dist(i, i) = 0.0;
    for (int j = i + 1; j < n; ++j) {
      const double d = (points.row(i) - points.row(j)).norm();
      dist(i, j) = d;
      dist(j, i) = d;
    }
  }

  std::vector<std::vector<int>> neighbors(n);
  std::vector<double> k_distance(n);
  for (int i = 0; i < n; ++i) {
    std::vector<int> order;
    order.reserve(n - 1);
    for (int j = 0; j < n; ++j)
      if (j != i) order.push_back(j);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (dist(i, a) != dist(i, b)) return dist(i, a) < dist(i, b);
      return a < b;
    });
    order.resize(n_neighbors);
    neighbors[i] = order;
    k_distance[i] = dist(i, order.back());
  }

  std::vector<double> lrd(n);
  for (int i = 0; i < n; ++i) {
    double reach_sum = 0.0;
    for (int j : neighbors[i]) reach_sum += std::max(k_distance[j], dist(i, j));
    lrd[i] = std::min(1e12, n_neighbors / std::max(reach_sum, 1e-12));
  }

  Eigen::VectorXd scores(n);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j : neighbors[i]) acc += lrd[j];
    scores(i) = acc / (n_neighbors * lrd[i]);
  }
  return scores;
}

struct DetectionAccuracy {
  double recall = 0.0;               // flagged poisoned / total poisoned
  double false_positive_rate = 0.0;  // flagged benign / total benign
};

inline DetectionAccuracy detection_accuracy(const std::vector<bool>& flags,
                                            const std::vector<int>& poisoned_indices) {
  if (poisoned_indices.empty())
    throw std::invalid_argument("detection_accuracy: no poisoned instances");
  std::vector<bool> truth(flags.size(), false);
  for (int idx : poisoned_indices) {
    if (idx < 0 || idx >= static_cast<int>(flags.size()))
      throw std::invalid_argument("detection_accuracy: poisoned index out of range");
    truth[idx] = true;
  }
  int tp = 0, fp = 0, benign = 0;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (truth[i]) {
      tp += flags[i] ? 1 : 0;
    } else {
      ++benign;
      fp += flags[i] ? 1 : 0;
    }
  }
  DetectionAccuracy a;
  a.recall = static_cast<double>(tp) / poisoned_indices.size();
  a.false_positive_rate = benign > 0 ? static_cast<double>(fp) / benign : 0.0;
  return a;
}

}  // namespace taint::anomaly
