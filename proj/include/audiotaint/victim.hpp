#pragma once

// Small feedforward softmax classifier over pooled mel features, trained by
// seeded mini-batch gradient descent on categorical cross-entropy. Weight
// snapshots are recorded during training for the stability detector.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "audiotaint/dataset.hpp"
#include "audiotaint/rng.hpp"

namespace taint::victim {

struct TrainConfig {
  double learning_rate = 0.01;  // 0.1 matches the upstream preset but is
                                // unstable for a model this small
  int epochs = 60;
  int batch_size = 16;
  int snapshot_every = 10;  // mini-batch updates between weight snapshots

  void validate() const {
    if (learning_rate <= 0.0) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
    if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (snapshot_every < 1) throw std::invalid_argument("TrainConfig: snapshot_every must be >= 1");
  }
};

// Rectifier hidden layers, softmax output. weights[l] maps dims[l] -> dims[l+1].
struct MlpModel {
  std::vector<int> dims;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  int n_layers() const { return static_cast<int>(weights.size()); }
  int n_params() const {
    int n = 0;
    for (int l = 0; l < n_layers(); ++l)
      n += static_cast<int>(weights[l].size() + biases[l].size());
    return n;
  }
  Eigen::VectorXd flatten() const {
    Eigen::VectorXd v(n_params());
    int off = 0;
    for (int l = 0; l < n_layers(); ++l) {
      for (Eigen::Index i = 0; i < weights[l].size(); ++i) v(off++) = weights[l].data()[i];
      for (Eigen::Index i = 0; i < biases[l].size(); ++i) v(off++) = biases[l](i);
    }
    return v;
  }
  void unflatten(const Eigen::VectorXd& v) {
    int off = 0;
    for (int l = 0; l < n_layers(); ++l) {
      for (Eigen::Index i = 0; i < weights[l].size(); ++i) weights[l].data()[i] = v(off++);
      for (Eigen::Index i = 0; i < biases[l].size(); ++i) biases[l](i) = v(off++);
    }
  }
};

struct WeightTrajectory {
  std::vector<Eigen::VectorXd> snapshots;  // flattened parameter vectors
  std::vector<int> step_indices;
};

struct TrainResult {
  MlpModel model;
  WeightTrajectory trajectory;
  std::vector<double> epoch_losses;
};

inline MlpModel init_model(const std::vector<int>& dims, std::uint64_t seed) {
  if (dims.size() < 2) throw std::invalid_argument("init_model: need at least input and output dims");
  for (int d : dims)
    if (d < 1) throw std::invalid_argument("init_model: dims must be >= 1");
  MlpModel m;
  m.dims = dims;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double scale = std::sqrt(2.0 / dims[l]);
    Eigen::MatrixXd w(dims[l + 1], dims[l]);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = scale * rng.normal();
    m.weights.push_back(std::move(w));
    m.biases.push_back(Eigen::VectorXd::Zero(dims[l + 1]));
  }
  return m;
}

inline Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double mx = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - mx).exp();
  return e / e.sum();
}

// Label = argmax with lowest-index tie-break; probabilities sum to one.
inline std::pair<int, Eigen::VectorXd> predict(const MlpModel& m, const Eigen::VectorXd& row) {
  if (row.size() != m.dims.front())
    throw std::invalid_argument("predict: input dimension mismatch");
  Eigen::VectorXd h = row;
  for (int l = 0; l < m.n_layers(); ++l) {
    h = m.weights[l] * h + m.biases[l];
    if (l + 1 < m.n_layers()) h = h.cwiseMax(0.0);
  }
  const Eigen::VectorXd probs = softmax(h);
  int label = 0;
  for (Eigen::Index i = 1; i < probs.size(); ++i)
    if (probs(i) > probs(label)) label = static_cast<int>(i);
  return {label, probs};
}

// Mean cross-entropy over the batch; fills grad (same shapes as the model)
// when non-null.
inline double loss_and_gradient(const MlpModel& m, const Eigen::MatrixXd& x,
                                const std::vector<int>& y, MlpModel* grad) {
  const int n = static_cast<int>(x.rows());
  if (n == 0) throw std::invalid_argument("loss_and_gradient: empty batch");
  if (x.cols() != m.dims.front())
    throw std::invalid_argument("loss_and_gradient: feature dimension mismatch");
  if (static_cast<int>(y.size()) != n)
    throw std::invalid_argument("loss_and_gradient: label count mismatch");

  const int L = m.n_layers();
  if (grad) {
    grad->dims = m.dims;
    grad->weights.assign(L, Eigen::MatrixXd());
    grad->biases.assign(L, Eigen::VectorXd());
    for (int l = 0; l < L; ++l) {
      grad->weights[l] = Eigen::MatrixXd::Zero(m.weights[l].rows(), m.weights[l].cols());
      grad->biases[l] = Eigen::VectorXd::Zero(m.biases[l].size());
    }
  }

  double loss = 0.0;
  std::vector<Eigen::VectorXd> act(L + 1);
  for (int i = 0; i < n; ++i) {
    act[0] = x.row(i).transpose();
    for (int l = 0; l < L; ++l) {
      act[l + 1] = m.weights[l] * act[l] + m.biases[l];
      if (l + 1 < L) act[l + 1] = act[l + 1].cwiseMax(0.0);
    }
    const Eigen::VectorXd probs = softmax(act[L]);
    loss += -std::log(std::max(probs(y[i]), 1e-300));

    if (grad) {
      Eigen::VectorXd delta = probs;
      delta(y[i]) -= 1.0;
      for (int l = L - 1; l >= 0; --l) {
        grad->weights[l].noalias() += delta * act[l].transpose();
        grad->biases[l] += delta;
        if (l > 0) {
          delta = m.weights[l].transpose() * delta;
          for (Eigen::Index k = 0; k < delta.size(); ++k)
            if (act[l](k) <= 0.0) delta(k) = 0.0;  // rectifier mask
        }
      }
    }
  }
  loss /= n;
  if (grad)
    for (int l = 0; l < L; ++l) {
      grad->weights[l] /= n;
      grad->biases[l] /= n;
    }
  return loss;
}

// Seeded init, seeded shuffling, plain mini-batch gradient descent. The
// trajectory records the initialization and every snapshot_every-th update,
// plus the final state.
inline TrainResult train(const dataset::FeatureMatrix& data, const std::vector<int>& dims,
                         const TrainConfig& cfg, std::uint64_t seed) {
  data.validate();
  cfg.validate();
  if (data.rows.cols() != dims.front())
    throw std::invalid_argument("train: feature dimension does not match dims.front()");
  const int n_classes = dims.back();
  for (int label : data.labels)
    if (label < 0 || label >= n_classes)
      throw std::invalid_argument("train: label outside [0, n_classes)");

  TrainResult res;
  res.model = init_model(dims, seed);
  res.trajectory.snapshots.push_back(res.model.flatten());
  res.trajectory.step_indices.push_back(0);

  const int n = static_cast<int>(data.rows.rows());
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;

  int step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle_rng = Rng::derive(seed, 1000003ull + epoch);
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(shuffle_rng.uniform_index(i + 1));
      std::swap(order[i], order[j]);
    }
    double epoch_loss = 0.0;
    int n_batches = 0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int bs = std::min(cfg.batch_size, n - start);
      Eigen::MatrixXd bx(bs, data.rows.cols());
      std::vector<int> by(bs);
      for (int r = 0; r < bs; ++r) {
        bx.row(r) = data.rows.row(order[start + r]);
        by[r] = data.labels[order[start + r]];
      }
      MlpModel grad;
      const double loss = loss_and_gradient(res.model, bx, by, &grad);
      if (!std::isfinite(loss))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", step " + std::to_string(step));
      for (int l = 0; l < res.model.n_layers(); ++l) {
        res.model.weights[l] -= cfg.learning_rate * grad.weights[l];
        res.model.biases[l] -= cfg.learning_rate * grad.biases[l];
      }
      ++step;
      epoch_loss += loss;
      ++n_batches;
      if (step % cfg.snapshot_every == 0) {
        res.trajectory.snapshots.push_back(res.model.flatten());
        res.trajectory.step_indices.push_back(step);
      }
    }
    res.epoch_losses.push_back(epoch_loss / std::max(1, n_batches));
  }
  if (res.trajectory.step_indices.back() != step && step > 0) {
    res.trajectory.snapshots.push_back(res.model.flatten());
    res.trajectory.step_indices.push_back(step);
  }
  return res;
}

}  // namespace taint::victim
