#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "audiotaint/anomaly.hpp"

using namespace taint;
using namespace taint::anomaly;
using Catch::Approx;

namespace {

// Brute-force LOF written directly from the definition; mirrors the
// exact-k neighbor convention with (distance, index) tie-breaks.
Eigen::VectorXd lof_bruteforce(const Eigen::MatrixXd& pts, int k) {
  const int n = static_cast<int>(pts.rows());
  auto d = [&](int a, int b) { return (pts.row(a) - pts.row(b)).norm(); };
  auto knn = [&](int i) {
    std::vector<int> all;
    for (int j = 0; j < n; ++j)
      if (j != i) all.push_back(j);
    std::sort(all.begin(), all.end(), [&](int a, int b) {
      if (d(i, a) != d(i, b)) return d(i, a) < d(i, b);
      return a < b;
    });
    all.resize(k);
    return all;
  };
  auto kdist = [&](int i) { return d(i, knn(i).back()); };
  auto lrd = [&](int i) {
    double acc = 0.0;
    for (int j : knn(i)) acc += std::max(kdist(j), d(i, j));
    return std::min(1e12, k / std::max(acc, 1e-12));
  };
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int j : knn(i)) acc += lrd(j);
    out(i) = acc / (k * lrd(i));
  }
  return out;
}

std::vector<Eigen::MatrixXd> sine_frames(int n, int T, int dim, std::uint64_t seed) {
  std::vector<Eigen::MatrixXd> out;
  Rng gen(seed);
  for (int s = 0; s < n; ++s) {
    Eigen::MatrixXd f(T, dim);
    const double phase = gen.uniform(0.0, 2.0 * kPi);
    for (int t = 0; t < T; ++t)
      for (int d = 0; d < dim; ++d)
        f(t, d) = std::sin(0.3 * t + phase + d) + 0.05 * gen.normal();
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace

TEST_CASE("autoencoder gradients match central finite differences") {
  SeqAutoencoder m = init_autoencoder(3, 4, 2, 5);
  Eigen::MatrixXd x(5, 3);
  Rng gen(6);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = gen.normal() * 0.5;

  SeqAutoencoder grad;
  loss_and_gradient(m, x, &grad);
  const Eigen::VectorXd g = grad.flatten();
  const Eigen::VectorXd theta = m.flatten();

  const double h = 1e-5;
  double max_rel = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    SeqAutoencoder plus = m, minus = m;
    Eigen::VectorXd tp = theta, tm = theta;
    tp(i) += h;
    tm(i) -= h;
    plus.unflatten(tp);
    minus.unflatten(tm);
    const double fd =
        (loss_and_gradient(plus, x, nullptr) - loss_and_gradient(minus, x, nullptr)) /
        (2.0 * h);
    const double denom = std::max({std::abs(fd), std::abs(g(i)), 1e-8});
    max_rel = std::max(max_rel, std::abs(fd - g(i)) / denom);
  }
  REQUIRE(max_rel <= 1e-4);
}

TEST_CASE("zero epochs keeps the seeded initialization") {
  const auto frames = sine_frames(3, 6, 4, 7);
  AnomalyConfig cfg;
  cfg.hidden_dim = 5;
  cfg.latent_dim = 2;
  const auto m = train_autoencoder(frames, cfg, 0, 0.01, 11);
  const auto fresh = init_autoencoder(4, 5, 2, 11);
  REQUIRE(m.flatten() == fresh.flatten());
}

TEST_CASE("a single sample is memorized with a wide-enough latent") {
  const auto frames = sine_frames(1, 4, 3, 13);
  AnomalyConfig cfg;
  cfg.hidden_dim = 16;
  cfg.latent_dim = 3;  // latent_dim = input_dim
  const auto m = train_autoencoder(frames, cfg, 3000, 0.05, 3);
  REQUIRE(reconstruction_loss(m, frames[0]) < 1e-3);
}

TEST_CASE("training is deterministic per seed") {
  const auto frames = sine_frames(6, 5, 3, 17);
  AnomalyConfig cfg;
  cfg.hidden_dim = 6;
  cfg.latent_dim = 2;
  const auto a = train_autoencoder(frames, cfg, 10, 0.02, 21);
  const auto b = train_autoencoder(frames, cfg, 10, 0.02, 21);
  const auto c = train_autoencoder(frames, cfg, 10, 0.02, 22);
  REQUIRE(a.flatten() == b.flatten());
  REQUIRE(a.flatten() != c.flatten());
}

TEST_CASE("reconstruction loss identities") {
  SeqAutoencoder m = init_autoencoder(3, 4, 2, 31);
  // Zero-output model: kill the read-out layer.
  m.w_out.setZero();
  m.b_out.setZero();
  Eigen::MatrixXd x(2, 3);
  x << 0.5, 0.5, 0.25, 0.25, 0.5, 0.25;
  x /= x.norm();  // unit Frobenius norm
  REQUIRE(reconstruction_loss(m, x) == Approx(1.0).margin(1e-12));

  // Joint row permutation leaves the elementwise squared sum unchanged.
  Eigen::MatrixXd a(3, 2), b(3, 2);
  a << 1, 2, 3, 4, 5, 6;
  b << 0, 1, 1, 0, 2, 2;
  const double direct = (a - b).squaredNorm();
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(3);
  perm.indices() << 2, 0, 1;
  REQUIRE(((perm * a) - (perm * b)).squaredNorm() == Approx(direct));
}

TEST_CASE("benign-quantile threshold and flagging") {
  REQUIRE(threshold_from_benign(std::vector<double>(9, 2.5), 0.95) == Approx(2.5));

  std::vector<double> ramp;
  for (int i = 1; i <= 100; ++i) ramp.push_back(static_cast<double>(i));
  REQUIRE(threshold_from_benign(ramp, 0.95) == Approx(95.0).margin(0.11));

  double prev = 0.0;
  for (double q : {0.1, 0.3, 0.5, 0.7, 0.9, 0.99}) {
    const double t = threshold_from_benign(ramp, q);
    REQUIRE(t >= prev);
    prev = t;
  }
  REQUIRE_THROWS_AS(threshold_from_benign({}, 0.95), std::invalid_argument);

  // Flags equal an independent comparison pass.
  const auto frames = sine_frames(8, 5, 3, 41);
  AnomalyConfig cfg;
  cfg.hidden_dim = 6;
  cfg.latent_dim = 2;
  const auto m = train_autoencoder(frames, cfg, 20, 0.02, 4);
  std::vector<double> losses;
  for (const auto& f : frames) losses.push_back(reconstruction_loss(m, f));
  const double tau = threshold_from_benign(losses, 0.5);
  const auto flags = detect_by_reconstruction(m, frames, tau);
  for (std::size_t i = 0; i < frames.size(); ++i)
    REQUIRE(flags[i] == (losses[i] > tau));

  const auto none = detect_by_reconstruction(m, frames,
                                             std::numeric_limits<double>::infinity());
  for (bool f : none) REQUIRE_FALSE(f);
  const auto all = detect_by_reconstruction(m, frames, -1.0);
  for (bool f : all) REQUIRE(f);
}

TEST_CASE("pca recovers a line exactly and orders variance") {
  Eigen::MatrixXd line(20, 3);
  Eigen::RowVector3d dir(1.0, -2.0, 0.5);
  for (int i = 0; i < 20; ++i) line.row(i) = (i * 0.3 - 2.0) * dir;
  const auto r = pca_reduce(line, 1);
  // Reconstruction from one component is exact for rank-1 data.
  const Eigen::RowVectorXd mean = line.colwise().mean();
  const Eigen::MatrixXd recon =
      (r.projected * r.components.transpose()).rowwise() + mean;
  REQUIRE((recon - line).cwiseAbs().maxCoeff() < 1e-10);

  Rng gen(51);
  Eigen::MatrixXd cloud(50, 8);
  for (Eigen::Index i = 0; i < cloud.size(); ++i) cloud.data()[i] = gen.normal();
  cloud.col(0) *= 5.0;
  cloud.col(1) *= 2.0;
  const auto full = pca_reduce(cloud, 8);
  for (int c = 1; c < 8; ++c)
    REQUIRE(full.explained_variance(c) <= full.explained_variance(c - 1));

  // Orthonormal components.
  const Eigen::MatrixXd gram = full.components.transpose() * full.components;
  REQUIRE((gram - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-10);

  // Projection matches a brute-force Jacobi eigensolve up to column sign:
  // compare squared projections against per-direction variance recovery.
  const Eigen::MatrixXd centered = cloud.rowwise() - cloud.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / 49.0;
  for (int c = 0; c < 8; ++c) {
    const Eigen::VectorXd comp = full.components.col(c);
    const double rayleigh = comp.transpose() * cov * comp;
    REQUIRE(rayleigh == Approx(full.explained_variance(c)).margin(1e-8));
  }

  // Rank deficiency: a 2D plane embedded in 5D pads the trailing component.
  Eigen::MatrixXd plane(30, 5);
  Rng g2(52);
  for (int i = 0; i < 30; ++i) {
    const double a = g2.normal(), b = g2.normal();
    plane.row(i) << a, b, a + b, a - b, 2 * a;
  }
  const auto padded = pca_reduce(plane, 4);
  REQUIRE(padded.explained_variance(2) == Approx(0.0).margin(1e-9));
  REQUIRE(padded.components.col(3).norm() == Approx(0.0).margin(1e-12));

  REQUIRE_THROWS_AS(pca_reduce(line, 4), std::invalid_argument);
}

TEST_CASE("k-means separates blobs and never increases the objective") {
  Rng gen(61);
  Eigen::MatrixXd pts(60, 2);
  for (int i = 0; i < 30; ++i) pts.row(i) << gen.normal() + 10.0, gen.normal();
  for (int i = 30; i < 60; ++i) pts.row(i) << gen.normal() - 10.0, gen.normal();

  const auto r = kmeans_cluster(pts, 2, 5);
  const int first = r.assignments(0);
  for (int i = 0; i < 30; ++i) REQUIRE(r.assignments(i) == first);
  for (int i = 30; i < 60; ++i) REQUIRE(r.assignments(i) == 1 - first);
  for (std::size_t i = 1; i < r.wcss_history.size(); ++i)
    REQUIRE(r.wcss_history[i] <= r.wcss_history[i - 1] + 1e-9);

  // k = n: every point its own centroid, zero objective.
  Eigen::MatrixXd few = pts.topRows(7);
  const auto each = kmeans_cluster(few, 7, 9);
  REQUIRE(each.wcss_history.back() == Approx(0.0).margin(1e-18));

  REQUIRE_THROWS_AS(kmeans_cluster(few, 8, 1), std::invalid_argument);
}

TEST_CASE("centroid distances") {
  Eigen::MatrixXd centroids(1, 2);
  centroids << 0.0, 0.0;
  Eigen::MatrixXd pts(2, 2);
  pts << 3.0, 4.0, 0.0, 0.0;
  const auto d = centroid_distances(pts, centroids);
  REQUIRE(d(0) == Approx(5.0));
  REQUIRE(d(1) == 0.0);

  Eigen::MatrixXd two(2, 2);
  two << 0.0, 0.0, 10.0, 0.0;
  Eigen::MatrixXd q(1, 2);
  q << 9.0, 0.0;
  REQUIRE(centroid_distances(q, two)(0) == Approx(1.0));  // nearest centroid wins
  for (Eigen::Index i = 0; i < d.size(); ++i) REQUIRE(d(i) >= 0.0);

  REQUIRE_THROWS_AS(centroid_distances(pts, Eigen::MatrixXd(0, 2)), std::invalid_argument);
}

TEST_CASE("lof scores: interior points near one, far outlier large, oracle match") {
  Rng gen(71);
  const int n_cluster = 80;
  Eigen::MatrixXd pts(n_cluster + 1, 2);
  for (int i = 0; i < n_cluster; ++i)
    pts.row(i) << gen.uniform(-1.0, 1.0), gen.uniform(-1.0, 1.0);
  pts.row(n_cluster) << 20.0, 20.0;  // ten cluster-radii away

  const auto scores = lof_scores(pts, 15);
  REQUIRE(scores(n_cluster) > 1.5);

  int interior_checked = 0;
  for (int i = 0; i < n_cluster; ++i) {
    if (std::abs(pts(i, 0)) < 0.5 && std::abs(pts(i, 1)) < 0.5) {
      REQUIRE(scores(i) >= 0.8);
      REQUIRE(scores(i) <= 1.2);
      ++interior_checked;
    }
  }
  REQUIRE(interior_checked > 0);

  const auto oracle = lof_bruteforce(pts, 15);
  REQUIRE((scores - oracle).cwiseAbs().maxCoeff() < 1e-8);

  // Duplicated points do not divide by zero.
  Eigen::MatrixXd dup(6, 2);
  dup << 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 5, 5;
  const auto ds = lof_scores(dup, 3);
  for (Eigen::Index i = 0; i < ds.size(); ++i) REQUIRE(std::isfinite(ds(i)));

  REQUIRE_THROWS_AS(lof_scores(dup, 6), std::invalid_argument);
}

TEST_CASE("detection accuracy counts recall and false positives") {
  std::vector<bool> flags{true, false, true, false, true, false};
  REQUIRE(detection_accuracy(flags, {0, 2, 4}).recall == 1.0);
  REQUIRE(detection_accuracy(flags, {0, 2, 4}).false_positive_rate == 0.0);

  std::vector<bool> silent(6, false);
  REQUIRE(detection_accuracy(silent, {0, 2}).recall == 0.0);

  std::vector<bool> half{true, false, false, false, false, false};
  REQUIRE(detection_accuracy(half, {0, 2}).recall == Approx(0.5));

  REQUIRE_THROWS_AS(detection_accuracy(flags, {}), std::invalid_argument);
}

TEST_CASE("retraining on benign data does not degrade benign reconstruction much") {
  const auto frames = sine_frames(12, 6, 4, 81);
  AnomalyConfig cfg;
  cfg.hidden_dim = 10;
  cfg.latent_dim = 3;
  const auto m = train_autoencoder(frames, cfg, 60, 0.02, 6);

  double before = 0.0;
  for (const auto& f : frames) before += reconstruction_loss(m, f);

  const auto unchanged = retrain_mixed(m, frames, {}, 0, 0.02, 7);
  REQUIRE(unchanged.flatten() == m.flatten());

  const auto more = retrain_mixed(m, frames, {}, 20, 0.02, 7);
  double after = 0.0;
  for (const auto& f : frames) after += reconstruction_loss(more, f);
  REQUIRE(after <= 1.10 * before);

  const auto again = retrain_mixed(m, frames, {}, 20, 0.02, 7);
  REQUIRE(again.flatten() == more.flatten());
}
