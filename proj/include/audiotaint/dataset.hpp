#pragma once

// Dataset ingestion, poisoned-set construction, poisoning-budget validation
// and benign-accuracy / attack-success-rate measurement.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "audiotaint/audio.hpp"
#include "audiotaint/rng.hpp"
#include "audiotaint/trigger.hpp"

namespace taint::dataset {

struct Dataset {
  std::vector<audio::AudioSample> samples;
  int n_classes = 0;

  void validate() const {
    if (n_classes < 1) throw std::invalid_argument("Dataset: n_classes must be >= 1");
    for (const auto& s : samples)
      if (s.label < 0 || s.label >= n_classes)
        throw std::invalid_argument("Dataset: label outside [0, n_classes)");
  }
};

struct PoisonSpec {
  double poison_rate = 0.1;  // in (0, 1)
  int target_label = 3;
  bool relabel = true;  // true: labels forced to target; false: labels kept

  void validate(int n_classes) const {
    if (poison_rate <= 0.0 || poison_rate >= 1.0)
      throw std::invalid_argument("PoisonSpec: poison_rate must lie in (0,1)");
    if (target_label < 0 || target_label >= n_classes)
      throw std::invalid_argument("PoisonSpec: target_label outside [0, n_classes)");
  }
};

// Attack budget: at most max_feature_changes samples perturbed, each within
// feature_magnitude in the p-norm; at most max_label_changes labels altered,
// each within label_magnitude in the q-norm sense.
struct PoisonBudget {
  int max_label_changes = 0;        // l
  double label_magnitude = 0.0;     // zeta
  double label_norm_order = 1.0;    // q (informational for scalar labels)
  double feature_magnitude = 0.0;   // epsilon
  double feature_norm_order = 2.0;  // p; use INFINITY for the sup norm
  int max_feature_changes = 0;      // h
};

// Staged features for the victim model: one row per sample.
struct FeatureMatrix {
  Eigen::MatrixXd rows;
  std::vector<int> labels;

  void validate() const {
    if (rows.rows() != static_cast<Eigen::Index>(labels.size()))
      throw std::invalid_argument("FeatureMatrix: row/label count mismatch");
    if (!rows.allFinite()) throw std::invalid_argument("FeatureMatrix: non-finite entries");
  }
};

// Selects ceil(poison_rate * N) indices uniformly without replacement,
// applies the trigger to each and relabels when requested. Unselected
// samples are returned bit-unchanged.
inline std::pair<Dataset, std::vector<int>> poison_dataset(const Dataset& d,
                                                           const PoisonSpec& spec,
                                                           const trigger::Trigger& t,
                                                           std::uint64_t seed) {
  d.validate();
  spec.validate(d.n_classes);
  const std::size_t n = d.samples.size();
  if (spec.poison_rate * static_cast<double>(n) < 1.0)
    throw std::invalid_argument("poison_dataset: poison_rate * N must be >= 1");
  const std::size_t n_poison =
      static_cast<std::size_t>(std::ceil(spec.poison_rate * static_cast<double>(n)));

  // Partial Fisher-Yates for a uniform sample without replacement.
  std::vector<int> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = static_cast<int>(i);
  Rng rng(seed);
  for (std::size_t i = 0; i < n_poison; ++i) {
    const std::size_t j = i + rng.uniform_index(n - i);
    std::swap(pool[i], pool[j]);
  }
  std::vector<int> chosen(pool.begin(), pool.begin() + n_poison);
  std::sort(chosen.begin(), chosen.end());

  Dataset out = d;
  for (int idx : chosen) {
    auto& s = out.samples[idx];
    s.waveform = trigger::apply_trigger(s.waveform, t);
    if (spec.relabel) s.label = spec.target_label;
  }
  return {std::move(out), std::move(chosen)};
}

namespace detail {
inline double vector_norm(const std::vector<double>& a, const std::vector<double>& b,
                          double order) {
  double acc = 0.0;
  if (std::isinf(order)) {
    for (std::size_t i = 0; i < a.size(); ++i) acc = std::max(acc, std::abs(a[i] - b[i]));
    return acc;
  }
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::pow(std::abs(a[i] - b[i]), order);
  return std::pow(acc, 1.0 / order);
}
}  // namespace detail

// True iff the poisoned set stays within the budget: no more than
// max_feature_changes perturbed samples, each within feature_magnitude;
// no more than max_label_changes altered labels, each within label_magnitude.
inline bool validate_budget(const Dataset& clean, const Dataset& poisoned,
                            const PoisonBudget& b) {
  if (clean.samples.size() != poisoned.samples.size())
    throw std::invalid_argument("validate_budget: datasets must be aligned and equal-sized");
  int feature_changes = 0, label_changes = 0;
  for (std::size_t i = 0; i < clean.samples.size(); ++i) {
    const auto& x = clean.samples[i];
    const auto& xp = poisoned.samples[i];
    if (x.waveform.size() != xp.waveform.size())
      throw std::invalid_argument("validate_budget: waveform length mismatch at index " +
                                  std::to_string(i));
    const double dist = detail::vector_norm(x.waveform, xp.waveform, b.feature_norm_order);
    if (dist > 0.0) {
      ++feature_changes;
      if (dist > b.feature_magnitude) return false;
    }
    if (x.label != xp.label) {
      ++label_changes;
      if (std::abs(x.label - xp.label) > b.label_magnitude) return false;
    }
  }
  return feature_changes <= b.max_feature_changes && label_changes <= b.max_label_changes;
}

struct AttackMetrics {
  double benign_accuracy = 0.0;
  double attack_success_rate = 0.0;
};

// BA: accuracy of the classifier on the clean test set. ASR: fraction of
// triggered copies of non-target-class test samples predicted as the target.
inline AttackMetrics compute_metrics(
    const std::function<int(const audio::AudioSample&)>& classify, const Dataset& clean_test,
    const trigger::Trigger& t, int target_label) {
  clean_test.validate();
  if (clean_test.samples.empty())
    throw std::invalid_argument("compute_metrics: empty test set");

  AttackMetrics m;
  int correct = 0;
  for (const auto& s : clean_test.samples)
    if (classify(s) == s.label) ++correct;
  m.benign_accuracy = static_cast<double>(correct) / clean_test.samples.size();

  int fooled = 0, eligible = 0;
  for (const auto& s : clean_test.samples) {
    if (s.label == target_label) continue;
    ++eligible;
    audio::AudioSample triggered = s;
    triggered.waveform = trigger::apply_trigger(s.waveform, t);
    if (classify(triggered) == target_label) ++fooled;
  }
  if (eligible == 0)
    throw std::invalid_argument("compute_metrics: no non-target-class samples for ASR");
  m.attack_success_rate = static_cast<double>(fooled) / eligible;
  return m;
}

}  // namespace taint::dataset
