#pragma once

// Channel and data generation plus sample-level transmission simulation:
// Rayleigh channels with optional distance pathloss, synthetic Gaussian
// feature statistics, per-slot AirComp aggregation, MAP and softmax
// classification, and seeded Monte Carlo accuracy evaluation. Every random
// quantity is drawn from a counter-based stream keyed by (seed, index), so
// results are independent of evaluation order and thread count.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <thread>
#include <vector>

#include "aircomp/errors.hpp"
#include "aircomp/model.hpp"
#include "aircomp/rng.hpp"

namespace aircomp {

enum class ChannelMode { physical, normalized };

struct NetworkConfig {
  int num_devices = 3;
  double cell_radius = 500.0;       // meters
  double pathloss_exponent = 3.5;
  double reference_distance = 1.0;  // meters
  ChannelMode mode = ChannelMode::normalized;
  double channel_noise_variance = 0.1;
  std::uint64_t rng_seed = 1;
};

struct TrialOutcome {
  int true_class = 0;
  int predicted_class = 0;
  Eigen::VectorXd received_feature;
};

struct AccuracyReport {
  int num_trials = 0;
  double overall_accuracy = 0.0;
  Eigen::VectorXd per_class_recall;
  double balanced_accuracy = 0.0;
  double recall_spread = 0.0;
};

inline double pathloss_factor(const NetworkConfig& config, double distance) {
  return std::pow(distance / config.reference_distance, -config.pathloss_exponent / 2.0);
}

// Per-device effective amplitude gain: pathloss times a Rayleigh amplitude
// with unit mean square. Each device uses its own sub-stream, so growing the
// network keeps the gains of existing devices unchanged.
inline ChannelState sample_channels(const NetworkConfig& config) {
  if (config.num_devices < 1) throw ConfigurationError("network needs at least one device");
  if (!(config.cell_radius > config.reference_distance)) {
    throw ConfigurationError("cell_radius must exceed reference_distance");
  }
  if (config.pathloss_exponent < 2.0 || config.pathloss_exponent > 6.0) {
    throw ConfigurationError("pathloss_exponent outside [2, 6]");
  }
  if (!(config.channel_noise_variance > 0.0)) {
    throw ConfigurationError("channel_noise_variance must be positive");
  }
  ChannelState channel;
  channel.gains.resize(config.num_devices);
  for (int k = 0; k < config.num_devices; ++k) {
    Rng rng(hash_combine(config.rng_seed, static_cast<std::uint64_t>(k)));
    double factor = 1.0;
    if (config.mode == ChannelMode::physical) {
      const double d = rng.uniform(config.reference_distance, config.cell_radius);
      factor = pathloss_factor(config, d);
    }
    const double re = rng.normal(0.0, std::sqrt(0.5));
    const double im = rng.normal(0.0, std::sqrt(0.5));
    // |CN(0,1)| amplitude; the floor keeps the h_k > 0 invariant on the
    // measure-zero event of a zero draw
    channel.gains(k) = std::max(factor * std::hypot(re, im), 1e-12);
  }
  channel.channel_noise_variance = config.channel_noise_variance;
  return channel;
}

// Synthetic statistics: class means i.i.d. N(0, class_separation^2), unit
// feature variances, uniform sensing noise. Degenerate draws (two mean rows
// closer than the degeneracy tolerance) are redrawn.
inline FeatureStatistics generate_synthetic_statistics(int num_classes, int num_features,
                                                       int num_devices, double class_separation,
                                                       double sensing_noise_variance,
                                                       std::uint64_t rng_seed,
                                                       int* redraws = nullptr) {
  if (num_classes < 2) throw ConfigurationError("need at least two classes");
  if (num_features < 1) throw ConfigurationError("need at least one feature");
  if (num_devices < 1) throw ConfigurationError("need at least one device");
  if (sensing_noise_variance < 0.0) throw ConfigurationError("sensing noise variance negative");
  if (redraws != nullptr) *redraws = 0;
  for (int attempt = 0; attempt < 100; ++attempt) {
    Rng rng(hash_combine(rng_seed, static_cast<std::uint64_t>(attempt)));
    FeatureStatistics stats;
    stats.class_means.resize(num_classes, num_features);
    for (int l = 0; l < num_classes; ++l) {
      for (int m = 0; m < num_features; ++m) {
        stats.class_means(l, m) = rng.normal(0.0, class_separation);
      }
    }
    stats.feature_variances = Eigen::VectorXd::Ones(num_features);
    stats.sensing_noise_variances =
        Eigen::MatrixXd::Constant(num_devices, num_features, sensing_noise_variance);
    bool degenerate = false;
    for (int l = 0; l < num_classes && !degenerate; ++l) {
      for (int lp = l + 1; lp < num_classes && !degenerate; ++lp) {
        degenerate = (stats.class_means.row(l) - stats.class_means.row(lp))
                         .cwiseAbs()
                         .maxCoeff() < kDegeneratePairTol;
      }
    }
    if (!degenerate) return stats;
    if (redraws != nullptr) ++*redraws;
  }
  throw DegenerateInstanceError("class means still degenerate after 100 redraws");
}

// One analog transmission: per slot m the devices send x_m + d_{k,m} scaled
// by b_{k,m}, the channel sums them coherently, and the server adds receiver
// noise.
inline Eigen::VectorXd simulate_transmission(const SystemInstance& instance,
                                             const PrecodingMatrix& b, int true_class, Rng& rng) {
  detail::check_dimensions(instance, b);
  if (true_class < 0 || true_class >= instance.num_classes()) {
    throw DomainError("class index out of range");
  }
  const int devices = instance.num_devices();
  const int features = instance.num_features();
  Eigen::VectorXd received(features);
  for (int m = 0; m < features; ++m) {
    const double x = rng.normal(instance.stats.class_means(true_class, m),
                                std::sqrt(instance.stats.feature_variances(m)));
    double acc = rng.normal(0.0, std::sqrt(instance.channel.channel_noise_variance));
    for (int k = 0; k < devices; ++k) {
      const double d = rng.normal(0.0, std::sqrt(instance.stats.sensing_noise_variances(k, m)));
      acc += instance.channel.gains(k) * b.b(k, m) * (x + d);
    }
    received(m) = acc;
  }
  return received;
}

// MAP rule under the received Gaussian mixture with uniform prior: shared
// per-slot variances cancel the normalizer, so this is a variance-weighted
// nearest-mean rule. Ties go to the smallest class index.
inline int map_classify(const ReceivedDistribution& dist, const Eigen::VectorXd& received) {
  if (received.size() != dist.num_features()) {
    throw ConfigurationError("received vector length does not match distribution");
  }
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int l = 0; l < dist.num_classes(); ++l) {
    double score = 0.0;
    for (int m = 0; m < dist.num_features(); ++m) {
      const double d = received(m) - dist.received_means(l, m);
      score -= d * d / (2.0 * dist.received_variances(m));
    }
    if (score > best_score) {
      best_score = score;
      best = l;
    }
  }
  return best;
}

// Linear multinomial logistic model on standardized features.
struct SoftmaxClassifier {
  Eigen::MatrixXd weights;        // L x (M+1), last column is the bias
  Eigen::VectorXd feature_shift;  // standardization mean
  Eigen::VectorXd feature_scale;  // standardization stddev

  int num_classes() const { return static_cast<int>(weights.rows()); }
  int num_features() const { return static_cast<int>(weights.cols()) - 1; }

  Eigen::VectorXd scores(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd z = (x - feature_shift).cwiseQuotient(feature_scale);
    return weights.leftCols(num_features()) * z + weights.col(num_features());
  }

  int classify(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd s = scores(x);
    int best = 0;
    for (int l = 1; l < num_classes(); ++l) {
      if (s(l) > s(best)) best = l;
    }
    return best;
  }
};

// Mean cross-entropy of a linear softmax model over an augmented design
// matrix (rows are [features..., 1]), with the analytic gradient on request.
inline double softmax_loss_and_grad(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& design,
                                    const Eigen::VectorXi& labels,
                                    Eigen::MatrixXd* grad = nullptr) {
  const int n = static_cast<int>(design.rows());
  const int classes = static_cast<int>(weights.rows());
  if (weights.cols() != design.cols()) throw ConfigurationError("design/weight shape mismatch");
  if (labels.size() != n) throw ConfigurationError("label count does not match design rows");
  Eigen::MatrixXd logits = design * weights.transpose();  // n x L
  const Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
  logits.colwise() -= row_max;
  const Eigen::MatrixXd expo = logits.array().exp().matrix();
  const Eigen::VectorXd norm = expo.rowwise().sum();
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    loss -= logits(i, labels(i)) - std::log(norm(i));
  }
  loss /= n;
  if (grad != nullptr) {
    Eigen::MatrixXd prob = expo.array().colwise() / norm.array();  // n x L
    for (int i = 0; i < n; ++i) prob(i, labels(i)) -= 1.0;
    *grad = (prob.transpose() * design) / n;  // L x (M+1)
    if (!grad->allFinite()) throw DomainError("softmax gradient is not finite");
  }
  if (!std::isfinite(loss)) throw DomainError("softmax loss is not finite; reduce learning rate");
  return loss;
}

// Full-batch gradient descent with halving backtracking, so the training
// cross-entropy is non-increasing epoch over epoch.
inline SoftmaxClassifier train_softmax_classifier(const SampleTable& samples, int epochs,
                                                  double learning_rate) {
  const int n = samples.num_samples();
  const int features = samples.num_features();
  if (n == 0 || features == 0) throw InsufficientDataError("empty training set");
  const int classes = samples.labels.maxCoeff() + 1;
  if (samples.labels.minCoeff() < 0) throw IngestionError("negative class label");
  if (classes < 2) throw InsufficientDataError("need at least two classes");
  Eigen::VectorXi counts = Eigen::VectorXi::Zero(classes);
  for (int i = 0; i < n; ++i) ++counts(samples.labels(i));
  if (counts.minCoeff() < 50) {
    throw InsufficientDataError("softmax training needs at least 50 samples per class");
  }
  if (!(learning_rate > 0.0)) throw ConfigurationError("learning rate must be positive");

  SoftmaxClassifier clf;
  clf.feature_shift = samples.features.colwise().mean();
  clf.feature_scale.resize(features);
  for (int m = 0; m < features; ++m) {
    const Eigen::VectorXd centered = samples.features.col(m).array() - clf.feature_shift(m);
    clf.feature_scale(m) = std::max(std::sqrt(centered.squaredNorm() / std::max(n - 1, 1)), 1e-12);
  }
  Eigen::MatrixXd design(n, features + 1);
  design.leftCols(features) =
      (samples.features.rowwise() - clf.feature_shift.transpose()).array().rowwise() /
      clf.feature_scale.transpose().array();
  design.col(features).setOnes();

  clf.weights = Eigen::MatrixXd::Zero(classes, features + 1);
  Eigen::MatrixXd grad;
  double loss = softmax_loss_and_grad(clf.weights, design, samples.labels, &grad);
  double step = learning_rate;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    bool accepted = false;
    while (step > 1e-15) {
      const Eigen::MatrixXd trial = clf.weights - step * grad;
      Eigen::MatrixXd trial_grad;
      const double trial_loss = softmax_loss_and_grad(trial, design, samples.labels, &trial_grad);
      if (trial_loss <= loss) {
        clf.weights = trial;
        loss = trial_loss;
        grad = std::move(trial_grad);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // at the floating-point floor of the objective
  }
  return clf;
}

// Balanced labeled set of simulated received features, one sub-stream per
// sample.
inline SampleTable simulate_training_set(const SystemInstance& instance, const PrecodingMatrix& b,
                                         int samples_per_class, std::uint64_t rng_seed) {
  if (samples_per_class < 1) throw ConfigurationError("samples_per_class must be positive");
  const int classes = instance.num_classes();
  const int n = classes * samples_per_class;
  SampleTable table;
  table.features.resize(n, instance.num_features());
  table.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    const int label = i % classes;
    Rng rng(hash_combine(rng_seed, static_cast<std::uint64_t>(i)));
    table.features.row(i) = simulate_transmission(instance, b, label, rng).transpose();
    table.labels(i) = label;
  }
  return table;
}

namespace detail {

template <typename Classify>
AccuracyReport evaluate_trials(const SystemInstance& instance, const PrecodingMatrix& b,
                               int num_trials, std::uint64_t rng_seed, const Classify& classify,
                               int num_threads) {
  if (num_trials < 1) throw ConfigurationError("num_trials must be at least 1");
  const int classes = instance.num_classes();
  const int workers = std::max(1, std::min(num_threads, num_trials));
  std::vector<Eigen::VectorXi> count(workers, Eigen::VectorXi::Zero(classes));
  std::vector<Eigen::VectorXi> correct(workers, Eigen::VectorXi::Zero(classes));
  const auto run = [&](int worker) {
    // trial index determines the stream, so the partition does not matter
    for (int trial = worker; trial < num_trials; trial += workers) {
      Rng rng(hash_combine(rng_seed, static_cast<std::uint64_t>(trial)));
      const int truth = rng.uniform_int(classes);
      const Eigen::VectorXd received = simulate_transmission(instance, b, truth, rng);
      ++count[static_cast<std::size_t>(worker)](truth);
      correct[static_cast<std::size_t>(worker)](truth) += classify(received) == truth ? 1 : 0;
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& th : pool) th.join();
  }
  for (int w = 1; w < workers; ++w) {
    count[0] += count[static_cast<std::size_t>(w)];
    correct[0] += correct[static_cast<std::size_t>(w)];
  }
  AccuracyReport report;
  report.num_trials = num_trials;
  report.per_class_recall.resize(classes);
  int total_correct = 0;
  for (int l = 0; l < classes; ++l) {
    total_correct += correct[0](l);
    report.per_class_recall(l) = count[0](l) > 0
                                     ? static_cast<double>(correct[0](l)) / count[0](l)
                                     : 0.0;
  }
  report.overall_accuracy = static_cast<double>(total_correct) / num_trials;
  report.balanced_accuracy = report.per_class_recall.mean();
  report.recall_spread =
      report.per_class_recall.maxCoeff() - report.per_class_recall.minCoeff();
  return report;
}

}  // namespace detail

inline AccuracyReport evaluate_accuracy(const SystemInstance& instance, const PrecodingMatrix& b,
                                        int num_trials, std::uint64_t rng_seed,
                                        int num_threads = 1) {
  const ReceivedDistribution dist = received_moments(instance, b);
  return detail::evaluate_trials(
      instance, b, num_trials, rng_seed,
      [&dist](const Eigen::VectorXd& received) { return map_classify(dist, received); },
      num_threads);
}

inline AccuracyReport evaluate_accuracy(const SystemInstance& instance, const PrecodingMatrix& b,
                                        const SoftmaxClassifier& clf, int num_trials,
                                        std::uint64_t rng_seed, int num_threads = 1) {
  return detail::evaluate_trials(
      instance, b, num_trials, rng_seed,
      [&clf](const Eigen::VectorXd& received) { return clf.classify(received); }, num_threads);
}

}  // namespace aircomp
