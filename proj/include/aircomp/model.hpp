#pragma once

// System model for multi-device AirComp feature aggregation: problem data
// types and the deterministic propagation from per-class feature statistics
// to the distribution of the aggregated feature seen at the server.

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "aircomp/errors.hpp"

namespace aircomp {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

// Relative slack for feasibility checks (solver tolerance headroom).
inline constexpr double kFeasTol = 1e-6;
// Two class-mean rows closer than this in every element are degenerate.
inline constexpr double kDegeneratePairTol = 1e-9;

inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double watt_to_dbm(double watt) { return 10.0 * std::log10(watt) + 30.0; }

// Class-conditional Gaussian feature model shared by all devices:
// class means (L x M), per-element variances (M), and per-device sensing
// noise variances (K x M).
struct FeatureStatistics {
  MatrixXd class_means;
  VectorXd feature_variances;
  MatrixXd sensing_noise_variances;

  int num_classes() const { return static_cast<int>(class_means.rows()); }
  int num_features() const { return static_cast<int>(class_means.cols()); }
  int num_devices() const { return static_cast<int>(sensing_noise_variances.rows()); }
};

// Effective real channel amplitudes after phase pre-compensation, plus the
// channel noise power at the receiver.
struct ChannelState {
  VectorXd gains;
  double channel_noise_variance = 0.0;

  int num_devices() const { return static_cast<int>(gains.size()); }
};

// Per-slot transmit power caps P_k and whole-vector energy caps Phat_k,
// both in linear watts.
struct PowerBudget {
  VectorXd per_slot;
  VectorXd total;

  int num_devices() const { return static_cast<int>(per_slot.size()); }
};

// Transmit amplitudes b_{k,m} (sqrt-watt), the decision variable.
struct PrecodingMatrix {
  MatrixXd b;

  int num_devices() const { return static_cast<int>(b.rows()); }
  int num_features() const { return static_cast<int>(b.cols()); }

  static PrecodingMatrix zero(int devices, int features) {
    return PrecodingMatrix{MatrixXd::Zero(devices, features)};
  }
};

// Both power constraints within relative tolerance `tol`.
inline bool feasible(const PrecodingMatrix& p, const PowerBudget& budget, double tol = kFeasTol) {
  if (p.num_devices() != budget.num_devices()) return false;
  for (int k = 0; k < p.num_devices(); ++k) {
    const double cap = budget.per_slot(k) * (1.0 + tol);
    for (int m = 0; m < p.num_features(); ++m) {
      if (p.b(k, m) * p.b(k, m) > cap) return false;
    }
    if (p.b.row(k).squaredNorm() > budget.total(k) * (1.0 + tol)) return false;
  }
  return true;
}

// Moments of the aggregated feature vector at the server.
struct ReceivedDistribution {
  MatrixXd received_means;      // L x M
  VectorXd received_variances;  // M

  int num_classes() const { return static_cast<int>(received_means.rows()); }
  int num_features() const { return static_cast<int>(received_means.cols()); }
};

struct SystemInstance {
  FeatureStatistics stats;
  ChannelState channel;
  PowerBudget budget;

  int num_devices() const { return channel.num_devices(); }
  int num_classes() const { return stats.num_classes(); }
  int num_features() const { return stats.num_features(); }
};

namespace detail {

inline void check_dimensions(const SystemInstance& instance, const PrecodingMatrix& b) {
  if (b.num_devices() != instance.num_devices() || b.num_features() != instance.num_features()) {
    std::ostringstream msg;
    msg << "precoding matrix is " << b.num_devices() << "x" << b.num_features()
        << ", instance expects " << instance.num_devices() << "x" << instance.num_features();
    throw ConfigurationError(msg.str());
  }
  if (!b.b.allFinite()) throw ConfigurationError("precoding matrix has non-finite entries");
}

}  // namespace detail

// Distribution of the aggregated feature under precoding `b`:
//   mean_{l,m}   = (sum_k h_k b_{k,m}) mu_{l,m}
//   var_m        = (sum_k h_k b_{k,m})^2 sigma_m^2
//                  + sum_k h_k^2 b_{k,m}^2 delta_{k,m}^2 + noise
inline ReceivedDistribution received_moments(const SystemInstance& instance,
                                             const PrecodingMatrix& b) {
  detail::check_dimensions(instance, b);
  const VectorXd& h = instance.channel.gains;
  const Eigen::RowVectorXd agg = h.transpose() * b.b;  // per-element aggregate gain
  ReceivedDistribution dist;
  dist.received_means =
      (instance.stats.class_means.array().rowwise() * agg.array()).matrix();
  const Eigen::ArrayXd h2 = h.array().square();
  const Eigen::ArrayXXd sens =
      instance.stats.sensing_noise_variances.array() * b.b.array().square();
  const Eigen::RowVectorXd sensing = (sens.colwise() * h2).colwise().sum().matrix();
  dist.received_variances =
      (agg.transpose().array().square() * instance.stats.feature_variances.array() +
       sensing.transpose().array() + instance.channel.channel_noise_variance)
          .matrix();
  return dist;
}

// Labeled feature samples: one row per sample, labels are 0-based classes.
struct SampleTable {
  MatrixXd features;
  VectorXi labels;

  int num_samples() const { return static_cast<int>(features.rows()); }
  int num_features() const { return static_cast<int>(features.cols()); }
};

// Aligned noisy observations of the same underlying samples, one table per
// device (identical shapes; row n of every table observes the same source).
struct DeviceSampleTable {
  std::vector<MatrixXd> per_device;

  int num_devices() const { return static_cast<int>(per_device.size()); }
};

// Estimates class means, pooled within-class variances, and (when aligned
// per-device observations are available) per-device sensing noise variances.
//
// Sensing noise: with residuals r_k = x_k - mean_j x_j, the mean square of
// r_k is (1-2/K) delta_k^2 + S/K^2 where S = sum_j delta_j^2, so the
// estimate is unbiased by solving that linear system (K >= 3). For K = 2 the
// system only identifies S and the estimate splits it evenly.
inline FeatureStatistics estimate_statistics(
    const SampleTable& samples, const std::optional<DeviceSampleTable>& device_samples,
    int num_devices, double fallback_sensing_variance) {
  const int n = samples.num_samples();
  const int m = samples.num_features();
  if (n == 0 || m == 0) throw IngestionError("empty sample table");
  if (!samples.features.allFinite()) throw IngestionError("non-finite feature value");
  if (samples.labels.size() != n) throw IngestionError("label column length mismatch");
  const int num_classes = samples.labels.maxCoeff() + 1;
  if (samples.labels.minCoeff() < 0) throw IngestionError("negative class label");
  if (num_classes < 2) throw InsufficientDataError("need at least two classes");

  FeatureStatistics stats;
  stats.class_means = MatrixXd::Zero(num_classes, m);
  VectorXi counts = VectorXi::Zero(num_classes);
  for (int i = 0; i < n; ++i) {
    counts(samples.labels(i)) += 1;
    stats.class_means.row(samples.labels(i)) += samples.features.row(i);
  }
  for (int l = 0; l < num_classes; ++l) {
    if (counts(l) < 2) {
      throw InsufficientDataError("class " + std::to_string(l) + " has " +
                                  std::to_string(counts(l)) + " samples, need >= 2");
    }
    stats.class_means.row(l) /= counts(l);
  }

  // Pooled within-class variance (classes share sigma_m^2), divisor n - L.
  MatrixXd sq_dev = MatrixXd::Zero(1, m);
  for (int i = 0; i < n; ++i) {
    const auto dev = samples.features.row(i) - stats.class_means.row(samples.labels(i));
    sq_dev += dev.array().square().matrix();
  }
  stats.feature_variances = (sq_dev / static_cast<double>(n - num_classes)).transpose();
  if ((stats.feature_variances.array() <= 0.0).any()) {
    throw InsufficientDataError("degenerate feature variance: all samples identical in some element");
  }

  if (device_samples.has_value()) {
    const auto& tables = device_samples->per_device;
    const int k_dev = static_cast<int>(tables.size());
    if (k_dev < 2) {
      throw InsufficientDataError("sensing-noise estimation needs >= 2 device sample tables");
    }
    const int rows = static_cast<int>(tables.front().rows());
    for (const auto& t : tables) {
      if (t.rows() != rows || t.cols() != m) throw IngestionError("device sample tables misaligned");
      if (!t.allFinite()) throw IngestionError("non-finite device sample");
    }
    if (rows < 2) throw InsufficientDataError("need >= 2 aligned device samples");
    MatrixXd cross_mean = MatrixXd::Zero(rows, m);
    for (const auto& t : tables) cross_mean += t;
    cross_mean /= k_dev;
    MatrixXd ms = MatrixXd::Zero(k_dev, m);  // mean square residual per device
    for (int k = 0; k < k_dev; ++k) {
      ms.row(k) = (tables[k] - cross_mean).array().square().colwise().mean();
    }
    stats.sensing_noise_variances = MatrixXd::Zero(k_dev, m);
    const double kd = static_cast<double>(k_dev);
    if (k_dev == 2) {
      // ms_k = S/4 for both devices; split S evenly.
      for (int j = 0; j < m; ++j) {
        const double s_total = ms.col(j).sum() / (1.0 - 1.0 / kd);
        stats.sensing_noise_variances.col(j).setConstant(std::max(0.0, s_total / kd));
      }
    } else {
      const double a = 1.0 - 2.0 / kd;
      for (int j = 0; j < m; ++j) {
        const double s_total = ms.col(j).sum() / (1.0 - 1.0 / kd);
        for (int k = 0; k < k_dev; ++k) {
          stats.sensing_noise_variances(k, j) =
              std::max(0.0, (ms(k, j) - s_total / (kd * kd)) / a);
        }
      }
    }
  } else {
    if (num_devices < 1) throw ConfigurationError("num_devices must be positive");
    if (fallback_sensing_variance < 0.0) {
      throw ConfigurationError("sensing noise variance must be non-negative");
    }
    stats.sensing_noise_variances =
        MatrixXd::Constant(num_devices, m, fallback_sensing_variance);
  }
  return stats;
}

// Report-only instance validation: collects violated invariants and flags
// class pairs whose mean rows coincide within kDegeneratePairTol.
struct ValidationReport {
  std::vector<std::string> violations;
  std::vector<std::pair<int, int>> degenerate_pairs;

  bool ok() const { return violations.empty() && degenerate_pairs.empty(); }
};

inline ValidationReport validate_instance(const SystemInstance& instance) {
  ValidationReport report;
  auto flag = [&report](const std::string& what) { report.violations.push_back(what); };

  const auto& s = instance.stats;
  const int k = instance.channel.num_devices();
  const int m = s.num_features();
  if (s.num_classes() < 2) flag("need at least 2 classes");
  if (m < 1) flag("need at least 1 feature element");
  if (s.feature_variances.size() != m) flag("feature_variances length != num_features");
  if (s.sensing_noise_variances.cols() != m) flag("sensing_noise_variances cols != num_features");
  if (s.sensing_noise_variances.rows() != k) flag("sensing_noise_variances rows != num_devices");
  if (instance.budget.per_slot.size() != k) flag("per-slot budget length != num_devices");
  if (instance.budget.total.size() != k) flag("total budget length != num_devices");

  if (!s.class_means.allFinite()) flag("class means not finite");
  if (!(s.feature_variances.array() > 0.0).all() || !s.feature_variances.allFinite()) {
    flag("feature variances must be positive and finite");
  }
  if (!(s.sensing_noise_variances.array() >= 0.0).all() ||
      !s.sensing_noise_variances.allFinite()) {
    flag("sensing noise variances must be non-negative and finite");
  }
  if (!(instance.channel.gains.array() > 0.0).all() || !instance.channel.gains.allFinite()) {
    flag("channel gains must be positive and finite");
  }
  if (!(instance.channel.channel_noise_variance > 0.0)) {
    flag("channel noise variance must be positive");
  }
  if (instance.budget.per_slot.size() == k && !(instance.budget.per_slot.array() > 0.0).all()) {
    flag("per-slot power caps must be positive");
  }
  if (instance.budget.total.size() == k && !(instance.budget.total.array() > 0.0).all()) {
    flag("total energy caps must be positive");
  }

  for (int l = 0; l + 1 < s.num_classes(); ++l) {
    for (int lp = l + 1; lp < s.num_classes(); ++lp) {
      const double gap =
          (s.class_means.row(l) - s.class_means.row(lp)).cwiseAbs().maxCoeff();
      if (gap < kDegeneratePairTol) report.degenerate_pairs.emplace_back(l, lp);
    }
  }
  return report;
}

}  // namespace aircomp
