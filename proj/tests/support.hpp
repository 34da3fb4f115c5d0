#pragma once

// Shared test helpers: seeded random instances with well-conditioned ranges.

#include "aircomp/model.hpp"
#include "aircomp/rng.hpp"

namespace aircomp::testing {

inline SystemInstance random_instance(std::uint64_t seed, int devices, int features, int classes) {
  Rng rng(seed);
  SystemInstance inst;
  inst.stats.class_means = Eigen::MatrixXd::NullaryExpr(
      classes, features, [&]() { return rng.uniform(-2.0, 2.0); });
  inst.stats.feature_variances =
      Eigen::VectorXd::NullaryExpr(features, [&]() { return rng.uniform(0.5, 2.0); });
  inst.stats.sensing_noise_variances = Eigen::MatrixXd::NullaryExpr(
      devices, features, [&]() { return rng.uniform(0.0, 0.8); });
  inst.channel.gains =
      Eigen::VectorXd::NullaryExpr(devices, [&]() { return rng.uniform(0.3, 1.5); });
  inst.channel.channel_noise_variance = rng.uniform(0.2, 1.0);
  inst.budget.per_slot =
      Eigen::VectorXd::NullaryExpr(devices, [&]() { return rng.uniform(0.5, 2.0); });
  inst.budget.total = Eigen::VectorXd::NullaryExpr(devices, [&](Eigen::Index k) {
    return inst.budget.per_slot(k) * features * rng.uniform(0.3, 1.0);
  });
  return inst;
}

inline SystemInstance random_instance(std::uint64_t seed) {
  Rng dims(seed ^ 0x9e3779b97f4a7c15ULL);
  const int devices = 1 + dims.uniform_int(4);
  const int features = 1 + dims.uniform_int(8);
  const int classes = 2 + dims.uniform_int(4);
  return random_instance(seed, devices, features, classes);
}

}  // namespace aircomp::testing
