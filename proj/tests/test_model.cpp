#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "aircomp/model.hpp"
#include "aircomp/rng.hpp"

using namespace aircomp;

namespace {

SystemInstance two_device_instance() {
  SystemInstance inst;
  inst.stats.class_means.resize(2, 2);
  inst.stats.class_means << 1.0, -0.5, -1.0, 2.0;
  inst.stats.feature_variances.resize(2);
  inst.stats.feature_variances << 1.0, 2.0;
  inst.stats.sensing_noise_variances.resize(2, 2);
  inst.stats.sensing_noise_variances << 0.1, 0.2, 0.3, 0.4;
  inst.channel.gains.resize(2);
  inst.channel.gains << 1.0, 0.5;
  inst.channel.channel_noise_variance = 0.05;
  inst.budget.per_slot = Eigen::VectorXd::Constant(2, 1.0);
  inst.budget.total = Eigen::VectorXd::Constant(2, 1.5);
  return inst;
}

}  // namespace

TEST_CASE("dbm conversions") {
  CHECK(dbm_to_watt(30.0) == Catch::Approx(1.0));
  CHECK(dbm_to_watt(0.0) == Catch::Approx(1e-3));
  CHECK(dbm_to_watt(12.0) == Catch::Approx(0.015848931924611134).epsilon(1e-12));
  for (double dbm : {-7.0, 0.0, 3.5, 12.0, 30.0}) {
    CHECK(watt_to_dbm(dbm_to_watt(dbm)) == Catch::Approx(dbm).margin(1e-12));
  }
}

TEST_CASE("received moments match the hand-computed aggregation") {
  const SystemInstance inst = two_device_instance();
  PrecodingMatrix b;
  b.b.resize(2, 2);
  b.b << 0.6, 0.2, 0.4, 0.8;
  const ReceivedDistribution dist = received_moments(inst, b);

  // aggregate gains: 1*0.6 + 0.5*0.4 = 0.8 and 1*0.2 + 0.5*0.8 = 0.6
  CHECK(dist.received_means(0, 0) == Catch::Approx(0.8 * 1.0).epsilon(1e-14));
  CHECK(dist.received_means(0, 1) == Catch::Approx(0.6 * -0.5).epsilon(1e-14));
  CHECK(dist.received_means(1, 0) == Catch::Approx(0.8 * -1.0).epsilon(1e-14));
  CHECK(dist.received_means(1, 1) == Catch::Approx(0.6 * 2.0).epsilon(1e-14));
  // var_0 = 0.64*1 + (1*0.36*0.1 + 0.25*0.16*0.3) + 0.05 = 0.738
  // var_1 = 0.36*2 + (1*0.04*0.2 + 0.25*0.64*0.4) + 0.05 = 0.842
  CHECK(dist.received_variances(0) == Catch::Approx(0.738).epsilon(1e-14));
  CHECK(dist.received_variances(1) == Catch::Approx(0.842).epsilon(1e-14));
}

TEST_CASE("received moments agree with a scalar re-implementation") {
  Rng rng(99);
  for (int rep = 0; rep < 10; ++rep) {
    const int devices = 1 + rng.uniform_int(4);
    const int features = 1 + rng.uniform_int(5);
    const int classes = 2 + rng.uniform_int(3);
    SystemInstance inst;
    inst.stats.class_means = Eigen::MatrixXd::NullaryExpr(
        classes, features, [&]() { return rng.uniform(-2.0, 2.0); });
    inst.stats.feature_variances = Eigen::VectorXd::NullaryExpr(
        features, [&]() { return rng.uniform(0.5, 2.0); });
    inst.stats.sensing_noise_variances = Eigen::MatrixXd::NullaryExpr(
        devices, features, [&]() { return rng.uniform(0.0, 0.8); });
    inst.channel.gains = Eigen::VectorXd::NullaryExpr(
        devices, [&]() { return rng.uniform(0.3, 1.5); });
    inst.channel.channel_noise_variance = rng.uniform(0.2, 1.0);
    PrecodingMatrix b;
    b.b = Eigen::MatrixXd::NullaryExpr(devices, features,
                                       [&]() { return rng.uniform(0.0, 1.0); });
    const ReceivedDistribution dist = received_moments(inst, b);
    for (int m = 0; m < features; ++m) {
      double agg = 0.0;
      double sens = 0.0;
      for (int k = 0; k < devices; ++k) {
        agg += inst.channel.gains(k) * b.b(k, m);
        sens += inst.channel.gains(k) * inst.channel.gains(k) * b.b(k, m) * b.b(k, m) *
                inst.stats.sensing_noise_variances(k, m);
      }
      for (int l = 0; l < classes; ++l) {
        CHECK(dist.received_means(l, m) ==
              Catch::Approx(agg * inst.stats.class_means(l, m)).margin(1e-12));
      }
      const double var = agg * agg * inst.stats.feature_variances(m) + sens +
                         inst.channel.channel_noise_variance;
      CHECK(dist.received_variances(m) == Catch::Approx(var).epsilon(1e-12));
    }
  }
}

TEST_CASE("zero precoding leaves only channel noise") {
  const SystemInstance inst = two_device_instance();
  const ReceivedDistribution dist = received_moments(inst, PrecodingMatrix::zero(2, 2));
  CHECK(dist.received_means.cwiseAbs().maxCoeff() == 0.0);
  CHECK(dist.received_variances(0) == Catch::Approx(0.05));
  CHECK(dist.received_variances(1) == Catch::Approx(0.05));
}

TEST_CASE("dimension mismatches and non-finite entries are rejected") {
  const SystemInstance inst = two_device_instance();
  CHECK_THROWS_AS(received_moments(inst, PrecodingMatrix::zero(3, 2)), ConfigurationError);
  CHECK_THROWS_AS(received_moments(inst, PrecodingMatrix::zero(2, 1)), ConfigurationError);
  PrecodingMatrix bad = PrecodingMatrix::zero(2, 2);
  bad.b(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(received_moments(inst, bad), ConfigurationError);
}

TEST_CASE("feasibility respects both caps with relative slack") {
  PowerBudget budget;
  budget.per_slot = Eigen::VectorXd::Constant(1, 1.0);
  budget.total = Eigen::VectorXd::Constant(1, 1.5);
  PrecodingMatrix b = PrecodingMatrix::zero(1, 2);

  b.b << std::sqrt(1.0), 0.0;  // exactly on the slot cap
  CHECK(feasible(b, budget));
  b.b << std::sqrt(1.0 + 3e-6), 0.0;  // beyond the relative tolerance
  CHECK_FALSE(feasible(b, budget));
  b.b << 0.9, std::sqrt(1.5 - 0.81 + 1e-3);  // slot ok, total cap violated
  CHECK_FALSE(feasible(b, budget));
  b.b << 0.8, 0.8;  // 1.28 < 1.5
  CHECK(feasible(b, budget));
  CHECK_FALSE(feasible(PrecodingMatrix::zero(2, 2), budget));  // device mismatch
}

TEST_CASE("statistics estimation recovers sample moments") {
  // class 0 rows and class 1 rows with known means and spread
  SampleTable samples;
  samples.features.resize(6, 2);
  samples.features << 1.0, 2.0, 3.0, 4.0, 2.0, 0.0, -1.0, -2.0, -3.0, -4.0, -2.0, 0.0;
  samples.labels.resize(6);
  samples.labels << 0, 0, 0, 1, 1, 1;
  const FeatureStatistics stats = estimate_statistics(samples, std::nullopt, 2, 0.25);
  CHECK(stats.class_means(0, 0) == Catch::Approx(2.0));
  CHECK(stats.class_means(0, 1) == Catch::Approx(2.0));
  CHECK(stats.class_means(1, 0) == Catch::Approx(-2.0));
  CHECK(stats.class_means(1, 1) == Catch::Approx(-2.0));
  // pooled squared deviations over n - L = 4: element 0 gets 2 + 2, element 1 gets 8 + 8
  CHECK(stats.feature_variances(0) == Catch::Approx(1.0));
  CHECK(stats.feature_variances(1) == Catch::Approx(4.0));
  CHECK(stats.sensing_noise_variances.rows() == 2);
  CHECK(stats.sensing_noise_variances(0, 0) == 0.25);
}

TEST_CASE("statistics estimation rejects deficient data") {
  SampleTable samples;
  samples.features.resize(3, 1);
  samples.features << 1.0, 2.0, 3.0;
  samples.labels.resize(3);
  samples.labels << 0, 0, 1;  // class 1 has a single sample
  CHECK_THROWS_AS(estimate_statistics(samples, std::nullopt, 1, 0.1), InsufficientDataError);
  samples.labels << 0, 0, 0;  // single class
  CHECK_THROWS_AS(estimate_statistics(samples, std::nullopt, 1, 0.1), InsufficientDataError);
  samples.labels << 0, -1, 1;  // negative label
  CHECK_THROWS_AS(estimate_statistics(samples, std::nullopt, 1, 0.1), IngestionError);
  samples.labels << 0, 0, 1;
  samples.features(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(estimate_statistics(samples, std::nullopt, 1, 0.1), IngestionError);
}

TEST_CASE("sensing noise estimation is close to the truth for three devices") {
  const int n = 20000;
  const Eigen::Vector3d truth(0.2, 0.4, 0.6);
  Rng rng(7);
  SampleTable samples;
  samples.features.resize(n, 1);
  samples.labels.resize(n);
  DeviceSampleTable devices;
  devices.per_device.assign(3, Eigen::MatrixXd(n, 1));
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    const double x = rng.normal(label == 0 ? 1.0 : -1.0, 1.0);
    samples.features(i, 0) = x;
    samples.labels(i) = label;
    for (int k = 0; k < 3; ++k) {
      devices.per_device[static_cast<std::size_t>(k)](i, 0) =
          x + rng.normal(0.0, std::sqrt(truth(k)));
    }
  }
  const FeatureStatistics stats = estimate_statistics(samples, devices, 3, 0.0);
  for (int k = 0; k < 3; ++k) {
    CHECK(stats.sensing_noise_variances(k, 0) == Catch::Approx(truth(k)).epsilon(0.12));
  }
}

TEST_CASE("two-device sensing estimation splits the total evenly") {
  const int n = 20000;
  Rng rng(11);
  SampleTable samples;
  samples.features.resize(n, 1);
  samples.labels.resize(n);
  DeviceSampleTable devices;
  devices.per_device.assign(2, Eigen::MatrixXd(n, 1));
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    const double x = rng.normal(label == 0 ? 1.0 : -1.0, 1.0);
    samples.features(i, 0) = x;
    samples.labels(i) = label;
    devices.per_device[0](i, 0) = x + rng.normal(0.0, std::sqrt(0.1));
    devices.per_device[1](i, 0) = x + rng.normal(0.0, std::sqrt(0.5));
  }
  const FeatureStatistics stats = estimate_statistics(samples, devices, 2, 0.0);
  // only the sum 0.6 is identifiable; each device gets 0.3
  CHECK(stats.sensing_noise_variances(0, 0) == Catch::Approx(0.3).epsilon(0.15));
  CHECK(stats.sensing_noise_variances(0, 0) == stats.sensing_noise_variances(1, 0));
}

TEST_CASE("instance validation flags violations and degenerate pairs") {
  SystemInstance inst = two_device_instance();
  CHECK(validate_instance(inst).ok());

  SystemInstance bad = inst;
  bad.channel.gains(0) = -1.0;
  bad.stats.feature_variances(1) = 0.0;
  const ValidationReport report = validate_instance(bad);
  CHECK_FALSE(report.ok());
  CHECK(report.violations.size() == 2);

  SystemInstance degen = inst;
  degen.stats.class_means.row(1) = degen.stats.class_means.row(0);
  const ValidationReport dreport = validate_instance(degen);
  REQUIRE(dreport.degenerate_pairs.size() == 1);
  CHECK(dreport.degenerate_pairs[0] == std::pair<int, int>(0, 1));
}
