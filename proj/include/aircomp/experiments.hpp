#pragma once

// Experiment drivers: instance construction from a config, the three
// allocation schemes, and the CSV-producing experiments (single optimize,
// device/power sweeps, discriminant-gain vs accuracy curve, scheme
// comparison). Instances derive from (master seed, seed index) only, so
// every scheme and every sweep point of one seed sees the same statistics
// and nested channels; schemes and axis values enter the hash only for the
// Monte Carlo evaluation streams. Adding a scheme therefore never perturbs
// the instances or the other schemes' draws, and within one seed the sweep
// axis is the only thing that changes.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "aircomp/config.hpp"
#include "aircomp/discriminant.hpp"
#include "aircomp/io.hpp"
#include "aircomp/optimizer.hpp"
#include "aircomp/simulator.hpp"

namespace aircomp {

struct SchemeResult {
  Scheme scheme = Scheme::maxmin;
  PrecodingMatrix b;
  double min_gain = 0.0;
  double avg_gain = 0.0;
  SolveTrace trace;
};

struct SweepRow {
  std::string scheme;
  int devices = 0;
  double power_dbm = 0.0;
  std::uint64_t seed = 0;
  int trials = 0;
  bool ok = false;
  double min_dg = 0.0;
  double avg_dg = 0.0;
  double acc_map = 0.0;
  double acc_softmax = 0.0;
  double bal_acc = 0.0;
  double recall_spread = 0.0;
  Eigen::VectorXd recalls;
};

inline SystemInstance make_instance(const ExperimentConfig& config, int devices, double power_dbm,
                                    std::uint64_t instance_seed) {
  SystemInstance instance;
  instance.stats = generate_synthetic_statistics(config.num_classes, config.num_features, devices,
                                                 config.class_separation, config.sensing_noise,
                                                 hash_str(instance_seed, "stats"));
  NetworkConfig net = config.network;
  net.num_devices = devices;
  net.rng_seed = hash_str(instance_seed, "channel");
  instance.channel = sample_channels(net);
  const double p = dbm_to_watt(power_dbm);
  instance.budget.per_slot = Eigen::VectorXd::Constant(devices, p);
  instance.budget.total =
      Eigen::VectorXd::Constant(devices, config.total_energy_factor * config.num_features * p);
  return instance;
}

inline SchemeResult run_scheme(const SystemInstance& instance, Scheme scheme,
                               const ScaConfig& sca) {
  SchemeResult result;
  result.scheme = scheme;
  switch (scheme) {
    case Scheme::maxmin:
      result.trace = sca_maxmin(instance, sca);
      break;
    case Scheme::average:
      result.trace = optimize_average_baseline(instance, sca);
      break;
    case Scheme::mmse: {
      result.trace.final_b = mmse_allocation(instance);
      const GainTable table = gain_table(received_moments(instance, result.trace.final_b));
      result.trace.final_min_gain = table.min_gain;
      result.trace.final_avg_gain = table.avg_gain;
      result.trace.reason = TerminationReason::converged;
      break;
    }
  }
  result.b = result.trace.final_b;
  result.min_gain = result.trace.final_min_gain;
  result.avg_gain = result.trace.final_avg_gain;
  return result;
}

namespace detail {

// One keyed stream per (axis value, seed index, scheme, purpose).
inline std::uint64_t derive_stream(std::uint64_t master, const char* axis, double value,
                                   int seed_index, const char* scheme, const char* purpose) {
  std::uint64_t h = hash_str(master, axis);
  h = hash_combine(h, std::bit_cast<std::uint64_t>(value));
  h = hash_combine(h, static_cast<std::uint64_t>(seed_index));
  h = hash_str(h, scheme);
  return hash_str(h, purpose);
}

inline SweepRow evaluate_point(const ExperimentConfig& config, const SystemInstance& instance,
                               const SchemeResult& result, const char* axis, double value,
                               int seed_index, std::uint64_t instance_seed) {
  SweepRow row;
  row.scheme = to_string(result.scheme);
  row.devices = instance.num_devices();
  row.power_dbm = watt_to_dbm(instance.budget.per_slot(0));
  row.seed = instance_seed;
  row.trials = config.trials;
  const std::uint64_t eval_seed = derive_stream(config.master_seed, axis, value, seed_index,
                                                to_string(result.scheme), "eval");
  const std::uint64_t train_seed = derive_stream(config.master_seed, axis, value, seed_index,
                                                 to_string(result.scheme), "train");
  const int threads = static_cast<int>(std::thread::hardware_concurrency());
  const AccuracyReport map_report =
      evaluate_accuracy(instance, result.b, config.trials, eval_seed, std::max(threads, 1));
  const SoftmaxClassifier clf = train_softmax_classifier(
      simulate_training_set(instance, result.b, config.training_samples, train_seed),
      config.epochs, config.learning_rate);
  const AccuracyReport softmax_report =
      evaluate_accuracy(instance, result.b, clf, config.trials, eval_seed, std::max(threads, 1));
  row.ok = true;
  row.min_dg = result.min_gain;
  row.avg_dg = result.avg_gain;
  row.acc_map = map_report.overall_accuracy;
  row.acc_softmax = softmax_report.overall_accuracy;
  row.bal_acc = map_report.balanced_accuracy;
  row.recall_spread = map_report.recall_spread;
  row.recalls = map_report.per_class_recall;
  return row;
}

}  // namespace detail

inline std::string sweep_header(int num_classes) {
  std::string header =
      "scheme,K,P_dbm,seed,trials,min_dg,avg_dg,acc_map,acc_softmax,bal_acc,recall_spread";
  for (int l = 0; l < num_classes; ++l) header += ",recall_" + std::to_string(l);
  return header + "\n";
}

inline std::string sweep_row_csv(const SweepRow& row, int num_classes) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::string out = row.scheme + "," + std::to_string(row.devices) + "," +
                    format_real(row.power_dbm) + "," + std::to_string(row.seed) + "," +
                    std::to_string(row.trials);
  const auto field = [&](double value) { out += "," + format_real(row.ok ? value : nan); };
  field(row.min_dg);
  field(row.avg_dg);
  field(row.acc_map);
  field(row.acc_softmax);
  field(row.bal_acc);
  field(row.recall_spread);
  for (int l = 0; l < num_classes; ++l) {
    field(row.ok && l < row.recalls.size() ? row.recalls(l) : nan);
  }
  return out + "\n";
}

inline void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows,
                            int num_classes) {
  std::string out = sweep_header(num_classes);
  for (const auto& row : rows) out += sweep_row_csv(row, num_classes);
  write_text_atomic(path, out);
}

// Single-point optimization: writes the allocation, the solve trace, and the
// final gain table.
inline SchemeResult run_optimize(const ExperimentConfig& config, const std::string& out_dir,
                                 Scheme scheme) {
  const std::uint64_t instance_seed = hash_combine(config.master_seed, 0);
  const SystemInstance instance =
      make_instance(config, config.network.num_devices, config.power_dbm, instance_seed);
  const SchemeResult result = run_scheme(instance, scheme, config.sca);
  write_allocation_csv(out_dir + "/allocation.csv", result.b);
  write_trace_csv(out_dir + "/trace.csv", result.trace);
  write_gain_table_csv(out_dir + "/gains.csv", gain_table(received_moments(instance, result.b)));
  return result;
}

enum class SweepAxis { devices, power_dbm };

inline std::vector<SweepRow> run_sweep(const ExperimentConfig& config, SweepAxis axis,
                                       const std::string& out_path) {
  if (config.sweep.empty()) throw ConfigurationError("sweep grid is empty");
  const char* axis_name = axis == SweepAxis::devices ? "devices" : "power_dbm";
  std::vector<SweepRow> rows;
  for (const double value : config.sweep) {
    int devices = config.network.num_devices;
    double power_dbm = config.power_dbm;
    if (axis == SweepAxis::devices) {
      devices = static_cast<int>(value);
      if (devices < 1 || static_cast<double>(devices) != value) {
        throw ConfigurationError("devices sweep values must be positive integers");
      }
    } else {
      power_dbm = value;
    }
    for (int s = 0; s < config.num_seeds; ++s) {
      const std::uint64_t instance_seed = hash_combine(config.master_seed, static_cast<std::uint64_t>(s));
      const SystemInstance instance = make_instance(config, devices, power_dbm, instance_seed);
      for (const Scheme scheme : config.schemes) {
        try {
          const SchemeResult result = run_scheme(instance, scheme, config.sca);
          rows.push_back(
              detail::evaluate_point(config, instance, result, axis_name, value, s, instance_seed));
        } catch (const std::exception& e) {
          std::fprintf(stderr, "point %s=%g seed %d scheme %s failed: %s\n", axis_name, value, s,
                       to_string(scheme), e.what());
          SweepRow row;
          row.scheme = to_string(scheme);
          row.devices = devices;
          row.power_dbm = power_dbm;
          row.seed = instance_seed;
          row.trials = config.trials;
          row.ok = false;
          rows.push_back(row);
        }
      }
    }
  }
  write_sweep_csv(out_path, rows, config.num_classes);
  return rows;
}

struct CurvePoint {
  double power_dbm = 0.0;
  double min_gain = 0.0;
  double acc_map = 0.0;
  double acc_softmax = 0.0;
};

// Discriminant gain vs accuracy: one fixed instance, transmit power varied
// over the grid so the achieved min-gain spans a range.
inline std::vector<CurvePoint> run_dg_accuracy_curve(const ExperimentConfig& config,
                                                     const std::string& out_path) {
  if (config.sweep.empty()) throw ConfigurationError("dg-accuracy-curve needs a power grid");
  const std::uint64_t instance_seed = hash_combine(config.master_seed, 0);
  std::vector<CurvePoint> points;
  for (const double power_dbm : config.sweep) {
    const SystemInstance instance =
        make_instance(config, config.network.num_devices, power_dbm, instance_seed);
    const SchemeResult result = run_scheme(instance, Scheme::maxmin, config.sca);
    const SweepRow row = detail::evaluate_point(config, instance, result, "dg_curve", power_dbm, 0,
                                                instance_seed);
    points.push_back({power_dbm, row.min_dg, row.acc_map, row.acc_softmax});
  }
  std::string out = "p_dbm,min_gain,acc_map,acc_softmax\n";
  for (const auto& point : points) {
    out += format_real(point.power_dbm) + "," + format_real(point.min_gain) + "," +
           format_real(point.acc_map) + "," + format_real(point.acc_softmax) + "\n";
  }
  write_text_atomic(out_path, out);
  return points;
}

// All configured schemes on the configured operating point, one row per
// scheme and seed.
inline std::vector<SweepRow> run_compare(const ExperimentConfig& config,
                                         const std::string& out_path) {
  std::vector<SweepRow> rows;
  for (int s = 0; s < config.num_seeds; ++s) {
    const std::uint64_t instance_seed = hash_combine(config.master_seed, static_cast<std::uint64_t>(s));
    const SystemInstance instance =
        make_instance(config, config.network.num_devices, config.power_dbm, instance_seed);
    for (const Scheme scheme : config.schemes) {
      try {
        const SchemeResult result = run_scheme(instance, scheme, config.sca);
        rows.push_back(detail::evaluate_point(config, instance, result, "compare",
                                              config.power_dbm, s, instance_seed));
      } catch (const std::exception& e) {
        std::fprintf(stderr, "compare seed %d scheme %s failed: %s\n", s, to_string(scheme),
                     e.what());
        SweepRow row;
        row.scheme = to_string(scheme);
        row.devices = config.network.num_devices;
        row.power_dbm = config.power_dbm;
        row.seed = instance_seed;
        row.trials = config.trials;
        row.ok = false;
        rows.push_back(row);
      }
    }
  }
  write_sweep_csv(out_path, rows, config.num_classes);
  return rows;
}

}  // namespace aircomp
