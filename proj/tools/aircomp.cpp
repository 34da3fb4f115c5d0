// Command line front end. Subcommands cover the single-instance solve, a
// Monte Carlo evaluation of one operating point, the device and power
// sweeps, the discriminant-gain vs accuracy curve, and a scheme comparison.
// Exit codes: 0 success, 2 configuration, 3 degenerate instance, 4 solver
// failure, 5 file I/O, 1 anything else.

#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "aircomp/experiments.hpp"

namespace {

using namespace aircomp;

int reason_code(TerminationReason reason) {
  switch (reason) {
    case TerminationReason::converged:
    case TerminationReason::max_iterations:
      return 0;
    case TerminationReason::degenerate:
      return 3;
    case TerminationReason::solver_failure:
      return 4;
  }
  return 1;
}

std::vector<double> default_grid(const std::vector<double>& configured,
                                 std::vector<double> fallback) {
  return configured.empty() ? fallback : configured;
}

void print_rows(const std::vector<SweepRow>& rows) {
  for (const auto& row : rows) {
    if (row.ok) {
      std::printf("%-8s K=%d P=%5.1f dBm seed=%llu  min_dg=%9.5f  acc_map=%.4f  acc_softmax=%.4f\n",
                  row.scheme.c_str(), row.devices, row.power_dbm,
                  static_cast<unsigned long long>(row.seed), row.min_dg, row.acc_map,
                  row.acc_softmax);
    } else {
      std::printf("%-8s K=%d P=%5.1f dBm seed=%llu  failed\n", row.scheme.c_str(), row.devices,
                  row.power_dbm, static_cast<unsigned long long>(row.seed));
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"task-oriented over-the-air computation power control"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir = "out";
  std::string scheme_name = "maxmin";
  std::uint64_t seed = 0;
  int trials = 0;
  app.add_option("--config", config_path, "configuration file");
  app.add_option("--out", out_dir, "output directory");
  auto* seed_opt = app.add_option("--seed", seed, "master seed override");
  app.add_option("--scheme", scheme_name, "allocation scheme: maxmin, average, mmse");
  auto* trials_opt = app.add_option("--trials", trials, "Monte Carlo trials override");

  auto* cmd_optimize =
      app.add_subcommand("optimize", "solve one instance, write allocation, trace, gain table");
  auto* cmd_simulate =
      app.add_subcommand("simulate", "solve one instance and evaluate classification accuracy");
  auto* cmd_devices = app.add_subcommand("sweep-devices", "accuracy vs number of devices");
  auto* cmd_power = app.add_subcommand("sweep-power", "accuracy vs transmit power budget");
  auto* cmd_curve =
      app.add_subcommand("dg-accuracy-curve", "min discriminant gain vs accuracy on one instance");
  auto* cmd_compare = app.add_subcommand("compare", "all schemes at the configured operating point");

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig config = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    if (*seed_opt) config.master_seed = seed;
    if (*trials_opt) {
      if (trials < 1) throw ConfigurationError("--trials must be positive");
      config.trials = trials;
    }
    const Scheme scheme = parse_scheme(scheme_name);

    if (cmd_optimize->parsed()) {
      const SchemeResult result = run_optimize(config, out_dir, scheme);
      std::printf("scheme %s: min_gain %.9f avg_gain %.9f (%s, %zu iterations)\n",
                  to_string(scheme), result.min_gain, result.avg_gain,
                  to_string(result.trace.reason), result.trace.iterations.size());
      std::printf("wrote %s/{allocation,trace,gains}.csv\n", out_dir.c_str());
      return reason_code(result.trace.reason);
    }
    if (cmd_simulate->parsed()) {
      const std::uint64_t instance_seed = hash_combine(config.master_seed, 0);
      const SystemInstance instance =
          make_instance(config, config.network.num_devices, config.power_dbm, instance_seed);
      const SchemeResult result = run_scheme(instance, scheme, config.sca);
      const SweepRow row = detail::evaluate_point(config, instance, result, "simulate",
                                                  config.power_dbm, 0, instance_seed);
      write_sweep_csv(out_dir + "/simulation.csv", {row}, config.num_classes);
      print_rows({row});
      std::printf("wrote %s/simulation.csv\n", out_dir.c_str());
      return reason_code(result.trace.reason);
    }
    if (cmd_devices->parsed()) {
      config.sweep = default_grid(config.sweep, {2, 3, 4, 5, 6});
      const auto rows = run_sweep(config, SweepAxis::devices, out_dir + "/devices_sweep.csv");
      print_rows(rows);
      std::printf("wrote %s/devices_sweep.csv (%zu rows)\n", out_dir.c_str(), rows.size());
      return 0;
    }
    if (cmd_power->parsed()) {
      config.sweep = default_grid(config.sweep, {6, 9, 12, 15, 18});
      const auto rows = run_sweep(config, SweepAxis::power_dbm, out_dir + "/power_sweep.csv");
      print_rows(rows);
      std::printf("wrote %s/power_sweep.csv (%zu rows)\n", out_dir.c_str(), rows.size());
      return 0;
    }
    if (cmd_curve->parsed()) {
      config.sweep = default_grid(config.sweep, {-2, 1, 4, 7, 10, 13, 16, 19});
      const auto points = run_dg_accuracy_curve(config, out_dir + "/dg_accuracy.csv");
      for (const auto& point : points) {
        std::printf("P=%5.1f dBm  min_gain=%10.5f  acc_map=%.4f  acc_softmax=%.4f\n",
                    point.power_dbm, point.min_gain, point.acc_map, point.acc_softmax);
      }
      std::printf("wrote %s/dg_accuracy.csv (%zu points)\n", out_dir.c_str(), points.size());
      return 0;
    }
    if (cmd_compare->parsed()) {
      const auto rows = run_compare(config, out_dir + "/compare.csv");
      print_rows(rows);
      std::printf("wrote %s/compare.csv (%zu rows)\n", out_dir.c_str(), rows.size());
      return 0;
    }
    return 1;
  } catch (const ConfigurationError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const DegenerateInstanceError& e) {
    std::fprintf(stderr, "degenerate instance: %s\n", e.what());
    return 3;
  } catch (const SolverFailure& e) {
    std::fprintf(stderr, "solver failure: %s\n", e.what());
    return 4;
  } catch (const IngestionError& e) {
    std::fprintf(stderr, "ingestion error: %s\n", e.what());
    return 5;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 5;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
