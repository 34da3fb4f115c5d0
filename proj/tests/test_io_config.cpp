#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "aircomp/config.hpp"
#include "aircomp/io.hpp"
#include "aircomp/rng.hpp"

using namespace aircomp;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "aircomp_io_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("reals round-trip bit-exactly through 17 significant digits") {
  Rng rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const double value = rng.normal(0.0, 1.0) * std::pow(10.0, rng.uniform(-30.0, 30.0));
    const std::string text = format_real(value);
    CHECK(std::strtod(text.c_str(), nullptr) == value);
  }
  CHECK(std::strtod(format_real(0.1).c_str(), nullptr) == 0.1);
  CHECK(format_real(1.0) == "1");
}

TEST_CASE("atomic writes leave no temporary and replace the target whole") {
  const fs::path dir = temp_dir();
  const fs::path target = dir / "out.csv";
  write_text_atomic(target.string(), "a,b\n1,2\n");
  CHECK(read_file(target) == "a,b\n1,2\n");
  CHECK_FALSE(fs::exists(dir / "out.csv.tmp"));
  write_text_atomic(target.string(), "a,b\n3,4\n");
  CHECK(read_file(target) == "a,b\n3,4\n");
  // nested directories are created on demand
  write_text_atomic((dir / "deep/nested/x.csv").string(), "x\n");
  CHECK(fs::exists(dir / "deep/nested/x.csv"));
  // a file in the parent role fails cleanly without creating the target
  CHECK_THROWS_AS(write_text_atomic((target / "impossible.csv").string(), "x\n"), IoError);
}

TEST_CASE("sample tables load with line-precise diagnostics") {
  const fs::path dir = temp_dir();
  const fs::path good = dir / "samples.csv";
  write_file(good, "label,f1,f2\n0,1.5,-2.25\n2,0.125,3.5\n\n1,4,5\n");
  const SampleTable table = load_samples_csv(good.string());
  REQUIRE(table.num_samples() == 3);
  REQUIRE(table.num_features() == 2);
  CHECK(table.labels(0) == 0);
  CHECK(table.labels(1) == 2);
  CHECK(table.labels(2) == 1);
  CHECK(table.features(0, 1) == -2.25);
  CHECK(table.features(1, 0) == 0.125);

  const auto expect_error = [&](const std::string& content, const std::string& needle) {
    const fs::path bad = dir / "bad.csv";
    write_file(bad, content);
    try {
      load_samples_csv(bad.string());
      FAIL("expected IngestionError for: " << content);
    } catch (const IngestionError& e) {
      INFO(e.what());
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  expect_error("f1,f2\n1,2\n", "line 1");
  expect_error("label,f1,f2\n0,1.5\n", "line 2");
  expect_error("label,f1,f2\n0,1.5,2\n1,x,2\n", "line 3");
  expect_error("label,f1,f2\n1.5,1,2\n", "line 2");
  expect_error("label,f1,f2\n-1,1,2\n", "negative");
  expect_error("label,f1\n", "no sample rows");
  CHECK_THROWS_AS(load_samples_csv((dir / "missing.csv").string()), IoError);
}

TEST_CASE("statistics triplet round-trips bit-exactly") {
  const fs::path dir = temp_dir();
  Rng rng(5);
  FeatureStatistics stats;
  stats.class_means = Eigen::MatrixXd::NullaryExpr(3, 4, [&]() { return rng.normal(0.0, 3.0); });
  stats.feature_variances =
      Eigen::VectorXd::NullaryExpr(4, [&]() { return rng.uniform(0.1, 2.0); });
  stats.sensing_noise_variances =
      Eigen::MatrixXd::NullaryExpr(2, 4, [&]() { return rng.uniform(0.0, 1.0); });
  const std::string mu = (dir / "mu.csv").string();
  const std::string s2 = (dir / "s2.csv").string();
  const std::string d2 = (dir / "d2.csv").string();
  write_statistics_csv(mu, s2, d2, stats);
  const FeatureStatistics back = load_statistics_csv(mu, s2, d2);
  CHECK(back.class_means == stats.class_means);
  CHECK(back.feature_variances == stats.feature_variances);
  CHECK(back.sensing_noise_variances == stats.sensing_noise_variances);
  CHECK(read_file(dir / "mu.csv").substr(0, 7) == "l,m,mu\n");

  write_file(dir / "mu.csv", "wrong,header\n");
  CHECK_THROWS_AS(load_statistics_csv(mu, s2, d2), IngestionError);
}

TEST_CASE("allocation csv round-trips bit-exactly") {
  const fs::path dir = temp_dir();
  Rng rng(8);
  PrecodingMatrix b;
  b.b = Eigen::MatrixXd::NullaryExpr(3, 5, [&]() { return rng.uniform(0.0, 1.3); });
  const std::string path = (dir / "b.csv").string();
  write_allocation_csv(path, b);
  const PrecodingMatrix back = load_allocation_csv(path);
  CHECK(back.b == b.b);
  const std::string text = read_file(path);
  CHECK(text.substr(0, 6) == "k,m,b\n");
  CHECK(text.find("\r") == std::string::npos);
}

TEST_CASE("gain table and trace exports match the documented layout") {
  ReceivedDistribution dist;
  dist.received_means.resize(2, 2);
  dist.received_means << 1.0, 0.0, -1.0, 0.5;
  dist.received_variances.resize(2);
  dist.received_variances << 1.0, 0.25;
  const GainTable table = gain_table(dist);
  const fs::path dir = temp_dir();
  write_gain_table_csv((dir / "gains.csv").string(), table);
  const std::string text = read_file(dir / "gains.csv");
  CHECK(text ==
        "l,lp,m,gain_elem\n"
        "0,1,0,4\n"
        "0,1,1,1\n"
        "l,lp,gain_pair\n"
        "0,1,5\n"
        "min_gain,avg_gain\n"
        "5,5\n");

  SolveTrace trace;
  trace.iterations.push_back({1, 0.5, 0.25, 1e-8, true});
  trace.iterations.push_back({2, 0.625, 0.125, 2e-9, false});
  write_trace_csv((dir / "trace.csv").string(), trace);
  CHECK(read_file(dir / "trace.csv") ==
        "iter,T_sub,min_gain,kkt,accepted\n"
        "1,0.5,0.25,1e-08,1\n"
        "2,0.625,0.125,2.0000000000000001e-09,0\n");
}

TEST_CASE("configs parse with defaults, sections, and comments") {
  const fs::path dir = temp_dir();
  const fs::path path = dir / "run.cfg";
  write_file(path,
             "# reference operating point\n"
             "[instance]\n"
             "classes = 3        # trailing comment\n"
             "features = 6\n"
             "class_separation = 1.25\n"
             "sensing_noise = 0.3\n"
             "power_dbm = 10\n"
             "total_energy_factor = 0.5\n"
             "\n"
             "[network]\n"
             "devices = 4\n"
             "mode = physical\n"
             "cell_radius = 250\n"
             "pathloss_exponent = 3\n"
             "channel_noise = 0.2\n"
             "\n"
             "[sca]\n"
             "step_size = 0.9\n"
             "max_iterations = 50\n"
             "tolerance = 1e-7\n"
             "\n"
             "[experiment]\n"
             "schemes = maxmin, mmse\n"
             "trials = 400\n"
             "seeds = 2\n"
             "master_seed = 99\n"
             "sweep = 2, 4, 6\n"
             "training_samples = 75\n"
             "epochs = 120\n"
             "learning_rate = 0.25\n");
  const ExperimentConfig config = load_config(path.string());
  CHECK(config.num_classes == 3);
  CHECK(config.num_features == 6);
  CHECK(config.class_separation == 1.25);
  CHECK(config.sensing_noise == 0.3);
  CHECK(config.power_dbm == 10.0);
  CHECK(config.total_energy_factor == 0.5);
  CHECK(config.network.num_devices == 4);
  CHECK(config.network.mode == ChannelMode::physical);
  CHECK(config.network.cell_radius == 250.0);
  CHECK(config.network.pathloss_exponent == 3.0);
  CHECK(config.network.channel_noise_variance == 0.2);
  CHECK(config.sca.step_size == 0.9);
  CHECK(config.sca.max_iterations == 50);
  CHECK(config.sca.objective_tolerance == 1e-7);
  REQUIRE(config.schemes.size() == 2);
  CHECK(config.schemes[0] == Scheme::maxmin);
  CHECK(config.schemes[1] == Scheme::mmse);
  CHECK(config.trials == 400);
  CHECK(config.num_seeds == 2);
  CHECK(config.master_seed == 99);
  CHECK(config.sweep == std::vector<double>{2.0, 4.0, 6.0});
  CHECK(config.training_samples == 75);
  CHECK(config.epochs == 120);
  CHECK(config.learning_rate == 0.25);

  // untouched keys keep their defaults
  const ExperimentConfig defaults;
  CHECK(defaults.num_classes == 4);
  CHECK(defaults.num_features == 12);
  CHECK(defaults.power_dbm == 12.0);
  CHECK(defaults.network.num_devices == 3);
  CHECK(defaults.schemes.size() == 3);
}

TEST_CASE("config errors carry the offending line") {
  const auto expect_error = [](const std::string& content, const std::string& needle) {
    const fs::path path = temp_dir() / "bad.cfg";
    write_file(path, content);
    try {
      load_config(path.string());
      FAIL("expected ConfigurationError for: " << content);
    } catch (const ConfigurationError& e) {
      INFO(e.what());
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  expect_error("[bogus]\n", "line 1");
  expect_error("[instance\n", "line 1");
  expect_error("classes = 3\n", "line 1");
  expect_error("[instance]\nclasses = 3\nwidth = 2\n", "line 3");
  expect_error("[instance]\nclasses = x\n", "line 2");
  expect_error("[instance]\nclasses\n", "line 2");
  expect_error("[instance]\nclasses =\n", "line 2");
  expect_error("[network]\nmode = quantum\n", "line 2");
  expect_error("[experiment]\nschemes = maxmin, bogus\n", "line 2");
  expect_error("[instance]\nclasses = 1\n", "classes");
  expect_error("[sca]\nstep_size = 0\n", "step_size");
  expect_error("[experiment]\nsweep = 3, 2\n", "increasing");
  expect_error("[experiment]\ntraining_samples = 10\n", "training_samples");
  expect_error("[experiment]\ntrials = 0\n", "trials");
  expect_error("[experiment]\nepochs = -1\n", "epochs");
}

TEST_CASE("scheme names round-trip") {
  for (Scheme scheme : {Scheme::maxmin, Scheme::average, Scheme::mmse}) {
    CHECK(parse_scheme(to_string(scheme)) == scheme);
  }
  CHECK_THROWS_AS(parse_scheme("fancy"), ConfigurationError);
}
