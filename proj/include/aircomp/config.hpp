#pragma once

// Experiment configuration: a single UTF-8 text file of [section] headers and
// key = value lines ('#' starts a comment). Unknown sections or keys, bad
// values, and violated invariants are reported with the offending line
// number. Defaults reproduce the reference operating point: K=3 devices,
// M=12 features, L=4 classes, sensing noise 0.4, P=12 dBm, step size 0.7.

#include <cstdint>
#include <string>
#include <vector>

#include "aircomp/errors.hpp"
#include "aircomp/io.hpp"
#include "aircomp/optimizer.hpp"
#include "aircomp/simulator.hpp"

namespace aircomp {

enum class Scheme { maxmin, average, mmse };

inline const char* to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::maxmin: return "maxmin";
    case Scheme::average: return "average";
    case Scheme::mmse: return "mmse";
  }
  return "unknown";
}

inline Scheme parse_scheme(const std::string& name) {
  if (name == "maxmin") return Scheme::maxmin;
  if (name == "average") return Scheme::average;
  if (name == "mmse") return Scheme::mmse;
  throw ConfigurationError("unknown scheme '" + name + "' (expected maxmin, average, or mmse)");
}

struct ExperimentConfig {
  // [instance]
  int num_classes = 4;
  int num_features = 12;
  double class_separation = 1.0;
  double sensing_noise = 0.4;     // delta^2, shared across devices and slots
  double power_dbm = 12.0;        // per-slot cap P_k
  double total_energy_factor = 0.6;  // Phat_k = factor * M * P_k

  // [network]
  NetworkConfig network;

  // [sca]
  ScaConfig sca;

  // [experiment]
  std::vector<Scheme> schemes = {Scheme::maxmin, Scheme::average, Scheme::mmse};
  int trials = 2000;
  int num_seeds = 5;
  std::uint64_t master_seed = 1;
  std::vector<double> sweep;  // axis grid: device counts or power in dBm
  int training_samples = 200;  // per class, for the softmax proxy
  int epochs = 300;
  double learning_rate = 0.5;
};

namespace detail {

inline std::string trim(const std::string& text) {
  const auto begin = text.find_first_not_of(" \t");
  if (begin == std::string::npos) return "";
  const auto end = text.find_last_not_of(" \t");
  return text.substr(begin, end - begin + 1);
}

inline ConfigurationError config_error(const std::string& file, int line, const std::string& what) {
  return ConfigurationError(file + " line " + std::to_string(line) + ": " + what);
}

inline double config_real(const std::string& value, const std::string& file, int line) {
  try {
    return parse_real(value, file, line);
  } catch (const IngestionError& e) {
    throw ConfigurationError(e.what());
  }
}

inline long config_integer(const std::string& value, const std::string& file, int line) {
  try {
    return parse_integer(value, file, line);
  } catch (const IngestionError& e) {
    throw ConfigurationError(e.what());
  }
}

inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  for (const auto& piece : split_csv(value)) {
    const std::string item = trim(piece);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

}  // namespace detail

inline ExperimentConfig parse_config_text(const std::vector<std::string>& lines,
                                          const std::string& file) {
  ExperimentConfig config;
  bool sweep_set = false;
  std::string section;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const int line_no = static_cast<int>(i) + 1;
    std::string line = lines[i];
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw detail::config_error(file, line_no, "unterminated section");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (section != "instance" && section != "network" && section != "sca" &&
          section != "experiment") {
        throw detail::config_error(file, line_no, "unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw detail::config_error(file, line_no, "expected 'key = value'");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (section.empty()) throw detail::config_error(file, line_no, "key before any [section]");
    if (value.empty()) throw detail::config_error(file, line_no, "empty value for '" + key + "'");

    if (section == "instance") {
      if (key == "classes") config.num_classes = static_cast<int>(detail::config_integer(value, file, line_no));
      else if (key == "features") config.num_features = static_cast<int>(detail::config_integer(value, file, line_no));
      else if (key == "class_separation") config.class_separation = detail::config_real(value, file, line_no);
      else if (key == "sensing_noise") config.sensing_noise = detail::config_real(value, file, line_no);
      else if (key == "power_dbm") config.power_dbm = detail::config_real(value, file, line_no);
      else if (key == "total_energy_factor") config.total_energy_factor = detail::config_real(value, file, line_no);
      else throw detail::config_error(file, line_no, "unknown key '" + key + "' in [instance]");
    } else if (section == "network") {
      if (key == "devices") config.network.num_devices = static_cast<int>(detail::config_integer(value, file, line_no));
      else if (key == "cell_radius") config.network.cell_radius = detail::config_real(value, file, line_no);
      else if (key == "pathloss_exponent") config.network.pathloss_exponent = detail::config_real(value, file, line_no);
      else if (key == "reference_distance") config.network.reference_distance = detail::config_real(value, file, line_no);
      else if (key == "channel_noise") config.network.channel_noise_variance = detail::config_real(value, file, line_no);
      else if (key == "mode") {
        if (value == "physical") config.network.mode = ChannelMode::physical;
        else if (value == "normalized") config.network.mode = ChannelMode::normalized;
        else throw detail::config_error(file, line_no, "mode must be physical or normalized");
      } else throw detail::config_error(file, line_no, "unknown key '" + key + "' in [network]");
    } else if (section == "sca") {
      if (key == "step_size") config.sca.step_size = detail::config_real(value, file, line_no);
      else if (key == "max_iterations") config.sca.max_iterations = static_cast<int>(detail::config_integer(value, file, line_no));
      else if (key == "tolerance") config.sca.objective_tolerance = detail::config_real(value, file, line_no);
      else throw detail::config_error(file, line_no, "unknown key '" + key + "' in [sca]");
    } else {
      if (key == "schemes") {
        config.schemes.clear();
        for (const auto& name : detail::split_list(value)) {
          try {
            config.schemes.push_back(parse_scheme(name));
          } catch (const ConfigurationError& e) {
            throw detail::config_error(file, line_no, e.what());
          }
        }
      } else if (key == "trials") config.trials = static_cast<int>(detail::config_integer(value, file, line_no));
      else if (key == "seeds") config.num_seeds = static_cast<int>(detail::config_integer(value, file, line_no));
      else if (key == "master_seed") config.master_seed = static_cast<std::uint64_t>(detail::config_integer(value, file, line_no));
      else if (key == "sweep") {
        config.sweep.clear();
        sweep_set = true;
        for (const auto& item : detail::split_list(value)) {
          config.sweep.push_back(detail::config_real(item, file, line_no));
        }
      } else if (key == "training_samples") config.training_samples = static_cast<int>(detail::config_integer(value, file, line_no));
      else if (key == "epochs") config.epochs = static_cast<int>(detail::config_integer(value, file, line_no));
      else if (key == "learning_rate") config.learning_rate = detail::config_real(value, file, line_no);
      else throw detail::config_error(file, line_no, "unknown key '" + key + "' in [experiment]");
    }
  }

  if (config.num_classes < 2) throw ConfigurationError(file + ": classes must be at least 2");
  if (config.num_features < 1) throw ConfigurationError(file + ": features must be at least 1");
  if (config.sensing_noise < 0.0) throw ConfigurationError(file + ": sensing_noise negative");
  if (!(config.total_energy_factor > 0.0)) {
    throw ConfigurationError(file + ": total_energy_factor must be positive");
  }
  if (config.network.num_devices < 1) throw ConfigurationError(file + ": devices must be positive");
  if (!(config.sca.step_size > 0.0 && config.sca.step_size <= 1.0)) {
    throw ConfigurationError(file + ": step_size must lie in (0, 1]");
  }
  if (config.trials < 1) throw ConfigurationError(file + ": trials must be positive");
  if (config.num_seeds < 1) throw ConfigurationError(file + ": seeds must be positive");
  if (config.schemes.empty()) throw ConfigurationError(file + ": schemes list is empty");
  if (sweep_set) {
    if (config.sweep.empty()) throw ConfigurationError(file + ": sweep grid is empty");
    for (std::size_t i = 1; i < config.sweep.size(); ++i) {
      if (!(config.sweep[i] > config.sweep[i - 1])) {
        throw ConfigurationError(file + ": sweep grid must be strictly increasing");
      }
    }
  }
  if (config.training_samples < 50) {
    throw ConfigurationError(file + ": training_samples must be at least 50 per class");
  }
  if (config.epochs < 0) throw ConfigurationError(file + ": epochs must be non-negative");
  if (!(config.learning_rate > 0.0)) throw ConfigurationError(file + ": learning_rate must be positive");
  return config;
}

inline ExperimentConfig load_config(const std::string& path) {
  return parse_config_text(detail::read_lines(path), path);
}

}  // namespace aircomp
