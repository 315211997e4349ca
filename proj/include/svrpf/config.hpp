// Copyright 2026 The svrpf Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SVRPF_CONFIG_HPP
#define SVRPF_CONFIG_HPP

#include <svrpf/types.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

/**
 * \file
 * \brief Flat `key = value` configuration with dotted keys and environment overrides.
 *
 * Lines are `key = value`; `#` starts a comment; blank lines are ignored. Only keys listed in
 * `known_config_keys()` are accepted. Any key can be overridden by the environment variable
 * `SVRPF_<KEY>` where the key is upper-cased and dots become underscores (`model.q` -> `SVRPF_MODEL_Q`).
 */

namespace svrpf {

struct ConfigKey {
  std::string_view name;
  std::string_view fallback;
  std::string_view help;
};

/// Every accepted key with its default ("" means unset).
inline const std::vector<ConfigKey>& known_config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"model.name", "nonlinear_growth", "nonlinear_growth or linear_gaussian"},
      {"model.q", "10", "process noise variance"},
      {"model.r", "0.1", "observation noise variance"},
      {"model.a", "0.9", "linear_gaussian transition coefficient"},
      {"model.c", "1", "linear_gaussian observation coefficient"},
      {"model.x0_mean", "0", "initial state mean"},
      {"model.x0_var", "5", "initial state variance"},
      {"model.likelihood_floor", "1e-300", "lower bound applied to every likelihood"},
      {"experiment.steps", "100", "time horizon T"},
      {"experiment.runs", "100", "Monte Carlo runs"},
      {"experiment.seed", "1", "base seed"},
      {"experiment.threads", "0", "worker threads; 0 means hardware concurrency"},
      {"filters", "gpf,epf,upf,svrpf", "comma-separated filters; name[:resampling] for gpf/epf/upf, or kalman"},
      {"filter.n", "100", "particles per filter"},
      {"filter.resampling", "systematic", "systematic, multinomial, min_variance, residual or branching"},
      {"filter.branch_lower", "0.25", "branching: keep particle if N w is above this"},
      {"filter.branch_upper", "4", "branching: keep particle if N w is below this"},
      {"filter.ukf.alpha", "1", "unscented spread"},
      {"filter.ukf.beta", "2", "unscented prior knowledge"},
      {"filter.ukf.kappa", "0", "unscented secondary scaling"},
      {"filter.svrpf.m", "", "placed points; unset means m_ratio * n"},
      {"filter.svrpf.m_ratio", "2", "placed points per particle when m is unset and in sweeps"},
      {"filter.svrpf.gamma", "1.5", "importance region amplification"},
      {"filter.svrpf.min_width", "", "width of zero-width region rows; unset means 1e-3 (1 + |center|)"},
      {"svr.bandwidth_rule", "sheather_jones", "sheather_jones or silverman"},
      {"svr.bandwidth_scale", "1.5", "multiplier on the rule's bandwidth"},
      {"svr.adaptive_exponent", "1", "sample-point bandwidth exponent; 0 disables"},
      {"svr.max_scale", "5", "clamp on the sample-point bandwidth factors"},
      {"svr.bandwidth", "", "fixed bandwidth (all dimensions); overrides the rule"},
      {"svr.merge_fraction", "0.1", "support merging cell width as a fraction of the bandwidth"},
      {"svr.epsilon", "", "fixed peak tube half-width; unset means epsilon_scale / sqrt(N_eff)"},
      {"svr.epsilon_scale", "0.5", "tube scale when epsilon is unset"},
      {"svr.noise_scaled_tube", "true", "shape the tube by the CDF sampling noise"},
      {"svr.tube_floor", "0.2", "smallest noise-scaled tube as a fraction of epsilon"},
      {"svr.regularization", "3", "ridge pulling beta towards the particle weights"},
      {"svr.tol_kkt", "1e-8", "KKT tolerance"},
      {"svr.max_iterations", "200000", "QP iteration limit"},
      {"svr.max_retries", "3", "epsilon doublings after an infeasible QP"},
      {"output.dir", "out", "directory for CSV files"},
      {"output.verbose", "false", "print per-run progress and fit diagnostics to stderr"},
      {"validate.inject", "none", "fault injection for validate: none or unnormalized_weights"},
  };
  return keys;
}

/// Environment variable name overriding `key`.
inline std::string env_name(std::string_view key) {
  std::string out = "SVRPF_";
  for (char c : key) {
    out.push_back(c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  return out;
}

class Config {
 public:
  Config() {
    for (const auto& k : known_config_keys()) {
      values_[std::string(k.name)] = std::string(k.fallback);
    }
  }

  /// Parses `text`, overriding defaults. `origin` names the source in error messages.
  static Config parse(std::string_view text, std::string_view origin = "<config>") {
    Config cfg;
    std::map<std::string, int> seen;
    std::istringstream in{std::string(text)};
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
      ++number;
      const auto hash = line.find('#');
      if (hash != std::string::npos) {
        line.erase(hash);
      }
      const std::string body = trim(line);
      if (body.empty()) {
        continue;
      }
      const auto eq = body.find('=');
      const std::string where = std::string(origin) + ":" + std::to_string(number);
      if (eq == std::string::npos) {
        throw ConfigError(where + ": expected key = value");
      }
      const std::string key = trim(body.substr(0, eq));
      if (!cfg.values_.contains(key)) {
        throw ConfigError(where + ": unknown key '" + key + "'");
      }
      if (seen.contains(key)) {
        throw ConfigError(where + ": duplicate key '" + key + "' (first at line " + std::to_string(seen[key]) + ")");
      }
      seen[key] = number;
      cfg.values_[key] = trim(body.substr(eq + 1));
    }
    return cfg;
  }

  static Config load(const std::string& path) {
    std::ifstream file(path);
    if (!file) {
      throw ConfigError("cannot open config file '" + path + "'");
    }
    std::ostringstream text;
    text << file.rdbuf();
    return parse(text.str(), path);
  }

  /// Applies `SVRPF_*` environment overrides for every known key.
  void apply_environment() {
    for (auto& [key, value] : values_) {
      if (const char* env = std::getenv(env_name(key).c_str())) {
        value = env;
      }
    }
  }

  void set(const std::string& key, std::string value) {
    if (!values_.contains(key)) {
      throw ConfigError("unknown key '" + key + "'");
    }
    values_[key] = std::move(value);
  }

  [[nodiscard]] const std::string& raw(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) {
      throw ConfigError("unknown key '" + key + "'");
    }
    return it->second;
  }

  [[nodiscard]] bool has(const std::string& key) const { return !raw(key).empty(); }

  [[nodiscard]] std::string text(const std::string& key) const { return raw(key); }

  [[nodiscard]] double real(const std::string& key) const {
    const std::string& v = raw(key);
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
      throw ConfigError(key + ": expected a finite number, got '" + v + "'");
    }
    return out;
  }

  [[nodiscard]] std::optional<double> optional_real(const std::string& key) const {
    return has(key) ? std::optional<double>(real(key)) : std::nullopt;
  }

  [[nodiscard]] std::uint64_t count(const std::string& key) const {
    const std::string& v = raw(key);
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
      throw ConfigError(key + ": expected a nonnegative integer, got '" + v + "'");
    }
    return out;
  }

  [[nodiscard]] bool flag(const std::string& key) const {
    const std::string& v = raw(key);
    if (v == "true" || v == "1" || v == "yes") {
      return true;
    }
    if (v == "false" || v == "0" || v == "no") {
      return false;
    }
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
  }

  [[nodiscard]] std::vector<std::string> list(const std::string& key) const {
    std::vector<std::string> out;
    std::istringstream in(raw(key));
    std::string item;
    while (std::getline(in, item, ',')) {
      item = trim(item);
      if (!item.empty()) {
        out.push_back(item);
      }
    }
    return out;
  }

  [[nodiscard]] const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  static std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
      return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
  }

  std::map<std::string, std::string> values_;
};

}  // namespace svrpf

#endif
