// Flat TOML-style training configuration: parsing, validation, serialization.
#pragma once

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "cecl/trainer.hpp"

namespace cecl::config {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Every key accepted in a config file, with its built-in default.
inline const std::map<std::string, std::string>& config_keys() {
  static const std::map<std::string, std::string> keys = {
      {"alpha", "0.2"},
      {"beta", "0.4"},
      {"upper_bound", "10"},
      {"threshold_mode", "adaptive"},
      {"fixed_threshold", "5"},
      {"hn_pool", "own"},
      {"include_rel_term", "true"},
      {"epochs", "5"},
      {"batch_size", "32"},
      {"lr", "0.001"},
      {"optimizer", "adam"},
      {"seed", "0"},
      {"use_hn", "true"},
      {"use_imc", "true"},
      {"use_cmr", "true"},
      {"regen_per_epoch", "false"},
  };
  return keys;
}

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline std::string unquote(const std::string& s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                        (s.front() == '\'' && s.back() == '\'')))
    return s.substr(1, s.size() - 2);
  return s;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(key + " must be true or false, got: " + v);
}

inline double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key + " must be a number, got: " + v);
  }
}

inline long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key + " must be an integer, got: " + v);
  }
}

// "adam", "adam(b1,b2,eps)", "sgd_momentum", "sgd_momentum(mu)"
inline trainer::OptimizerCfg parse_optimizer(const std::string& v) {
  trainer::OptimizerCfg cfg;
  std::string name = v;
  std::string args;
  const std::size_t open = v.find('(');
  if (open != std::string::npos) {
    if (v.back() != ')') throw ConfigError("bad optimizer spec: " + v);
    name = v.substr(0, open);
    args = v.substr(open + 1, v.size() - open - 2);
  }
  std::vector<double> xs;
  if (!args.empty()) {
    std::stringstream ss(args);
    std::string part;
    while (std::getline(ss, part, ','))
      xs.push_back(parse_real("optimizer", trim(part)));
  }
  if (name == "adam") {
    cfg.kind = trainer::OptimizerCfg::Kind::Adam;
    if (xs.size() > 0) cfg.beta1 = xs[0];
    if (xs.size() > 1) cfg.beta2 = xs[1];
    if (xs.size() > 2) cfg.eps = xs[2];
    if (xs.size() > 3) throw ConfigError("adam takes at most 3 arguments");
  } else if (name == "sgd_momentum") {
    cfg.kind = trainer::OptimizerCfg::Kind::SgdMomentum;
    if (xs.size() > 0) cfg.mu = xs[0];
    if (xs.size() > 1) throw ConfigError("sgd_momentum takes at most 1 argument");
  } else {
    throw ConfigError("optimizer must be adam or sgd_momentum, got: " + name);
  }
  return cfg;
}

inline std::string optimizer_to_string(const trainer::OptimizerCfg& cfg) {
  char buf[96];
  if (cfg.kind == trainer::OptimizerCfg::Kind::Adam)
    std::snprintf(buf, sizeof buf, "adam(%g,%g,%g)", cfg.beta1, cfg.beta2, cfg.eps);
  else
    std::snprintf(buf, sizeof buf, "sgd_momentum(%g)", cfg.mu);
  return std::string(buf);
}

}  // namespace detail

inline void apply_key(trainer::TrainConfig& cfg, const std::string& key,
                      const std::string& raw) {
  using detail::parse_bool;
  using detail::parse_int;
  using detail::parse_real;
  const std::string v = detail::unquote(raw);
  if (key == "alpha") cfg.alpha = parse_real(key, v);
  else if (key == "beta") cfg.beta = parse_real(key, v);
  else if (key == "upper_bound") cfg.upper_bound = parse_real(key, v);
  else if (key == "threshold_mode") {
    if (v == "adaptive") cfg.threshold_mode = trainer::TrainConfig::ThresholdMode::Adaptive;
    else if (v == "fixed") cfg.threshold_mode = trainer::TrainConfig::ThresholdMode::Fixed;
    else throw ConfigError("threshold_mode must be adaptive or fixed, got: " + v);
  } else if (key == "fixed_threshold") cfg.fixed_threshold = parse_real(key, v);
  else if (key == "hn_pool") {
    if (v == "own") cfg.hn_pool = losses::HnPool::Own;
    else if (v == "batch") cfg.hn_pool = losses::HnPool::Batch;
    else throw ConfigError("hn_pool must be own or batch, got: " + v);
  } else if (key == "include_rel_term") cfg.include_rel_term = parse_bool(key, v);
  else if (key == "epochs") cfg.epochs = static_cast<int>(parse_int(key, v));
  else if (key == "batch_size") cfg.batch_size = static_cast<int>(parse_int(key, v));
  else if (key == "lr") cfg.lr = parse_real(key, v);
  else if (key == "optimizer") cfg.optimizer = detail::parse_optimizer(v);
  else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(key, v));
  else if (key == "use_hn") cfg.use_hn = parse_bool(key, v);
  else if (key == "use_imc") cfg.use_imc = parse_bool(key, v);
  else if (key == "use_cmr") cfg.use_cmr = parse_bool(key, v);
  else if (key == "regen_per_epoch") cfg.regen_per_epoch = parse_bool(key, v);
  else throw ConfigError("unknown config key: " + key);
}

inline void validate(const trainer::TrainConfig& cfg) {
  if (cfg.alpha < 0 || cfg.beta < 0) throw ConfigError("alpha and beta must be >= 0");
  if (!(cfg.upper_bound > 0)) throw ConfigError("upper_bound must be > 0");
  if (!(cfg.lr > 0)) throw ConfigError("lr must be > 0");
  if (cfg.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (cfg.use_hn && cfg.batch_size < 2)
    throw ConfigError("batch_size must be >= 2 when use_hn is enabled");
  if (cfg.threshold_mode == trainer::TrainConfig::ThresholdMode::Fixed) {
    const double v = cfg.fixed_threshold;
    if (v != 2.0 && v != 5.0 && v != 10.0)
      throw ConfigError("fixed_threshold must be one of 2, 5, 10");
  }
}

// Parse `key = value` lines; `#` starts a comment; unknown keys are errors.
inline trainer::TrainConfig parse_config(std::istream& in,
                                         trainer::TrainConfig base = {}) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = detail::trim(line);
    if (s.empty() || s[0] == '#') continue;
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(s.substr(0, eq));
    std::string value = detail::trim(s.substr(eq + 1));
    const std::size_t hash = value.find(" #");
    if (hash != std::string::npos) value = detail::trim(value.substr(0, hash));
    apply_key(base, key, value);
  }
  return base;
}

inline trainer::TrainConfig parse_config_file(const std::string& path,
                                              trainer::TrainConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return parse_config(in, base);
}

inline std::string serialize(const trainer::TrainConfig& cfg) {
  char buf[128];
  std::ostringstream out;
  auto real = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%s = %.17g\n", key, v);
    out << buf;
  };
  real("alpha", cfg.alpha);
  real("beta", cfg.beta);
  real("upper_bound", cfg.upper_bound);
  out << "threshold_mode = \""
      << (cfg.threshold_mode == trainer::TrainConfig::ThresholdMode::Adaptive
              ? "adaptive"
              : "fixed")
      << "\"\n";
  real("fixed_threshold", cfg.fixed_threshold);
  out << "hn_pool = \"" << (cfg.hn_pool == losses::HnPool::Own ? "own" : "batch")
      << "\"\n";
  out << "include_rel_term = " << (cfg.include_rel_term ? "true" : "false") << "\n";
  out << "epochs = " << cfg.epochs << "\n";
  out << "batch_size = " << cfg.batch_size << "\n";
  real("lr", cfg.lr);
  out << "optimizer = \"" << detail::optimizer_to_string(cfg.optimizer) << "\"\n";
  out << "seed = " << cfg.seed << "\n";
  out << "use_hn = " << (cfg.use_hn ? "true" : "false") << "\n";
  out << "use_imc = " << (cfg.use_imc ? "true" : "false") << "\n";
  out << "use_cmr = " << (cfg.use_cmr ? "true" : "false") << "\n";
  out << "regen_per_epoch = " << (cfg.regen_per_epoch ? "true" : "false") << "\n";
  return out.str();
}

}  // namespace cecl::config
