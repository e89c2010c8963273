#ifndef STLFMP_CONFIG_HPP
#define STLFMP_CONFIG_HPP

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "stlfmp/pipeline.hpp"

namespace stlfmp {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Value in a TOML-like key-value file: bool, number, string, or a flat
/// array of numbers or strings.
using ConfigValue = std::variant<bool, double, std::string,
                                 std::vector<double>,
                                 std::vector<std::string>>;

/// Flat view of a TOML-like file: `[a.b]` + `k = v` becomes key "a.b.k".
/// Supported values: booleans, numbers, "strings", and one-line arrays.
class Config {
public:
  static Config parse(const std::string &text);
  static Config parse_file(const std::string &path);

  bool has(const std::string &key) const;
  bool get_bool(const std::string &key) const;
  double get_double(const std::string &key) const;
  std::int64_t get_int(const std::string &key) const;
  std::string get_string(const std::string &key) const;
  std::vector<double> get_doubles(const std::string &key) const;
  std::vector<std::string> get_strings(const std::string &key) const;

  bool get_bool(const std::string &key, bool dflt) const;
  double get_double(const std::string &key, double dflt) const;
  std::int64_t get_int(const std::string &key, std::int64_t dflt) const;
  std::string get_string(const std::string &key,
                         const std::string &dflt) const;

  /// Keys under `prefix.` with the prefix stripped.
  std::vector<std::string> keys_under(const std::string &prefix) const;

private:
  std::map<std::string, ConfigValue> values_;
};

/// A fully resolved benchmark run: system, formula, pipeline and Monte
/// Carlo settings. See configs/README.md for the schema.
struct ExperimentConfig {
  std::string name;
  PipelineConfig pipeline;
  std::map<std::string, Predicate> bindings;
  std::string formula_text;
  int n_rollouts = 2000;
  double sim_dt = 1e-3;
  std::uint64_t seed = 0;
  bool run_baselines = false; // non-robust + shrinking-horizon rollouts
  int baseline_rollouts = 0;  // 0 means same as n_rollouts
  int shmpc_rollouts = 0;     // 0 means a reduced default
};

ExperimentConfig load_experiment(const Config &cfg);
ExperimentConfig load_experiment_file(const std::string &path);

} // namespace stlfmp

#endif
