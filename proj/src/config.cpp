#include "stlfmp/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace stlfmp {

namespace {

std::string trim(const std::string &s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// strip a trailing comment, respecting double-quoted strings
std::string strip_comment(const std::string &s) {
  bool in_str = false;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') in_str = !in_str;
    if (s[i] == '#' && !in_str) return s.substr(0, i);
  }
  return s;
}

bool parse_number(const std::string &s, double &out) {
  try {
    size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

ConfigValue parse_value(const std::string &raw, int line_no) {
  const std::string s = trim(raw);
  if (s.empty()) throw ConfigError("config: empty value on line " +
                                   std::to_string(line_no));
  if (s == "true") return true;
  if (s == "false") return false;
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"')
      throw ConfigError("config: unterminated string on line " +
                        std::to_string(line_no));
    return s.substr(1, s.size() - 2);
  }
  if (s.front() == '[') {
    if (s.back() != ']')
      throw ConfigError("config: unterminated array on line " +
                        std::to_string(line_no));
    std::vector<std::string> items;
    std::string cur;
    for (size_t i = 1; i + 1 < s.size(); ++i) {
      if (s[i] == ',') {
        items.push_back(trim(cur));
        cur.clear();
      } else {
        cur += s[i];
      }
    }
    if (!trim(cur).empty()) items.push_back(trim(cur));
    if (items.empty()) return std::vector<double>{};
    if (!items[0].empty() && items[0].front() == '"') {
      std::vector<std::string> strs;
      for (auto &it : items) {
        if (it.size() < 2 || it.front() != '"' || it.back() != '"')
          throw ConfigError("config: bad string array on line " +
                            std::to_string(line_no));
        strs.push_back(it.substr(1, it.size() - 2));
      }
      return strs;
    }
    std::vector<double> nums;
    for (auto &it : items) {
      double v;
      if (!parse_number(it, v))
        throw ConfigError("config: bad number '" + it + "' on line " +
                          std::to_string(line_no));
      nums.push_back(v);
    }
    return nums;
  }
  double v;
  if (parse_number(s, v)) return v;
  throw ConfigError("config: cannot parse value '" + s + "' on line " +
                    std::to_string(line_no));
}

} // namespace

Config Config::parse(const std::string &text) {
  Config cfg;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config: bad section header on line " +
                          std::to_string(line_no));
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ConfigError("config: empty section name on line " +
                          std::to_string(line_no));
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: expected key = value on line " +
                        std::to_string(line_no));
    const std::string key = trim(line.substr(0, eq));
    if (key.empty())
      throw ConfigError("config: empty key on line " +
                        std::to_string(line_no));
    const std::string full = section.empty() ? key : section + "." + key;
    cfg.values_[full] = parse_value(line.substr(eq + 1), line_no);
  }
  return cfg;
}

Config Config::parse_file(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

bool Config::has(const std::string &key) const {
  return values_.count(key) > 0;
}

namespace {
template <typename T>
const T &fetch(const std::map<std::string, ConfigValue> &m,
               const std::string &key, const char *what) {
  const auto it = m.find(key);
  if (it == m.end()) throw ConfigError("config: missing key '" + key + "'");
  const T *p = std::get_if<T>(&it->second);
  if (!p)
    throw ConfigError("config: key '" + key + "' is not a " + what);
  return *p;
}
} // namespace

bool Config::get_bool(const std::string &key) const {
  return fetch<bool>(values_, key, "bool");
}
double Config::get_double(const std::string &key) const {
  const auto it = values_.find(key);
  if (it == values_.end())
    throw ConfigError("config: missing key '" + key + "'");
  if (const double *p = std::get_if<double>(&it->second)) return *p;
  throw ConfigError("config: key '" + key + "' is not a number");
}
std::int64_t Config::get_int(const std::string &key) const {
  const double v = get_double(key);
  const auto r = static_cast<std::int64_t>(std::llround(v));
  if (std::abs(v - static_cast<double>(r)) > 1e-9)
    throw ConfigError("config: key '" + key + "' is not an integer");
  return r;
}
std::string Config::get_string(const std::string &key) const {
  return fetch<std::string>(values_, key, "string");
}
std::vector<double> Config::get_doubles(const std::string &key) const {
  return fetch<std::vector<double>>(values_, key, "number array");
}
std::vector<std::string> Config::get_strings(const std::string &key) const {
  return fetch<std::vector<std::string>>(values_, key, "string array");
}

bool Config::get_bool(const std::string &key, bool dflt) const {
  return has(key) ? get_bool(key) : dflt;
}
double Config::get_double(const std::string &key, double dflt) const {
  return has(key) ? get_double(key) : dflt;
}
std::int64_t Config::get_int(const std::string &key, std::int64_t dflt) const {
  return has(key) ? get_int(key) : dflt;
}
std::string Config::get_string(const std::string &key,
                               const std::string &dflt) const {
  return has(key) ? get_string(key) : dflt;
}

std::vector<std::string> Config::keys_under(const std::string &prefix) const {
  std::vector<std::string> out;
  const std::string pre = prefix + ".";
  for (const auto &[k, v] : values_)
    if (k.rfind(pre, 0) == 0) out.push_back(k.substr(pre.size()));
  return out;
}

namespace {

Vec to_vec(const std::vector<double> &v) {
  Vec out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = v[i];
  return out;
}

Predicate parse_predicate(const Config &cfg, const std::string &base,
                          const Mat &P) {
  Predicate p;
  p.projection = P;
  const std::string kind = cfg.get_string(base + ".kind");
  if (kind == "disk_inside" || kind == "disk_outside") {
    p.kind = kind == "disk_inside" ? Predicate::Kind::DiskInside
                                   : Predicate::Kind::DiskOutside;
    p.center = to_vec(cfg.get_doubles(base + ".center"));
    p.radius = cfg.get_double(base + ".radius");
  } else if (kind == "box_inside" || kind == "box_outside") {
    p.kind = kind == "box_inside" ? Predicate::Kind::BoxInside
                                  : Predicate::Kind::BoxOutside;
    p.lower = to_vec(cfg.get_doubles(base + ".lower"));
    p.upper = to_vec(cfg.get_doubles(base + ".upper"));
  } else if (kind == "halfspace") {
    p.kind = Predicate::Kind::Halfspace;
    p.normal = to_vec(cfg.get_doubles(base + ".normal"));
    p.offset = cfg.get_double(base + ".offset");
  } else {
    throw ConfigError("config: unknown predicate kind '" + kind + "'");
  }
  p.validate();
  return p;
}

} // namespace

ExperimentConfig load_experiment(const Config &cfg) {
  ExperimentConfig ec;
  ec.name = cfg.get_string("benchmark.name", "unnamed");

  std::map<std::string, double> params;
  for (const std::string &k : cfg.keys_under("system.params"))
    params[k] = cfg.get_double("system.params." + k);
  ec.pipeline.sys = make_system(cfg.get_string("system.name"), params);

  ec.pipeline.T = cfg.get_double("benchmark.T");
  ec.pipeline.N = static_cast<int>(cfg.get_int("benchmark.N"));
  ec.pipeline.x0 = to_vec(cfg.get_doubles("benchmark.x0"));
  if (ec.pipeline.x0.size() != ec.pipeline.sys.n)
    throw ConfigError("config: benchmark.x0 has the wrong dimension");

  std::set<std::string> pred_names;
  for (const std::string &k : cfg.keys_under("predicate"))
    pred_names.insert(k.substr(0, k.find('.')));
  for (const std::string &name : pred_names)
    ec.bindings[name] =
        parse_predicate(cfg, "predicate." + name, ec.pipeline.sys.P);
  ec.formula_text = cfg.get_string("formula.text");
  ec.pipeline.formula = parse_formula(ec.formula_text, ec.bindings);

  ec.pipeline.delta = cfg.get_double("pipeline.delta", 1e-3);
  ec.pipeline.dt_split = cfg.get_double("pipeline.dt_split", 0.25);
  ec.pipeline.optimize_eps = cfg.get_bool("pipeline.optimize_eps", true);
  ec.pipeline.epsilon = cfg.get_double("pipeline.epsilon", 0.8);
  ec.pipeline.max_iters =
      static_cast<int>(cfg.get_int("pipeline.max_iters", 10));
  ec.pipeline.time_invariant_erosion =
      cfg.get_bool("pipeline.time_invariant_erosion", false);
  ec.pipeline.rho_min = cfg.get_double("pipeline.rho_min", 1e-3);
  if (cfg.has("pipeline.betas"))
    ec.pipeline.betas = cfg.get_doubles("pipeline.betas");

  const std::string ctrl = cfg.get_string("pipeline.controller", "tvlqr");
  if (ctrl == "tvlqr")
    ec.pipeline.controller = ControllerType::Tvlqr;
  else if (ctrl == "tvccm")
    ec.pipeline.controller = ControllerType::TvccmTraj;
  else if (ctrl == "tvccm_global")
    ec.pipeline.controller = ControllerType::TvccmGlobal;
  else
    throw ConfigError("config: unknown controller '" + ctrl + "'");

  ec.pipeline.tvccm.c = cfg.get_double("tvccm.c", ec.pipeline.tvccm.c);
  ec.pipeline.tvccm.w = cfg.get_double("tvccm.w", ec.pipeline.tvccm.w);
  ec.pipeline.tvccm.max_iters = static_cast<int>(
      cfg.get_int("tvccm.max_iters", ec.pipeline.tvccm.max_iters));
  ec.pipeline.tvccm.n_samples = static_cast<int>(
      cfg.get_int("tvccm.n_samples", ec.pipeline.tvccm.n_samples));
  if (cfg.has("region.lo")) {
    ec.pipeline.region_lo = to_vec(cfg.get_doubles("region.lo"));
    ec.pipeline.region_hi = to_vec(cfg.get_doubles("region.hi"));
  }

  ec.n_rollouts = static_cast<int>(cfg.get_int("mc.rollouts", 2000));
  ec.sim_dt = cfg.get_double("mc.sim_dt", 1e-3);
  ec.seed = static_cast<std::uint64_t>(cfg.get_int("mc.seed", 0));
  ec.run_baselines = cfg.get_bool("baselines.enabled", false);
  ec.baseline_rollouts =
      static_cast<int>(cfg.get_int("baselines.rollouts", 0));
  ec.shmpc_rollouts =
      static_cast<int>(cfg.get_int("baselines.shmpc_rollouts", 0));
  return ec;
}

ExperimentConfig load_experiment_file(const std::string &path) {
  return load_experiment(Config::parse_file(path));
}

} // namespace stlfmp
