#include <cmath>
#include <sstream>

#include "doctest.h"
#include "stlfmp/experiments.hpp"

using namespace stlfmp;

TEST_CASE("config: sections, arrays, comments, errors") {
  const std::string text = R"(
# top comment
title = "demo"   # trailing comment
[a]
flag = true
x = 1.5
n = 42
vals = [1.0, 2.0, 3.0]
names = ["p", "q"]
[a.b]
y = -2
)";
  const Config cfg = Config::parse(text);
  CHECK(cfg.get_string("title") == "demo");
  CHECK(cfg.get_bool("a.flag"));
  CHECK(cfg.get_double("a.x") == doctest::Approx(1.5));
  CHECK(cfg.get_int("a.n") == 42);
  CHECK(cfg.get_doubles("a.vals").size() == 3);
  CHECK(cfg.get_strings("a.names")[1] == "q");
  CHECK(cfg.get_double("a.b.y") == doctest::Approx(-2.0));
  CHECK(cfg.get_double("missing", 7.0) == doctest::Approx(7.0));
  CHECK_THROWS_AS(cfg.get_double("missing"), ConfigError);
  CHECK_THROWS_AS(cfg.get_int("a.x"), ConfigError);
  CHECK_THROWS_AS(Config::parse("k = "), ConfigError);
  CHECK_THROWS_AS(Config::parse("[unclosed"), ConfigError);
  CHECK_THROWS_AS(Config::parse("just a line"), ConfigError);
}

TEST_CASE("experiment configs on disk load and parse") {
  for (const char *name :
       {"configs/di.toml", "configs/dubins.toml", "configs/pvtol.toml",
        "configs/quadrotor.toml", "configs/go1_reachavoid.toml",
        "configs/go1_passbefore.toml"}) {
    CAPTURE(name);
    const ExperimentConfig ec = load_experiment_file(name);
    CHECK(ec.pipeline.formula != nullptr);
    CHECK(ec.pipeline.T > 0.0);
    CHECK(ec.pipeline.N >= 2);
    CHECK(ec.pipeline.x0.size() == ec.pipeline.sys.n);
    CHECK(horizon(ec.pipeline.formula) <= ec.pipeline.T + 1e-9);
  }
}

TEST_CASE("clopper_pearson: closed forms and brute-force oracle") {
  // k = 0 and k = n have closed-form bounds
  const double alpha = 0.05;
  for (int n : {5, 20, 100}) {
    const auto [lo0, hi0] = clopper_pearson(0, n);
    CHECK(lo0 == doctest::Approx(0.0));
    CHECK(hi0 ==
          doctest::Approx(1.0 - std::pow(alpha / 2.0, 1.0 / n)).epsilon(1e-8));
    const auto [lon, hin] = clopper_pearson(n, n);
    CHECK(hin == doctest::Approx(1.0));
    CHECK(lon ==
          doctest::Approx(std::pow(alpha / 2.0, 1.0 / n)).epsilon(1e-8));
  }
  // brute-force tail oracle by direct binomial enumeration on small n
  auto tail_ge = [](int n, int k, double p) {
    double s = 0.0;
    for (int i = k; i <= n; ++i) {
      double c = 1.0;
      for (int j = 0; j < i; ++j) c *= static_cast<double>(n - j) / (j + 1);
      s += c * std::pow(p, i) * std::pow(1.0 - p, n - i);
    }
    return s;
  };
  for (int n : {8, 15}) {
    for (int k = 1; k < n; ++k) {
      const auto [lo, hi] = clopper_pearson(k, n);
      CHECK(tail_ge(n, k, lo) == doctest::Approx(alpha / 2.0).epsilon(1e-6));
      CHECK(1.0 - tail_ge(n, k + 1, hi) ==
            doctest::Approx(alpha / 2.0).epsilon(1e-6));
      CHECK(lo < static_cast<double>(k) / n);
      CHECK(hi > static_cast<double>(k) / n);
    }
  }
}

TEST_CASE("csv writers: shape and determinism") {
  Trajectory traj;
  for (int k = 0; k <= 3; ++k) {
    traj.times.push_back(0.5 * k);
    Vec x(2);
    x << k, -k;
    traj.states.push_back(x);
    if (k < 3) traj.controls.push_back(Vec::Ones(1));
  }
  const std::string a = trajectory_csv(traj);
  CHECK(a == trajectory_csv(traj));
  std::istringstream in(a);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 5); // header + 4 samples
  CHECK(a.rfind("t,x0,x1,u0\n", 0) == 0);
}

TEST_CASE("compare_erosion_csv: small instance sanity") {
  const std::string csv = compare_erosion_csv({10}, {1e-2});
  CHECK(csv.rfind("scheme,N,delta,t,radius\n", 0) == 0);
  int ours = 0, stlcd = 0, dprt = 0;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("ours,", 0) == 0) ++ours;
    if (line.rfind("stlcd,", 0) == 0) ++stlcd;
    if (line.rfind("dprt,", 0) == 0) ++dprt;
  }
  CHECK(ours == 11);
  CHECK(stlcd == 11);
  CHECK(dprt == 11);
}
