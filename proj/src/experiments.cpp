#include "stlfmp/experiments.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

namespace stlfmp {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

Json method_entry(int satisfied, int total, int failures = 0) {
  Json j;
  j["satisfied"] = satisfied;
  j["total"] = total;
  j["fraction"] = total > 0 ? static_cast<double>(satisfied) / total : 0.0;
  const auto [lo, hi] = clopper_pearson(satisfied, std::max(1, total));
  j["ci95_lo"] = lo;
  j["ci95_hi"] = hi;
  if (failures > 0) j["replan_failures"] = failures;
  return j;
}

} // namespace

void write_file(const std::string &path, const std::string &content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

std::string trajectory_csv(const Trajectory &traj) {
  std::string s = "t";
  const int n = traj.states.empty() ? 0 : static_cast<int>(traj.states[0].size());
  const int p =
      traj.controls.empty() ? 0 : static_cast<int>(traj.controls[0].size());
  for (int i = 0; i < n; ++i) s += ",x" + std::to_string(i);
  for (int i = 0; i < p; ++i) s += ",u" + std::to_string(i);
  s += "\n";
  for (size_t k = 0; k < traj.times.size(); ++k) {
    s += fmt(traj.times[k]);
    for (int i = 0; i < n; ++i) s += "," + fmt(traj.states[k][i]);
    for (int i = 0; i < p; ++i)
      s += "," + (k < traj.controls.size() ? fmt(traj.controls[k][i]) : "");
    s += "\n";
  }
  return s;
}

std::string tube_csv(const PipelineOutput &out, const Mat &P) {
  std::string s = "t,radius_metric,radius_projected,erosion\n";
  ErosionSchedule er;
  er.times = out.erosion_times;
  er.radii = out.erosion_radii;
  for (size_t k = 0; k < out.tube.times.size(); ++k) {
    const double t = out.tube.times[k];
    const double r = out.tube.radii[k];
    const double rp = projected_radius(out.tube.M[k], r, P);
    s += fmt(t) + "," + fmt(r) + "," + fmt(rp) + "," +
         fmt(er.empty() ? 0.0 : er.at(t)) + "\n";
  }
  return s;
}

std::string compare_erosion_csv(const std::vector<int> &N_list,
                                const std::vector<double> &delta_list) {
  const double T = 8.0, dt_split = 0.25;
  const SystemModel sys = make_system("double_integrator");
  // the double integrator is linear, so the Riccati flow is independent of
  // the nominal; any dynamically consistent trajectory works
  const int Nn = 80;
  std::vector<Vec> zero_u(Nn, Vec::Zero(sys.p));
  const Trajectory nominal =
      integrate_nominal(sys, Vec::Zero(sys.n), zero_u, T / Nn, Nn);
  const GainSchedule sched = tvlqr_synthesize(
      sys, nominal, Mat::Identity(4, 4), 0.1 * Mat::Identity(2, 2),
      10.0 * Mat::Identity(4, 4));

  std::string s = "scheme,N,delta,t,radius\n";
  auto row = [&](const std::string &scheme, int N, double delta, double t,
                 double r) {
    s += scheme + "," + std::to_string(N) + "," + fmt(delta) + "," + fmt(t) +
         "," + fmt(r) + "\n";
  };
  for (double delta : delta_list) {
    const double eps = optimize_epsilon(sys.n, delta, T, dt_split);
    const TubeProfile tube = tube_radius_profile(
        sched.certificate, sys.sigma, sys.n, delta, T, dt_split, eps);
    for (int N : N_list) {
      const double dt = T / N;
      for (int k = 0; k <= N; ++k) {
        const double t = k * dt;
        row("ours", N, delta, t,
            projected_radius(tube.M_at(t), tube.radius_at(t), sys.P));
      }
      const DiscreteLinearModel m = discretize_di(dt);
      const TighteningProfile stlcd = stlcd_radii(m, delta, N);
      for (int k = 0; k <= N; ++k)
        row("stlcd", N, delta, stlcd.times[k], stlcd.obstacle_radii[k]);
      const Mat K =
          dlqr_gain(m, Mat::Identity(4, 4), 0.1 * Mat::Identity(2, 2));
      const TighteningProfile dprt = dprt_radii(m, K, delta, N);
      for (int k = 0; k <= N; ++k)
        row("dprt", N, delta, dprt.times[k], dprt.obstacle_radii[k]);
    }
  }
  return s;
}

Json pipeline_json(const PipelineOutput &out) {
  Json j;
  j["converged"] = out.converged;
  j["iterations"] = out.iterations;
  j["epsilon"] = out.epsilon;
  j["message"] = out.message;
  j["plan_feasible"] = out.plan.feasible;
  j["plan_cost"] = out.plan.cost;
  j["plan_robustness_support"] = out.plan.robustness_support;
  j["plan_robustness_dense"] = out.plan.robustness_dense;
  j["plan_defect_norm"] = out.plan.defect_norm;
  j["plan_iterations"] = out.plan.iterations;
  double max_erosion = 0.0;
  for (double r : out.erosion_radii) max_erosion = std::max(max_erosion, r);
  j["max_erosion"] = max_erosion;
  double max_radius = 0.0;
  for (double r : out.tube.radii) max_radius = std::max(max_radius, r);
  j["max_tube_radius"] = max_radius;
  return j;
}

Json mc_json(const McReport &rep) {
  Json j;
  j["rollouts"] = rep.n_rollouts;
  j["satisfied"] = rep.n_satisfied;
  j["satisfaction"] = rep.p_hat;
  j["ci95_lo"] = rep.ci_lo;
  j["ci95_hi"] = rep.ci_hi;
  j["tube_exits"] = rep.n_tube_exit;
  j["tube_exit_fraction"] =
      static_cast<double>(rep.n_tube_exit) / std::max(1, rep.n_rollouts);
  j["saturation_rate"] = rep.saturation_rate;
  return j;
}

Json run_benchmark(const ExperimentConfig &ec, const std::string &out_dir) {
  std::filesystem::create_directories(out_dir);
  Json sum;
  sum["benchmark"] = ec.name;
  sum["formula"] = ec.formula_text;
  sum["seed"] = ec.seed;

  const PipelineOutput out = run_pipeline(ec.pipeline);
  sum["pipeline"] = pipeline_json(out);
  if (!out.plan.nominal.times.empty())
    write_file(out_dir + "/trajectory.csv", trajectory_csv(out.plan.nominal));
  if (!out.tube.times.empty())
    write_file(out_dir + "/tube.csv", tube_csv(out, ec.pipeline.sys.P));

  Json methods = Json::object();
  if (out.converged) {
    const McReport rep =
        mc_validate(out, ec.pipeline.sys, ec.pipeline.formula, ec.pipeline.x0,
                    ec.pipeline.T, ec.n_rollouts, ec.sim_dt, ec.seed);
    methods["ours"] = method_entry(rep.n_satisfied, rep.n_rollouts);
    methods["ours"]["tube_exits"] = rep.n_tube_exit;
    write_file(out_dir + "/mc_report.json", mc_json(rep).dump(2) + "\n");
  }

  if (ec.run_baselines) {
    const int nb =
        ec.baseline_rollouts > 0 ? ec.baseline_rollouts : ec.n_rollouts;
    try {
      const NonRobustPlan np = non_robust_plan(ec.pipeline);
      std::vector<std::uint8_t> ok(nb, 0);
      std::atomic<int> next{0};
      auto work = [&]() {
        for (;;) {
          const int i = next.fetch_add(1);
          if (i >= nb) return;
          ok[i] = non_robust_rollout(np, ec.pipeline, ec.sim_dt,
                                     derive_seed(ec.seed + 1, i))
                      .satisfied
                      ? 1
                      : 0;
        }
      };
      std::vector<std::thread> pool;
      for (unsigned w = 0;
           w < std::max(1u, std::thread::hardware_concurrency()); ++w)
        pool.emplace_back(work);
      for (auto &th : pool) th.join();
      int n_ok = 0;
      for (auto v : ok) n_ok += v;
      methods["non_robust"] = method_entry(n_ok, nb);
    } catch (const std::exception &e) {
      methods["non_robust"] = Json{{"error", e.what()}};
    }

    const int ns = ec.shmpc_rollouts > 0 ? ec.shmpc_rollouts : 48;
    std::vector<std::uint8_t> ok(ns, 0);
    std::vector<int> fails(ns, 0);
    std::atomic<int> next{0};
    auto work = [&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= ns) return;
        const RolloutOutcome ro =
            shmpc_rollout(ec.pipeline, ec.sim_dt, derive_seed(ec.seed + 2, i));
        ok[i] = ro.satisfied ? 1 : 0;
        fails[i] = ro.replan_failures;
      }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 0;
         w < std::max(1u, std::thread::hardware_concurrency()); ++w)
      pool.emplace_back(work);
    for (auto &th : pool) th.join();
    int n_ok = 0, n_fail = 0;
    for (int i = 0; i < ns; ++i) {
      n_ok += ok[i];
      n_fail += fails[i];
    }
    methods["shmpc"] = method_entry(n_ok, ns, n_fail);
  }

  sum["methods"] = methods;
  write_file(out_dir + "/summary.json", sum.dump(2) + "\n");
  return sum;
}

} // namespace stlfmp
