#include <cstdio>
#include <filesystem>
#include <optional>

#include "CLI11.hpp"
#include "stlfmp/experiments.hpp"

namespace {

using namespace stlfmp;

constexpr int kExitOk = 0;
constexpr int kExitInfeasible = 2;
constexpr int kExitValidationFailed = 3;

struct CommonOpts {
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<int> rollouts;
};

void add_common(CLI::App *cmd, CommonOpts &o) {
  cmd->add_option("--config", o.config, "experiment config file")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--seed", o.seed, "base RNG seed override");
  cmd->add_option("--rollouts", o.rollouts, "Monte Carlo rollout override");
}

ExperimentConfig load(const CommonOpts &o) {
  ExperimentConfig ec = load_experiment_file(o.config);
  if (o.seed) ec.seed = *o.seed;
  if (o.rollouts) ec.n_rollouts = *o.rollouts;
  std::filesystem::create_directories(o.out);
  return ec;
}

PlanProblem plan_problem(const ExperimentConfig &ec) {
  PlanProblem p;
  p.sys = ec.pipeline.sys;
  p.formula = to_nnf(ec.pipeline.formula);
  p.T = ec.pipeline.T;
  p.N = ec.pipeline.N;
  p.R_cost = ec.pipeline.R_cost.size() > 0
                 ? ec.pipeline.R_cost
                 : Mat(0.1 * Mat::Identity(p.sys.p, p.sys.p));
  p.x0 = ec.pipeline.x0;
  p.rho_min = ec.pipeline.rho_min;
  p.betas = ec.pipeline.betas;
  return p;
}

GainSchedule synthesize(const ExperimentConfig &ec,
                        const Trajectory &nominal) {
  const auto &pc = ec.pipeline;
  const int n = pc.sys.n, p = pc.sys.p;
  if (pc.controller == ControllerType::Tvlqr) {
    const Mat Q = pc.Q.size() > 0 ? pc.Q : Mat(Mat::Identity(n, n));
    const Mat R = pc.R.size() > 0 ? pc.R : Mat(0.1 * Mat::Identity(p, p));
    const Mat Qf = pc.Qf.size() > 0 ? pc.Qf : Mat(10.0 * Mat::Identity(n, n));
    return tvlqr_synthesize(pc.sys, nominal, Q, R, Qf);
  }
  if (pc.controller == ControllerType::TvccmGlobal)
    return tvccm_synthesize_global(pc.sys, pc.region_lo, pc.region_hi,
                                   pc.tvccm);
  return tvccm_synthesize(pc.sys, nominal, pc.tvccm);
}

int cmd_plan(const CommonOpts &o) {
  const ExperimentConfig ec = load(o);
  const PlanResult res = solve_stlto(plan_problem(ec));
  Json sum;
  sum["benchmark"] = ec.name;
  sum["feasible"] = res.feasible;
  sum["message"] = res.message;
  sum["cost"] = res.cost;
  sum["robustness_support"] = res.robustness_support;
  sum["robustness_dense"] = res.robustness_dense;
  sum["defect_norm"] = res.defect_norm;
  sum["iterations"] = res.iterations;
  write_file(o.out + "/summary.json", sum.dump(2) + "\n");
  write_file(o.out + "/trajectory.csv", trajectory_csv(res.nominal));
  std::printf("plan: %s\n", res.message.c_str());
  return res.feasible ? kExitOk : kExitInfeasible;
}

int cmd_synthesize(const CommonOpts &o) {
  const ExperimentConfig ec = load(o);
  const PlanResult res = solve_stlto(plan_problem(ec));
  if (!res.feasible) {
    std::printf("synthesize: planner failed: %s\n", res.message.c_str());
    return kExitInfeasible;
  }
  const GainSchedule sched = synthesize(ec, res.nominal);
  Json sum;
  sum["benchmark"] = ec.name;
  sum["feasible"] = true;
  double c_max = -std::numeric_limits<double>::infinity();
  for (double c : sched.certificate.c) c_max = std::max(c_max, c);
  sum["rate_max"] = c_max;
  sum["metric_norm_bound"] = sched.certificate.metric_norm_bound();
  sum["metric_lower"] = sched.certificate.metric_lower();
  write_file(o.out + "/summary.json", sum.dump(2) + "\n");
  write_file(o.out + "/trajectory.csv", trajectory_csv(res.nominal));
  std::printf("synthesize: rate_max=%g\n", c_max);
  return kExitOk;
}

int cmd_tube(const CommonOpts &o) {
  const ExperimentConfig ec = load(o);
  const PlanResult res = solve_stlto(plan_problem(ec));
  if (!res.feasible) {
    std::printf("tube: planner failed: %s\n", res.message.c_str());
    return kExitInfeasible;
  }
  const GainSchedule sched = synthesize(ec, res.nominal);
  const auto &pc = ec.pipeline;
  const double eps =
      pc.optimize_eps
          ? optimize_epsilon(pc.sys.n, pc.delta, pc.T, pc.dt_split)
          : pc.epsilon;
  PipelineOutput out;
  out.plan = res;
  out.schedule = sched;
  out.tube = tube_radius_profile(sched.certificate, pc.sys.sigma, pc.sys.n,
                                 pc.delta, pc.T, pc.dt_split, eps);
  out.epsilon = eps;
  write_file(o.out + "/tube.csv", tube_csv(out, pc.sys.P));
  Json sum;
  sum["benchmark"] = ec.name;
  sum["epsilon"] = eps;
  double max_radius = 0.0;
  for (double r : out.tube.radii) max_radius = std::max(max_radius, r);
  sum["max_tube_radius"] = max_radius;
  write_file(o.out + "/summary.json", sum.dump(2) + "\n");
  std::printf("tube: epsilon=%g max_radius=%g\n", eps, max_radius);
  return kExitOk;
}

int cmd_pipeline(const CommonOpts &o) {
  const ExperimentConfig ec = load(o);
  const PipelineOutput out = run_pipeline(ec.pipeline);
  write_file(o.out + "/summary.json", pipeline_json(out).dump(2) + "\n");
  if (!out.plan.nominal.times.empty())
    write_file(o.out + "/trajectory.csv", trajectory_csv(out.plan.nominal));
  if (!out.tube.times.empty())
    write_file(o.out + "/tube.csv", tube_csv(out, ec.pipeline.sys.P));
  std::printf("pipeline: %s\n", out.message.c_str());
  return out.converged ? kExitOk : kExitInfeasible;
}

int cmd_mc(const CommonOpts &o) {
  const ExperimentConfig ec = load(o);
  const PipelineOutput out = run_pipeline(ec.pipeline);
  write_file(o.out + "/summary.json", pipeline_json(out).dump(2) + "\n");
  if (!out.converged) {
    std::printf("mc: pipeline did not converge: %s\n", out.message.c_str());
    return kExitInfeasible;
  }
  const McReport rep =
      mc_validate(out, ec.pipeline.sys, ec.pipeline.formula, ec.pipeline.x0,
                  ec.pipeline.T, ec.n_rollouts, ec.sim_dt, ec.seed);
  write_file(o.out + "/mc_report.json", mc_json(rep).dump(2) + "\n");
  const bool ok = rep.p_hat >= 1.0 - ec.pipeline.delta;
  std::printf("mc: %d/%d satisfied (%.4f), tube exits %d, %.1fs\n",
              rep.n_satisfied, rep.n_rollouts, rep.p_hat, rep.n_tube_exit,
              rep.wall_time_s);
  return ok ? kExitOk : kExitValidationFailed;
}

int cmd_compare_erosion(const CommonOpts &o) {
  const Config cfg = Config::parse_file(o.config);
  std::vector<int> N_list = {25, 50, 100};
  if (cfg.has("compare.N")) {
    N_list.clear();
    for (double v : cfg.get_doubles("compare.N"))
      N_list.push_back(static_cast<int>(v));
  }
  std::vector<double> delta_list = {1e-2, 1e-3, 1e-4};
  if (cfg.has("compare.delta")) delta_list = cfg.get_doubles("compare.delta");
  std::filesystem::create_directories(o.out);
  write_file(o.out + "/erosion_compare.csv",
             compare_erosion_csv(N_list, delta_list));
  std::printf("compare-erosion: wrote %s/erosion_compare.csv\n",
              o.out.c_str());
  return kExitOk;
}

int cmd_bench(const CommonOpts &o) {
  const ExperimentConfig ec = load(o);
  const Json sum = run_benchmark(ec, o.out);
  if (!sum["pipeline"]["converged"].get<bool>()) {
    std::printf("bench: pipeline did not converge\n");
    return kExitInfeasible;
  }
  const double frac = sum["methods"]["ours"]["fraction"].get<double>();
  std::printf("bench: ours satisfaction %.4f\n", frac);
  return frac >= 1.0 - ec.pipeline.delta ? kExitOk : kExitValidationFailed;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Feedback motion planning under STL chance constraints"};
  app.require_subcommand(1);

  CommonOpts o;
  int (*handler)(const CommonOpts &) = nullptr;
  for (auto [name, desc, fn] :
       {std::tuple{"plan", "deterministic STL trajectory optimization",
                   &cmd_plan},
        std::tuple{"synthesize", "plan + tracking controller synthesis",
                   &cmd_synthesize},
        std::tuple{"tube", "plan + controller + reachable tube radii",
                   &cmd_tube},
        std::tuple{"pipeline", "full erosion / certification loop",
                   &cmd_pipeline},
        std::tuple{"mc", "pipeline + Monte Carlo validation", &cmd_mc},
        std::tuple{"compare-erosion", "erosion radius comparison dataset",
                   &cmd_compare_erosion},
        std::tuple{"bench", "full benchmark with baselines", &cmd_bench}}) {
    CLI::App *cmd = app.add_subcommand(name, desc);
    add_common(cmd, o);
    cmd->callback([&handler, fn] { handler = fn; });
  }

  CLI11_PARSE(app, argc, argv);
  try {
    return handler(o);
  } catch (const InfeasibleErosionError &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInfeasible;
  } catch (const std::exception &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
