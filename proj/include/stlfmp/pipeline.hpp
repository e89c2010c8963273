#ifndef STLFMP_PIPELINE_HPP
#define STLFMP_PIPELINE_HPP

#include "stlfmp/controllers.hpp"
#include "stlfmp/planner.hpp"
#include "stlfmp/prt.hpp"

namespace stlfmp {

enum class ControllerType { Tvlqr, TvccmTraj, TvccmGlobal };

struct PipelineConfig {
  SystemModel sys;
  FormulaPtr formula; // the original (uneroded) task
  Vec x0;
  double T = 0.0;
  int N = 0;
  double delta = 1e-3;
  double dt_split = 0.25;
  bool optimize_eps = true;
  double epsilon = 0.8; // used when optimize_eps is off
  ControllerType controller = ControllerType::Tvlqr;
  int max_iters = 10;
  bool time_invariant_erosion = false;

  // solver knobs
  Mat Q, R, Qf;        // TVLQR weights; empty means defaults
  TvccmOptions tvccm;
  Mat R_cost;          // empty means 0.1 I
  double rho_min = 1e-3;
  std::vector<double> betas = {5.0, 20.0, 80.0};

  // state region for the trajectory-independent branch
  Vec region_lo, region_hi;

  void validate() const;
};

struct PipelineIteration {
  std::vector<double> times;
  std::vector<double> planned;   // position-space erosion used for the plan
  std::vector<double> certified; // tube-induced erosion after synthesis
  double max_slack = 0.0;        // max_t (certified - planned)
};

struct PipelineOutput {
  PlanResult plan;
  GainSchedule schedule;
  TubeProfile tube;
  std::vector<double> erosion_times;
  std::vector<double> erosion_radii; // the erosion the final plan used
  std::vector<PipelineIteration> trace;
  bool converged = false;
  int iterations = 0;
  double epsilon = 0.0;
  std::string message;
};

PipelineOutput run_pipeline(const PipelineConfig &cfg);

} // namespace stlfmp

#endif
