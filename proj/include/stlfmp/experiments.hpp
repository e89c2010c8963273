#ifndef STLFMP_EXPERIMENTS_HPP
#define STLFMP_EXPERIMENTS_HPP

#include <string>

#include "json.hpp"
#include "stlfmp/baselines.hpp"
#include "stlfmp/config.hpp"
#include "stlfmp/mc.hpp"

namespace stlfmp {

using Json = nlohmann::ordered_json;

std::string trajectory_csv(const Trajectory &traj);

/// Per-support-time tube data: metric radius, projected position radius,
/// and the erosion the final plan used.
std::string tube_csv(const PipelineOutput &out, const Mat &P);

/// Tidy dataset (scheme, N, delta, t, radius) comparing our continuous-time
/// erosion against the discrete-time tightening baselines on the planar
/// double integrator over an 8 s horizon.
std::string compare_erosion_csv(const std::vector<int> &N_list,
                                const std::vector<double> &delta_list);

Json pipeline_json(const PipelineOutput &out);
Json mc_json(const McReport &rep);

/// Full benchmark run: pipeline, Monte Carlo validation, and (when enabled)
/// the non-robust and shrinking-horizon baselines. Writes summary.json,
/// trajectory.csv, tube.csv and mc_report.json into out_dir and returns the
/// summary.
Json run_benchmark(const ExperimentConfig &ec, const std::string &out_dir);

void write_file(const std::string &path, const std::string &content);

} // namespace stlfmp

#endif
