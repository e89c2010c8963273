#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "stlfmp/config.hpp"
#include "stlfmp/mc.hpp"
#include "stlfmp/numerics.hpp"
#include "stlfmp/pipeline.hpp"
#include "stlfmp/stl.hpp"

namespace py = pybind11;
using namespace stlfmp;

namespace {

// Thin handle so the shared_ptr<const Formula> AST can cross the boundary
// without exposing the node layout.
struct PyFormula {
  FormulaPtr f;
};

Predicate predicate_from_dict(const py::dict &d) {
  Predicate p;
  const std::string kind = py::cast<std::string>(d["kind"]);
  auto vec = [&](const char *key) {
    return py::cast<Vec>(py::array_t<double>(d[key]));
  };
  if (kind == "disk_inside" || kind == "disk_outside") {
    p.kind = kind == "disk_inside" ? Predicate::Kind::DiskInside
                                   : Predicate::Kind::DiskOutside;
    p.center = vec("center");
    p.radius = py::cast<double>(d["radius"]);
  } else if (kind == "box_inside" || kind == "box_outside") {
    p.kind = kind == "box_inside" ? Predicate::Kind::BoxInside
                                  : Predicate::Kind::BoxOutside;
    p.lower = vec("lower");
    p.upper = vec("upper");
  } else if (kind == "halfspace") {
    p.kind = Predicate::Kind::Halfspace;
    p.normal = vec("normal");
    p.offset = py::cast<double>(d["offset"]);
  } else {
    throw std::invalid_argument("unknown predicate kind '" + kind + "'");
  }
  return p;
}

SampledSignal signal_from_arrays(const std::vector<double> &times,
                                 const Mat &states) {
  if (static_cast<int>(times.size()) != states.rows())
    throw std::invalid_argument("times and states row count must match");
  SampledSignal sig;
  sig.times = times;
  for (int i = 0; i < states.rows(); ++i)
    sig.states.push_back(states.row(i).transpose());
  sig.validate();
  return sig;
}

py::dict summary_dict(const PipelineOutput &out) {
  py::dict d;
  d["converged"] = out.converged;
  d["iterations"] = out.iterations;
  d["message"] = out.message;
  d["epsilon"] = out.epsilon;
  d["plan_feasible"] = out.plan.feasible;
  d["plan_robustness_support"] = out.plan.robustness_support;
  d["plan_robustness_dense"] = out.plan.robustness_dense;
  double er = 0.0;
  for (double r : out.erosion_radii) er = std::max(er, r);
  d["max_erosion"] = er;
  return d;
}

} // namespace

PYBIND11_MODULE(_stlfmp, m) {
  m.doc() = "feedback motion planning under STL chance constraints";

  py::class_<PyFormula>(m, "Formula");

  m.def("chi2_quantile", &chi2_quantile, py::arg("dof"), py::arg("p"));
  m.def("optimize_epsilon", &optimize_epsilon, py::arg("n"), py::arg("delta"),
        py::arg("T"), py::arg("dt_split"));

  m.def(
      "parse_formula",
      [](const std::string &text, const py::dict &preds) {
        std::map<std::string, Predicate> bindings;
        for (auto item : preds)
          bindings[py::cast<std::string>(item.first)] =
              predicate_from_dict(py::cast<py::dict>(item.second));
        return PyFormula{parse_formula(text, bindings)};
      },
      py::arg("text"), py::arg("predicates"));
  m.def("horizon", [](const PyFormula &f) { return horizon(f.f); });
  m.def(
      "robustness",
      [](const PyFormula &f, const std::vector<double> &times,
         const Mat &states) {
        return robustness(f.f, signal_from_arrays(times, states), 0);
      },
      py::arg("formula"), py::arg("times"), py::arg("states"));
  m.def(
      "eval_boolean",
      [](const PyFormula &f, const std::vector<double> &times,
         const Mat &states) {
        return eval_boolean(f.f, signal_from_arrays(times, states), 0);
      },
      py::arg("formula"), py::arg("times"), py::arg("states"));

  m.def(
      "run_pipeline",
      [](const std::string &config_path) {
        const ExperimentConfig ec = load_experiment_file(config_path);
        return summary_dict(run_pipeline(ec.pipeline));
      },
      py::arg("config_path"));

  m.def(
      "run_pipeline_mc",
      [](const std::string &config_path, int rollouts, std::uint64_t seed) {
        const ExperimentConfig ec = load_experiment_file(config_path);
        const PipelineOutput out = run_pipeline(ec.pipeline);
        py::dict d = summary_dict(out);
        if (out.converged) {
          const McReport rep = mc_validate(
              out, ec.pipeline.sys, ec.pipeline.formula, ec.pipeline.x0,
              ec.pipeline.T, rollouts > 0 ? rollouts : ec.n_rollouts,
              ec.sim_dt, seed);
          d["mc_rollouts"] = rep.n_rollouts;
          d["mc_satisfied"] = rep.n_satisfied;
          d["mc_tube_exits"] = rep.n_tube_exit;
          d["mc_satisfaction"] = rep.p_hat;
        }
        return d;
      },
      py::arg("config_path"), py::arg("rollouts") = 0, py::arg("seed") = 0);
}
