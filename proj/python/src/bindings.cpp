#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <iostream>

#include "neurphy/checkpoint.hpp"
#include "neurphy/cli.hpp"
#include "neurphy/dataset_io.hpp"
#include "neurphy/eval.hpp"

namespace py = pybind11;
using namespace neurphy;

namespace {

RunConfig make_config(const std::map<std::string, std::string>& values) {
  RunConfig cfg;
  for (const auto& [k, v] : values) set_config_value(cfg, k, v);
  return cfg;
}

std::map<std::string, std::string> config_dict(const RunConfig& cfg) {
  std::map<std::string, std::string> out;
  for (const auto& key : config_keys()) out[key.name] = get_config_value(cfg, key.name);
  return out;
}

py::array_t<double> observations_array(const physics::Task& t) {
  py::array_t<double> a({t.length(), std::size_t{2}});
  auto m = a.mutable_unchecked<2>();
  for (std::size_t i = 0; i < t.length(); ++i) {
    m(i, 0) = t.observations[i][0];
    m(i, 1) = t.observations[i][1];
  }
  return a;
}

physics::ContextSet contexts_for(const physics::Task& task, std::size_t n_c, const std::string& mode, std::uint64_t seed) {
  if (mode == "random") return physics::select_contexts(task, n_c, physics::ContextMode::kTrainRandom, seed);
  if (mode == "prefix") return physics::select_contexts(task, n_c, physics::ContextMode::kMetatestPrefix, seed);
  throw Error(ErrorCode::kConfig, "context mode must be 'random' or 'prefix', got '" + mode + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Exact physics simulators and the latent state-space model";
  m.attr("__version__") = cli::tool_version();

  static py::exception<Error> error(m, "NeurPhyError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, e.what());
    }
  });

  py::class_<physics::Task>(m, "Task")
      .def_readonly("task_id", &physics::Task::task_id)
      .def_property_readonly("system", [](const physics::Task& t) { return std::string(physics::to_string(t.system)); })
      .def_property_readonly("globals",
                             [](const physics::Task& t) {
                               py::dict d;
                               for (const auto& [k, v] : t.globals) d[py::str(k)] = v;
                               return d;
                             })
      .def_property_readonly("observations", &observations_array)
      .def_readonly("states", &physics::Task::states)
      .def_property_readonly("state_names", &physics::Task::state_names)
      .def_readonly("dt", &physics::Task::dt)
      .def("__len__", &physics::Task::length)
      .def("__eq__", [](const physics::Task& a, const physics::Task& b) { return a == b; })
      .def("__repr__", [](const physics::Task& t) {
        return "<Task " + std::to_string(t.task_id) + " " + physics::to_string(t.system) + " T=" +
               std::to_string(t.length()) + ">";
      });

  m.def("config_keys", [] {
    std::vector<std::string> names;
    for (const auto& k : config_keys()) names.push_back(k.name);
    return names;
  });
  m.def("default_config", [] { return config_dict(RunConfig{}); }, "Every configuration key with its default value.");

  m.def(
      "generate",
      [](const std::map<std::string, std::string>& config) {
        return physics::generate_task_grid(make_config(config).grid).tasks;
      },
      py::arg("config") = std::map<std::string, std::string>{},
      "Task grid for the given configuration keys (text values, as in config files).");
  m.def(
      "pendulum_step",
      [](double theta, double omega, double l, double m_, double g, double mu, double dt) {
        const auto s = physics::pendulum_step({theta, omega}, {l, m_, g, mu, 0.0, 0.0, dt});
        return std::make_pair(s.theta, s.omega);
      },
      py::arg("theta"), py::arg("omega"), py::arg("l") = 2.0, py::arg("m") = 1.0, py::arg("g") = 10.0,
      py::arg("mu") = 0.5, py::arg("dt") = 0.1);
  m.def(
      "orbit_params",
      [](double r0, double v0r, double v0theta, double GM) {
        const auto p = physics::orbit_params_from_init({r0, v0r, v0theta, 0.0, GM});
        return std::map<std::string, double>{{"r_n", p.r_n}, {"e", p.e}, {"theta_n", p.theta_n}, {"h", p.h}};
      },
      py::arg("r0"), py::arg("v0r"), py::arg("v0theta"), py::arg("GM") = 1.0);

  m.def("save_tasks", &save_tasks_jsonl, py::arg("path"), py::arg("tasks"));
  m.def("load_tasks", &load_tasks_jsonl, py::arg("path"));

  py::class_<NeurPhyModel>(m, "Model")
      .def(py::init([](const std::map<std::string, std::string>& config) { return NeurPhyModel(make_config(config).model); }),
           py::arg("config") = std::map<std::string, std::string>{})
      .def_property_readonly("parameter_count", [](const NeurPhyModel& m_) { return m_.parameters().scalar_count(); })
      .def(
          "global_representation",
          [](const NeurPhyModel& model, const physics::Task& task, std::size_t n_c, const std::string& mode,
             std::uint64_t seed) { return global_representation(model, contexts_for(task, n_c, mode, seed)); },
          py::arg("task"), py::arg("n_c") = 20, py::arg("mode") = "random", py::arg("seed") = 0)
      .def(
          "predict",
          [](const NeurPhyModel& model, const physics::Task& task, std::size_t start, std::size_t horizon,
             std::size_t n_c, const std::string& mode, std::uint64_t seed) {
            const auto pred = predict_observations(model, task, contexts_for(task, n_c, mode, seed), start, horizon);
            py::array_t<double> a({pred.size(), std::size_t{2}});
            auto v = a.mutable_unchecked<2>();
            for (std::size_t i = 0; i < pred.size(); ++i) v(i, 0) = pred[i][0], v(i, 1) = pred[i][1];
            return a;
          },
          py::arg("task"), py::arg("start"), py::arg("horizon"), py::arg("n_c") = 20, py::arg("mode") = "prefix",
          py::arg("seed") = 0, "Reconstruction of frame `start` followed by `horizon` predicted frames, shape [horizon+1, 2].");

  m.def(
      "train",
      [](const std::vector<physics::Task>& tasks, const std::map<std::string, std::string>& config) {
        const RunConfig cfg = make_config(config);
        TrainResult result = [&] {
          py::gil_scoped_release release;
          return train(tasks, cfg.model, cfg.train);
        }();
        std::vector<std::map<std::string, double>> history;
        for (const auto& h : result.history) {
          std::map<std::string, double> row{{"recon", h.recon}, {"total", h.total}};
          for (std::size_t d = 0; d < h.kl.size(); ++d) row["kl" + std::to_string(d + 1)] = h.kl[d];
          history.push_back(std::move(row));
        }
        return std::make_pair(std::move(result.model), history);
      },
      py::arg("tasks"), py::arg("config") = std::map<std::string, std::string>{},
      "Trains a fresh model on `tasks`; returns (model, per-epoch losses).");

  m.def(
      "save_checkpoint",
      [](const NeurPhyModel& model, const std::map<std::string, std::string>& config, const std::filesystem::path& path) {
        checkpoint_save(model, make_config(config), path);
      },
      py::arg("model"), py::arg("config"), py::arg("path"));
  m.def(
      "load_checkpoint",
      [](const std::filesystem::path& path) {
        Checkpoint c = checkpoint_load(path);
        return std::make_pair(std::move(c.model), config_dict(c.config));
      },
      py::arg("path"), "Returns (model, config dict).");

  m.def(
      "r2_fit",
      [](const std::vector<std::vector<double>>& features, const std::vector<double>& target, int degree) {
        return eval::fit_poly_r2(features, target, degree, "target").r2;
      },
      py::arg("features"), py::arg("target"), py::arg("degree") = 2);

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "neurphy");
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        py::gil_scoped_release release;
        return cli::main(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"), "Runs the command-line tool in-process and returns its exit code.");
}
