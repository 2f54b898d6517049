#include <sstream>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dropoutlab/cli.hpp"
#include "dropoutlab/dataset.hpp"
#include "dropoutlab/deepnet.hpp"
#include "dropoutlab/error.hpp"
#include "dropoutlab/evaluate.hpp"
#include "dropoutlab/features.hpp"
#include "dropoutlab/linear.hpp"
#include "dropoutlab/paradigms.hpp"

namespace py = pybind11;
using namespace dropoutlab;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D array");
  Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.data().begin());
  return m;
}

Array to_array(const Matrix& m) {
  Array a({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), a.mutable_data());
  return a;
}

std::vector<int> to_labels(const py::array_t<int, py::array::c_style | py::array::forcecast>& y) {
  return {y.data(), y.data() + y.size()};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "MOOC dropout prediction toolkit";

  py::register_exception<Error>(m, "DropoutlabError", PyExc_RuntimeError);

  py::class_<CourseData>(m, "Course")
      .def_property_readonly("course_id", [](const CourseData& c) { return c.meta.course_id; })
      .def_property_readonly("field", [](const CourseData& c) { return std::string(to_string(c.meta.field)); })
      .def_property_readonly("launch_date", [](const CourseData& c) { return c.meta.launch_date.iso(); })
      .def_property_readonly("t100_date", [](const CourseData& c) { return c.meta.t100_date.iso(); })
      .def_property_readonly("end_date", [](const CourseData& c) { return c.meta.end_date.iso(); })
      .def_property_readonly("student_ids",
                             [](const CourseData& c) {
                               std::vector<std::string> ids;
                               for (const auto& s : c.students) ids.push_back(s.student_id);
                               return ids;
                             })
      .def_property_readonly("n_activity_days", [](const CourseData& c) { return c.activity.size(); })
      .def("labels", [](const CourseData& c) { return derive_labels(c).labels; })
      .def("write", [](const CourseData& c, const std::filesystem::path& dir) { write_course_dir(c, dir); })
      .def("__len__", [](const CourseData& c) { return c.students.size(); })
      .def("__repr__", [](const CourseData& c) {
        return "<Course " + c.meta.course_id + " with " + std::to_string(c.students.size()) + " students>";
      });

  m.def("load_course", &load_course_dir, py::arg("directory"));
  m.def(
      "synthesize_corpus",
      [](std::uint64_t seed, std::optional<std::filesystem::path> config) {
        return synthesize_corpus(config ? load_corpus_config(*config) : default_corpus_config(), seed);
      },
      py::arg("seed") = kDefaultSeed, py::arg("config") = py::none());

  m.def("feature_names", [] { return FeatureSchema::standard().names(); });
  m.def(
      "build_matrix",
      [](const CourseData& c, int week, const std::string& norm) {
        FeatureMatrix x = build_matrix(c, week_date(c.meta, WeekIndex{week}));
        if (norm == "zscore") x = apply_zscore(x, fit_zscore(x));
        else if (norm == "percentile") x = apply_percentile(x, fit_percentile(x));
        else if (norm != "none") throw py::value_error("norm must be none, zscore or percentile");
        return py::make_tuple(x.student_ids, to_array(x.values));
      },
      py::arg("course"), py::arg("week") = 0, py::arg("norm") = "none",
      "Feature matrix of a course at a week relative to T100%: (student_ids, array).");

  m.def(
      "auc",
      [](const std::vector<double>& scores, const std::vector<int>& labels) { return auc(scores, labels); },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "sem", [](const std::vector<double>& v) { return sem(v); }, py::arg("values"));

  m.def(
      "score",
      [](const std::vector<CourseData>& corpus, const std::string& paradigm, const std::string& target, int week,
         double reg_c) {
        const ParadigmSpec spec = make_spec(corpus, parse_paradigm(paradigm), target);
        RunOptions opts;
        opts.reg_c = reg_c;
        const ScoredStudents s = run_paradigm(corpus, spec, WeekIndex{week}, opts);
        return py::make_tuple(s.student_ids, s.scores);
      },
      py::arg("corpus"), py::arg("paradigm"), py::arg("target"), py::arg("week") = 0, py::arg("reg_c") = 1.0,
      "Scores a target course under one paradigm: (student_ids, scores).");

  m.def(
      "run_experiment",
      [](const std::vector<CourseData>& corpus, const std::vector<std::string>& paradigms, double reg_c, int jobs) {
        std::vector<ParadigmKind> kinds;
        for (const auto& p : paradigms) kinds.push_back(parse_paradigm(p));
        RunOptions opts;
        opts.reg_c = reg_c;
        opts.jobs = jobs;
        py::list rows;
        const EvalReport r = [&] {
          py::gil_scoped_release release;
          return run_experiment(corpus, kinds, opts);
        }();
        for (const auto& row : r.rows) {
          py::dict d;
          d["paradigm"] = row.paradigm;
          d["course_id"] = row.course_id;
          d["week"] = row.week;
          d["auc"] = row.auc;
          d["n_students"] = row.n_students;
          d["n_positives"] = row.n_positives;
          rows.append(d);
        }
        return rows;
      },
      py::arg("corpus"), py::arg("paradigms"), py::arg("reg_c") = 1.0, py::arg("jobs") = 1);

  py::class_<MlpModel>(m, "Mlp")
      .def(py::init([](std::size_t input_dim, const std::vector<std::size_t>& widths, std::uint64_t seed) {
             return widths.empty() ? init_softmax_regression(input_dim, seed) : init_mlp(input_dim, widths, seed);
           }),
           py::arg("input_dim"), py::arg("widths"), py::arg("seed") = 0)
      .def_property_readonly("hidden_widths", &MlpModel::hidden_widths)
      .def("forward", [](const MlpModel& net, const Array& x) { return to_array(forward(net, to_matrix(x))); })
      .def(
          "train",
          [](const MlpModel& net, const Array& x, const py::array_t<int, py::array::c_style | py::array::forcecast>& y,
             double lr, int epochs, std::size_t minibatch, double anneal, std::uint64_t seed) {
            SgdConfig cfg;
            cfg.learning_rate = lr;
            cfg.epochs = epochs;
            cfg.minibatch_size = minibatch;
            cfg.anneal_factor = anneal;
            cfg.seed = seed;
            return train_sgd(net, to_matrix(x), to_labels(y), cfg);
          },
          py::arg("x"), py::arg("y"), py::arg("lr") = 0.1, py::arg("epochs") = 20, py::arg("minibatch") = 10,
          py::arg("anneal") = 1e-3, py::arg("seed") = 0)
      .def(
          "wider",
          [](const MlpModel& net, std::size_t layer, std::size_t width, std::uint64_t seed) {
            return net2wider(net, layer, width, seed);
          },
          py::arg("layer"), py::arg("width"), py::arg("seed") = 0)
      .def(
          "deeper", [](const MlpModel& net, int after) { return net2deeper(net, after); }, py::arg("after"))
      .def("to_json", &mlp_to_json)
      .def_static("from_json", &mlp_from_json);

  m.def(
      "cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "dropoutlab");
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in-process: (exit_code, stdout, stderr).");
}
