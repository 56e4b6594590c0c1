#include "mmkd/config.hpp"
#include "mmkd/corpus.hpp"
#include "mmkd/errors.hpp"
#include "mmkd/eval.hpp"
#include "mmkd/objectives.hpp"
#include "mmkd/optim.hpp"
#include "mmkd/pipeline.hpp"
#include "mmkd/tokenization.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace mmkd;

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

ConfigOverrides to_overrides(const std::map<std::string, std::string>& m) {
  return {m.begin(), m.end()};
}

py::dict row_dict(const EvalRow& r) {
  py::dict d;
  d["model"] = r.model;
  d["lang"] = r.lang.code();
  d["other"] = r.other.code();
  d["n"] = r.n;
  d["p_at_1_forward"] = r.p_at_1_forward;
  d["p_at_1_backward"] = r.p_at_1_backward;
  d["intra"] = r.stats.intra;
  d["inter"] = r.stats.inter;
  d["ratio"] = r.stats.ratio;
  return d;
}

py::dict step_dict(const StepRecord& r) {
  py::dict d;
  d["step"] = r.step;
  d["tlm"] = r.loss.tlm;
  d["xwcl"] = r.loss.xwcl;
  d["senta"] = r.loss.senta;
  d["struca"] = r.loss.struca;
  d["total"] = r.loss.total;
  d["lr"] = r.lr;
  return d;
}

EmbeddingSet make_set(const RowMatrix& m, const std::vector<std::size_t>& groups, const std::vector<std::string>& langs) {
  if (groups.size() != static_cast<std::size_t>(m.rows()) || langs.size() != groups.size()) {
    throw ConfigError("groups and langs need one entry per row");
  }
  EmbeddingSet s;
  s.matrix = m;
  for (std::size_t i = 0; i < groups.size(); ++i) s.labels.push_back({groups[i], LanguageId(langs[i])});
  return s;
}

EmbeddingSet aligned_set(const RowMatrix& m, const char* lang) {
  std::vector<std::size_t> groups(static_cast<std::size_t>(m.rows()));
  for (std::size_t i = 0; i < groups.size(); ++i) groups[i] = i;
  return make_set(m, groups, std::vector<std::string>(groups.size(), lang));
}

}  // namespace

PYBIND11_MODULE(_mmkd, m) {
  m.doc() = "Cross-lingual teacher-student distillation: pipeline commands, losses and metrics.";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<RunConfig>(m, "RunConfig")
      .def_property_readonly("seed", [](const RunConfig& c) { return c.seed; })
      .def_property_readonly("out_dir", [](const RunConfig& c) { return c.out_dir; })
      .def("to_ini", &to_ini)
      .def("__eq__", [](const RunConfig& a, const RunConfig& b) { return a == b; });

  m.def(
      "load_config",
      [](std::optional<std::filesystem::path> path, const std::map<std::string, std::string>& overrides) {
        return load_run_config(path, to_overrides(overrides));
      },
      py::arg("path") = py::none(), py::arg("overrides") = std::map<std::string, std::string>{},
      "Reads an INI config (or the defaults) and applies section.key overrides.");
  m.def(
      "parse_config",
      [](const std::string& text, const std::map<std::string, std::string>& overrides) {
        return parse_run_config(text, to_overrides(overrides));
      },
      py::arg("text"), py::arg("overrides") = std::map<std::string, std::string>{});

  m.def("prepare", [](const RunConfig& cfg) {
    py::list rows;
    for (const auto& r : cmd_prepare(cfg)) {
      py::dict d;
      d["lang"] = r.lang.code();
      d["raw"] = r.raw;
      d["filtered"] = r.filtered;
      d["pruned"] = r.pruned;
      d["train"] = r.train;
      d["heldout"] = r.heldout;
      rows.append(d);
    }
    return rows;
  });

  m.def("pretrain_teacher", [](const RunConfig& cfg) {
    PretrainSummary s;
    {
      py::gil_scoped_release release;
      s = cmd_pretrain_teacher(cfg);
    }
    py::dict d;
    d["steps"] = s.steps;
    d["mlm_loss_before"] = s.initial_loss;
    d["mlm_loss_after"] = s.final_loss;
    return d;
  });

  m.def(
      "train",
      [](const RunConfig& cfg, const std::vector<std::string>& disable, bool resume) {
        TrainOptions opts;
        for (const auto& d : disable) opts.disable.push_back(parse_objective(d));
        opts.resume = resume;
        TrainSummary s;
        {
          py::gil_scoped_release release;
          s = cmd_train(cfg, opts);
        }
        py::list out;
        for (const auto& r : s.history) out.append(step_dict(r));
        return out;
      },
      py::arg("config"), py::arg("disable") = std::vector<std::string>{}, py::arg("resume") = false,
      "Distils the student and returns the per-step loss history.");

  m.def(
      "evaluate",
      [](const RunConfig& cfg, const std::string& model, bool baseline, std::optional<std::filesystem::path> checkpoint) {
        EvalOptions opts;
        if (model == "teacher") {
          opts.model = EvalModel::teacher;
        } else if (model != "student") {
          throw ConfigError("model must be 'student' or 'teacher'");
        }
        opts.baseline = baseline;
        opts.checkpoint = std::move(checkpoint);
        const auto report = cmd_eval(cfg, opts);
        py::dict d;
        py::list langs, cross;
        for (const auto& r : report.languages) langs.append(row_dict(r));
        for (const auto& r : report.cross) cross.append(row_dict(r));
        d["languages"] = langs;
        d["cross"] = cross;
        return d;
      },
      py::arg("config"), py::arg("model") = "student", py::arg("baseline") = false,
      py::arg("checkpoint") = py::none());

  m.def(
      "viz",
      [](const RunConfig& cfg, std::size_t n) {
        const auto set = cmd_viz(cfg, n);
        std::vector<std::size_t> groups;
        std::vector<std::string> langs;
        for (const auto& l : set.labels) {
          groups.push_back(l.group);
          langs.push_back(l.lang.code());
        }
        return py::make_tuple(RowMatrix(set.matrix), groups, langs);
      },
      py::arg("config"), py::arg("sentences"));

  m.def(
      "generate_synthetic",
      [](const std::string& lang, std::size_t pair_count, std::size_t vocab_size, std::uint64_t source_seed,
         std::uint64_t bijection_seed) {
        SyntheticConfig sc;
        sc.lang = LanguageId(lang);
        sc.pair_count = pair_count;
        sc.vocab_size = vocab_size;
        sc.source_seed = source_seed;
        sc.bijection_seed = bijection_seed;
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& p : generate_synthetic_parallel(sc)) out.emplace_back(p.source, p.target);
        return out;
      },
      py::arg("lang"), py::arg("pair_count"), py::arg("vocab_size") = 300, py::arg("source_seed") = 1,
      py::arg("bijection_seed") = 7);

  m.def("lr_at_step", &lr_at_step, py::arg("step"), py::arg("total_steps"), py::arg("peak_lr"),
        py::arg("warmup_frac") = 0.1);

  m.def(
      "senta_loss",
      [](const RowMatrix& student, const RowMatrix& teacher) {
        return senta_loss(ag::Tensor<double>::constant(student), ag::Tensor<double>::constant(teacher)).value()(0, 0);
      },
      py::arg("student_pred"), py::arg("teacher_proj"));
  m.def(
      "struca_loss",
      [](const RowMatrix& student, const RowMatrix& teacher, double tau, bool cross_entropy) {
        return struca_loss(ag::Tensor<double>::constant(student), ag::Tensor<double>::constant(teacher), tau,
                           cross_entropy)
            .value()(0, 0);
      },
      py::arg("student_pred"), py::arg("teacher_proj"), py::arg("tau") = 0.1, py::arg("cross_entropy") = false);

  m.def(
      "retrieval_accuracy",
      [](const RowMatrix& src, const RowMatrix& tgt) {
        return retrieval_accuracy(aligned_set(src, "a"), aligned_set(tgt, "b"));
      },
      py::arg("src"), py::arg("tgt"), "Cosine P@1 in both directions; row i of src translates row i of tgt.");
  m.def(
      "cluster_stats",
      [](const RowMatrix& x, const std::vector<std::size_t>& groups, const std::vector<std::string>& langs) {
        const auto s = cluster_stats(make_set(x, groups, langs));
        return py::make_tuple(s.intra, s.inter, s.ratio);
      },
      py::arg("matrix"), py::arg("groups"), py::arg("langs"));
  m.def(
      "project_2d",
      [](const RowMatrix& x) {
        return RowMatrix(project_2d(aligned_set(x, "a")).matrix);
      },
      py::arg("matrix"));

  m.def(
      "tokenize",
      [](const std::vector<std::string>& corpus, const std::string& text, std::size_t max_size, std::size_t chunk) {
        const auto vocab = build_vocab(corpus, max_size, chunk);
        return tokenize(vocab, text).ids;
      },
      py::arg("corpus"), py::arg("text"), py::arg("max_size") = 1000, py::arg("chunk") = 0,
      "Builds a vocabulary from `corpus` and returns the ids of `text`.");
}
