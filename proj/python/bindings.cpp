// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The cwalk Authors

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cwalk/app_graph.hpp"
#include "cwalk/error.hpp"
#include "cwalk/metrics.hpp"
#include "cwalk/protocol.hpp"
#include "cwalk/runner.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

// Structured values cross the boundary as JSON text; the Python package
// decodes them.
std::string dump(const json& j) { return j.dump(); }

cwalk::BinaryRating binary_of(const std::string& s) {
  if (auto b = cwalk::parse_binary(s)) return *b;
  throw cwalk::Error(cwalk::Errc::SchemaViolation, "not a binary rating: " + s);
}

std::vector<cwalk::BinaryRating> binaries_of(const std::vector<std::string>& v) {
  std::vector<cwalk::BinaryRating> out;
  out.reserve(v.size());
  for (const auto& s : v) out.push_back(binary_of(s));
  return out;
}

cwalk::PathDistribution distribution_of(const std::map<cwalk::Edge, double>& mass) {
  cwalk::PathDistribution d;
  d.mass = mass;
  return d;
}

std::optional<std::string> opt_str(const py::object& o) {
  if (o.is_none()) return std::nullopt;
  return o.cast<std::string>();
}

std::optional<cwalk::fs::path> opt_path(const py::object& o) {
  if (o.is_none()) return std::nullopt;
  return o.cast<cwalk::fs::path>();
}

}  // namespace

PYBIND11_MODULE(_cwalk, m) {
  m.doc() = "Native core of the cwalk cognitive-walkthrough harness";

  // Leaked on purpose so the translator never touches a finalized object.
  static py::handle error_type = PyErr_NewException("cwalk._cwalk.CwalkError", PyExc_RuntimeError, nullptr);
  m.attr("CwalkError") = error_type;
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const cwalk::Error& e) {
      py::object inst = error_type(e.what());
      inst.attr("code") = std::string(cwalk::errc_name(e.code()));
      inst.attr("cause") = e.cause() ? py::object(py::str(std::string(cwalk::errc_name(*e.cause())))) : py::none();
      PyErr_SetObject(error_type.ptr(), inst.ptr());
    }
  });

  m.def("default_prompts_dir", [] { return cwalk::PromptLibrary::default_dir(); });

  m.def(
      "load_app_graph", [](const cwalk::fs::path& p) { return dump(cwalk::to_json(cwalk::load_app_graph(p))); },
      py::arg("manifest"));

  m.def(
      "validate_manifest",
      [](const cwalk::fs::path& p) {
        json out = json::array();
        for (const auto& f : cwalk::validate_graph(cwalk::load_app_graph(p))) {
          out.push_back({{"rule", cwalk::to_string(f.rule)}, {"entity", f.entity}, {"message", f.message}});
        }
        return dump(out);
      },
      py::arg("manifest"));

  m.def(
      "parse_evaluator_response",
      [](const std::string& raw, bool with_confusion) {
        const auto mode = with_confusion ? cwalk::ResponseMode::with_confusion : cwalk::ResponseMode::plain;
        return dump(cwalk::to_json(cwalk::parse_evaluator_response(raw, mode)));
      },
      py::arg("raw"), py::arg("with_confusion") = false);

  m.def(
      "collapse_rating",
      [](const std::string& level) {
        const auto r = cwalk::parse_confusion(level);
        if (!r) throw cwalk::Error(cwalk::Errc::SchemaViolation, "not a confusion rating: " + level);
        return std::string(cwalk::to_string(cwalk::collapse_rating(*r)));
      },
      py::arg("level"));

  m.def(
      "path_distribution",
      [](const std::vector<std::vector<std::string>>& paths, double alpha, const std::set<cwalk::Edge>& support) {
        return cwalk::path_distribution(paths, support, alpha).mass;
      },
      py::arg("paths"), py::arg("alpha") = 0.0, py::arg("support") = std::set<cwalk::Edge>{});

  m.def(
      "js_divergence",
      [](const std::map<cwalk::Edge, double>& p, const std::map<cwalk::Edge, double>& q, bool union_support) {
        return cwalk::js_divergence(distribution_of(p), distribution_of(q), union_support);
      },
      py::arg("p"), py::arg("q"), py::arg("union_support") = true);

  m.def(
      "cohens_kappa",
      [](const std::vector<std::string>& a, const std::vector<std::string>& b) {
        const auto ra = binaries_of(a);
        const auto rb = binaries_of(b);
        return cwalk::cohens_kappa(ra, rb).kappa;
      },
      py::arg("a"), py::arg("b"));

  m.def("corrected_odds_ratio", &cwalk::corrected_odds_ratio, py::arg("a"), py::arg("b"), py::arg("c"),
        py::arg("d"));

  m.def(
      "run_walk",
      [](const cwalk::fs::path& manifest, const std::string& backend, const cwalk::fs::path& out_dir,
         const std::string& run_id, const std::vector<std::string>& tasks, int runs, bool with_confusion,
         const py::object& label, const py::object& timestamp, const py::object& record, bool force,
         const py::object& prompts_dir) {
        cwalk::WalkOptions o;
        o.manifest = manifest;
        o.task_ids = tasks;
        o.backend = cwalk::parse_backend_spec(backend);
        o.label = opt_str(label);
        o.runs = runs;
        o.session.with_confusion = with_confusion;
        o.out_dir = out_dir;
        o.run_id = run_id;
        o.record = opt_path(record);
        o.force = force;
        o.timestamp = opt_str(timestamp);
        o.prompts_dir = opt_path(prompts_dir).value_or(cwalk::PromptLibrary::default_dir());
        cwalk::WalkResult r;
        {
          py::gil_scoped_release release;
          r = cwalk::run_walk(o);
        }
        json sessions = json::array();
        for (std::size_t i = 0; i < r.traces.size(); ++i) {
          const auto& t = r.traces[i];
          sessions.push_back({{"session_id", t.session_id},
                              {"task", t.task.id},
                              {"outcome", t.outcome ? std::string(cwalk::to_string(*t.outcome)) : "open"},
                              {"steps", t.steps.size()},
                              {"failsafes", t.failsafe_count()},
                              {"trace_file", r.trace_files[i].string()}});
        }
        return dump({{"sessions", sessions}, {"run_manifest", r.run_manifest.string()}});
      },
      py::arg("manifest"), py::arg("backend"), py::arg("out_dir"), py::arg("run_id"),
      py::arg("tasks") = std::vector<std::string>{}, py::arg("runs") = 1, py::arg("with_confusion") = false,
      py::arg("label") = py::none(), py::arg("timestamp") = py::none(), py::arg("record") = py::none(),
      py::arg("force") = false, py::arg("prompts_dir") = py::none());

  m.def(
      "run_rate_screens",
      [](const cwalk::fs::path& manifest, const cwalk::fs::path& screens, const std::string& backend,
         const cwalk::fs::path& out_file, const std::string& run_id, int jobs, const py::object& label,
         const py::object& timestamp, bool force, const py::object& prompts_dir) {
        cwalk::RateOptions o;
        o.manifest = manifest;
        o.screens_file = screens;
        o.backend = cwalk::parse_backend_spec(backend);
        o.label = opt_str(label);
        o.out_file = out_file;
        o.run_id = run_id;
        o.force = force;
        o.timestamp = opt_str(timestamp);
        o.concurrency = jobs;
        o.prompts_dir = opt_path(prompts_dir).value_or(cwalk::PromptLibrary::default_dir());
        cwalk::RateResult r;
        {
          py::gil_scoped_release release;
          r = cwalk::run_rate_screens(o);
        }
        return cwalk::to_jsonl(r.ratings);
      },
      py::arg("manifest"), py::arg("screens"), py::arg("backend"), py::arg("out_file"), py::arg("run_id"),
      py::arg("jobs") = 1, py::arg("label") = py::none(), py::arg("timestamp") = py::none(),
      py::arg("force") = false, py::arg("prompts_dir") = py::none());

  m.def(
      "run_metrics",
      [](const cwalk::fs::path& traces, const cwalk::fs::path& out_dir, const py::object& ratings,
         const py::object& human_labels, const py::object& manifest, const std::string& group_by, double alpha) {
        cwalk::MetricsOptions o;
        o.traces_dir = traces;
        o.out_dir = out_dir;
        o.ratings = opt_path(ratings);
        o.human_labels = opt_path(human_labels);
        o.manifest = opt_path(manifest);
        const auto g = cwalk::parse_group_by(group_by);
        if (!g) throw cwalk::Error(cwalk::Errc::InvalidConfig, "unknown group-by: " + group_by);
        o.group_by = *g;
        o.alpha = alpha;
        const auto r = cwalk::run_metrics(o);
        json issues = json::array();
        for (const auto& i : r.issues) issues.push_back({{"file", i.file.string()}, {"error", i.message}});
        return dump({{"csv", r.csv.string()}, {"summary", r.summary.string()}, {"issues", issues}});
      },
      py::arg("traces"), py::arg("out_dir"), py::arg("ratings") = py::none(), py::arg("human_labels") = py::none(),
      py::arg("manifest") = py::none(), py::arg("group_by") = "agent_kind", py::arg("alpha") = 0.0);
}
