#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "catql/algebra.hpp"
#include "catql/calculus.hpp"
#include "catql/check.hpp"
#include "catql/compiler.hpp"
#include "catql/error.hpp"
#include "catql/ingest.hpp"
#include "catql/optimizer.hpp"

namespace py = pybind11;
using namespace catql;

namespace {

py::object to_python(const Value& v) {
  switch (v.kind()) {
    case ValueKind::Int:
      return py::int_(v.as_int());
    case ValueKind::Float:
      return py::float_(v.as_float());
    case ValueKind::Text:
      return py::str(v.as_text());
    case ValueKind::Dewey:
      return py::str(v.to_string());
    case ValueKind::Tuple: {
      const Tuple& t = v.as_tuple();
      py::tuple out(t.size());
      for (std::size_t i = 0; i < t.size(); ++i) out[i] = to_python(t[i]);
      return out;
    }
  }
  return py::none();
}

struct Result {
  std::vector<std::string> columns;
  py::list rows;
};

Result to_result(const ExtSet& s) {
  Result r;
  r.columns = s.component_names();
  for (const auto& row : s.rows) {
    auto parts = split_row(row, s.arity());
    py::tuple t(parts.size());
    for (std::size_t i = 0; i < parts.size(); ++i) t[i] = to_python(parts[i]);
    r.rows.append(t);
  }
  return r;
}

bool looks_like_calculus(const std::string& text) {
  std::size_t pos = 0;
  while (true) {
    pos = text.find_first_not_of(" \t\r\n", pos);
    if (pos == std::string::npos) return false;
    if (text[pos] != '#') return text[pos] == '{';
    pos = text.find('\n', pos);
    if (pos == std::string::npos) return false;
  }
}

ExprPtr plan_for(const InstanceCategory& db, const std::string& text,
                 std::optional<CalculusQuery>* parsed = nullptr) {
  if (!looks_like_calculus(text)) return parse_algebra(text);
  CalculusQuery q = parse_calculus(text, &db);
  ExprPtr plan = compile(db, q);
  if (parsed) *parsed = std::move(q);
  return plan;
}

}  // namespace

PYBIND11_MODULE(_catql, m) {
  m.doc() = "Categorical calculus and algebra over multi-model data";

  static py::exception<Error> error(m, "CatqlError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      // The instance carries the error code name as `.code`.
      py::object exc = py::reinterpret_borrow<py::object>(error)(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  py::class_<Result>(m, "Result")
      .def_readonly("columns", &Result::columns)
      .def_readonly("rows", &Result::rows)
      .def("__len__", [](const Result& r) { return py::len(r.rows); })
      .def("__repr__", [](const Result& r) {
        return "<Result " + std::to_string(r.columns.size()) + " columns, " +
               std::to_string(py::len(r.rows)) + " rows>";
      });

  py::class_<InstanceCategory>(m, "Database")
      .def_static("load", &ingest::load_manifest, py::arg("manifest"),
                  "Load the sources named by a manifest file.")
      .def_static(
          "from_manifest_text",
          [](const std::string& text, const std::filesystem::path& base_dir) {
            return ingest::load(ingest::parse_manifest(text, base_dir));
          },
          py::arg("text"), py::arg("base_dir") = std::filesystem::path("."))
      .def("objects",
           [](const InstanceCategory& db) {
             std::vector<std::string> out;
             for (const auto& [name, _] : db.objects()) out.push_back(name);
             return out;
           })
      .def("morphisms",
           [](const InstanceCategory& db) {
             std::vector<std::tuple<std::string, std::string, std::string>> out;
             for (const auto& [name, f] : db.morphisms()) out.emplace_back(name, f.source, f.target);
             return out;
           })
      .def("elements",
           [](const InstanceCategory& db, const std::string& name) {
             py::list out;
             for (const auto& v : db.object(name).elements) out.append(to_python(v));
             return out;
           })
      .def("summary", &ingest::summary)
      .def("dump", &ingest::dump_csv, py::arg("object"));

  m.def(
      "query",
      [](const InstanceCategory& db, const std::string& text, bool optimize_plan, bool oracle) {
        std::optional<CalculusQuery> q;
        ExprPtr plan = plan_for(db, text, &q);
        if (oracle && !q) throw Error(ErrorCode::Unsupported, "oracle needs a calculus query");
        if (optimize_plan) plan = optimize(db, plan).plan;
        ExtSet result = evaluate(db, plan);
        if (oracle && brute_eval(db, *q).rows != result.rows) {
          throw std::runtime_error("oracle mismatch");
        }
        return to_result(result);
      },
      py::arg("db"), py::arg("text"), py::arg("optimize") = true, py::arg("oracle") = false,
      "Evaluate calculus (text starting with '{') or an algebra plan.");

  m.def(
      "explain",
      [](const InstanceCategory& db, const std::string& text, bool diff) {
        ExprPtr plan = plan_for(db, text);
        return diff ? explain_diff(db, plan) : to_pretty_text(*plan);
      },
      py::arg("db"), py::arg("text"), py::arg("diff") = false);

  m.def(
      "unsafe_variables",
      [](const std::string& text) {
        std::vector<std::tuple<std::string, std::string, std::string>> out;
        for (const auto& u : check_safety(parse_calculus(text))) out.emplace_back(u.var, std::string(1, u.rule), u.detail);
        return out;
      },
      py::arg("text"), "Unsafe variables of a calculus query as (variable, rule, detail).");

  m.def(
      "check",
      [](std::size_t trials, std::uint64_t seed) {
        std::vector<std::tuple<std::string, std::size_t, std::size_t>> out;
        std::vector<check::PropertyResult> results;
        {
          py::gil_scoped_release release;
          results = check::run_all(trials, seed);
        }
        for (const auto& r : results) out.emplace_back(r.name, r.trials, r.failures);
        return out;
      },
      py::arg("trials") = 100, py::arg("seed") = 20240601,
      "Run the randomized suites; returns (name, trials, failures) per property.");
}
