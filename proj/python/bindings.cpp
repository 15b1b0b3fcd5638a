#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "tracesynth/pipeline.hpp"

namespace py = pybind11;
using namespace tracesynth;

namespace {

py::dict profile_dict(const ExecutionProfile& p) {
  py::dict d;
  d["cpu_time_ms"] = p.cpu_time_ms;
  d["scanned_bytes"] = p.scanned_bytes;
  d["joins"] = p.structural.joins;
  d["aggregates"] = p.structural.aggregates;
  d["sorts"] = p.structural.sorts;
  d["tables"] = p.structural.tables;
  return d;
}

py::dict summary_dict(const ReportSummary& s) {
  py::dict d;
  d["records"] = s.records;
  d["failed"] = s.failed;
  d["cpu_p50"] = s.cpu_p50;
  d["cpu_p90"] = s.cpu_p90;
  d["cpu_p99"] = s.cpu_p99;
  d["bytes_p50"] = s.bytes_p50;
  d["bytes_p90"] = s.bytes_p90;
  d["bytes_p99"] = s.bytes_p99;
  d["mae_joins"] = s.mae_joins;
  d["mae_aggs"] = s.mae_aggs;
  d["mae_sorts"] = s.mae_sorts;
  d["reuse"] = s.reuse;
  d["executions"] = s.executions;
  return d;
}

using DatasetPtr = std::shared_ptr<Dataset>;

}  // namespace

PYBIND11_MODULE(_tracesynth, m) {
  m.doc() = "Trace-driven SQL workload synthesis";

  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);

  py::class_<Dataset, DatasetPtr>(m, "Dataset")
      .def_property_readonly("catalog_text", [](const Dataset& d) { return serialize_catalog(d.catalog); })
      .def_property_readonly("tables", [](const Dataset& d) {
        std::vector<std::string> names;
        for (const auto& t : d.catalog.tables) names.push_back(t.name);
        return names;
      })
      .def("save", [](const Dataset& d, const std::string& dir) { save_dataset(d, dir); });

  m.def("gen_dataset", [](int tables, int64_t rows, uint64_t seed) -> DatasetPtr {
    return std::make_shared<Dataset>(gen_synthetic_catalog({tables, rows, seed}));
  }, py::arg("tables") = 2, py::arg("rows") = 1000, py::arg("seed") = 0);
  m.def("load_dataset", [](const std::string& dir) -> DatasetPtr {
    return std::make_shared<Dataset>(load_dataset(dir));
  });

  py::class_<QueryGraph>(m, "QueryGraph")
      .def("canonical_form", &canonical_form, py::arg("parameterized") = false)
      .def("hash", &graph_hash, py::arg("parameterized") = false)
      .def("to_sql", &to_sql)
      .def("counts", [](const QueryGraph& g) {
        const auto c = structural_counts(g);
        return py::dict(py::arg("joins") = c.joins, py::arg("aggregates") = c.aggregates,
                        py::arg("sorts") = c.sorts, py::arg("tables") = c.tables);
      })
      .def("__len__", [](const QueryGraph& g) { return g.nodes.size(); });

  m.def("parse_sql", &parse_sql);
  m.def("parse_graph", [](const std::string& text) { return parse_graph(text); });
  m.def("sample_graph", [](const DatasetPtr& d, int max_joins, int max_aggs, int max_sorts, uint64_t seed) {
    return sample_random_graph(d->catalog, {max_joins, max_aggs, max_sorts, 20, 0.6, 0.5}, seed);
  }, py::arg("dataset"), py::arg("max_joins") = 1, py::arg("max_aggs") = 1, py::arg("max_sorts") = 1,
     py::arg("seed") = 0);

  py::class_<SimulatedBackend, std::shared_ptr<SimulatedBackend>>(m, "SimulatedBackend")
      .def(py::init([](const DatasetPtr& d) { return std::make_shared<SimulatedBackend>(d); }))
      .def("execute", [](SimulatedBackend& b, const QueryGraph& g) { return profile_dict(b.execute(g)); })
      .def_property_readonly("executions", [](const SimulatedBackend& b) { return b.meter().executions; });

  py::class_<LocalModel>(m, "LocalModel")
      .def("to_text", &serialize_model)
      .def_property_readonly("kinds", [](const LocalModel& lm) {
        std::vector<std::string> keys;
        for (const auto& [k, _] : lm.kinds) keys.push_back(k);
        return keys;
      });

  m.def("profile", [](const DatasetPtr& d, int queries, uint64_t seed) {
    SimulatedBackend backend(d);
    FitOptions opts;
    opts.skip_sparse_kinds = true;
    return fit(collect_profiles(d->catalog, backend, queries, seed), opts);
  }, py::arg("dataset"), py::arg("queries") = 200, py::arg("seed") = 0);
  m.def("parse_model", [](const std::string& text) { return parse_model(text); });

  m.def("gen_trace", [](const DatasetPtr& d, int n, double dup, double param_dup, uint64_t seed) {
    SimulatedBackend backend(d);
    SyntheticTraceSpec spec;
    spec.n = n;
    spec.dup = dup;
    spec.param_dup = param_dup;
    spec.seed = seed;
    const auto t = gen_synthetic_trace(d->catalog, backend, spec);
    return py::make_tuple(serialize_trace(t.records), serialize_answer_key(t.answer_key));
  }, py::arg("dataset"), py::arg("n") = 50, py::arg("dup") = 0.0, py::arg("param_dup") = 0.0, py::arg("seed") = 0);

  m.def("synthesize", [](const std::string& trace_text, const DatasetPtr& d, const LocalModel& model,
                         const std::map<std::string, std::string>& overrides) {
    PipelineConfig config;
    for (const auto& [k, v] : overrides) config.set(k, v);
    SimulatedBackend backend(d);
    SynthesisOutput out;
    {
      py::gil_scoped_release release;
      out = synthesize_workload(parse_trace(trace_text), d->catalog, backend, model, config);
    }
    return py::make_tuple(out.workload, serialize_report(out.report));
  }, py::arg("trace"), py::arg("dataset"), py::arg("model"),
     py::arg("config") = std::map<std::string, std::string>{});

  m.def("summarize_report", [](const std::string& text) { return summary_dict(summarize(parse_report(text))); });
  m.def("qerror", &qerror, py::arg("measured"), py::arg("target"), py::arg("eta") = 1.0);
}
