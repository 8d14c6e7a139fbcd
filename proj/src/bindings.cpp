// Python module grafenne._core.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <sstream>

#include "grafenne/allotropic.hpp"
#include "grafenne/experiment.hpp"
#include "grafenne/io.hpp"

namespace py = pybind11;
using namespace grafenne;

namespace {

ExperimentConfig configure(const std::string& text, std::optional<std::uint64_t> seed, std::optional<int> workers) {
  std::istringstream in(text);
  ExperimentConfig c = parse_config(in, "<config>");
  if (seed) c.seed = *seed;
  if (workers) c.workers = *workers;
  c.validate();
  return c;
}

py::dict result_dict(const ResultRow& r) {
  py::dict d;
  d["dataset"] = r.dataset;
  d["method"] = r.method;
  d["task"] = r.task;
  d["p"] = r.p;
  d["seed"] = r.seed;
  d["metric"] = r.metric;
  d["value"] = r.value;
  d["seconds"] = r.seconds;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "GNNs over nodes with heterogeneous, changing feature sets";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_RuntimeError);

  py::class_<HeteroGraph>(m, "Graph")
      .def_property_readonly("num_nodes", &HeteroGraph::num_nodes)
      .def_property_readonly("num_edges", &HeteroGraph::num_edges)
      .def_property_readonly("num_classes", &HeteroGraph::num_classes)
      .def_property_readonly("num_feature_entries", &HeteroGraph::num_feature_entries)
      .def("node_ids", &HeteroGraph::node_ids)
      .def("edges",
           [](const HeteroGraph& g) {
             std::vector<std::pair<NodeId, NodeId>> out;
             for (const auto& e : g.edges()) out.emplace_back(e.u, e.v);
             return out;
           })
      .def("features",
           [](const HeteroGraph& g, NodeId v) {
             if (!g.has_node(v)) throw py::key_error("no node " + std::to_string(v));
             return std::map<FeatureId, double>(g.features(v).begin(), g.features(v).end());
           })
      .def("label", [](const HeteroGraph& g, NodeId v) {
        if (!g.has_node(v)) throw py::key_error("no node " + std::to_string(v));
        return g.label(v);
      })
      .def("node_name", [](const HeteroGraph& g, NodeId v) { return g.node_names().name(v); })
      .def("feature_name", [](const HeteroGraph& g, FeatureId f) { return g.feature_names().name(f); })
      .def("class_name", [](const HeteroGraph& g, int c) { return g.class_names().name(static_cast<std::uint32_t>(c)); });

  m.def("toy_graph", &toy_graph, "Bundled three-class graph with named nodes and features.");
  m.def(
      "load_graph",
      [](const std::filesystem::path& edges, const std::filesystem::path& features, const std::filesystem::path& labels) {
        return load_graph({edges, features, labels});
      },
      py::arg("edges"), py::arg("features"), py::arg("labels") = std::filesystem::path());
  m.def("write_graph",
        [](const HeteroGraph& g, const std::filesystem::path& edges, const std::filesystem::path& features,
           const std::filesystem::path& labels) { write_graph(g, {edges, features, labels}); },
        py::arg("graph"), py::arg("edges"), py::arg("features"), py::arg("labels") = std::filesystem::path());
  m.def("translate_features", &translate_features, py::arg("graph"), py::arg("scale"), py::arg("shift") = 0.0,
        "Copy of the graph with every stored value replaced by scale * x + shift.");
  m.def("allotropic_counts", [](const HeteroGraph& g) {
    const auto alt = to_allotropic(g);
    py::dict d;
    d["graph_nodes"] = alt.num_graph_nodes();
    d["feature_nodes"] = alt.num_feature_nodes();
    d["graph_edges"] = alt.graph_edges().size();
    d["feature_edges"] = alt.feature_edges().size();
    return d;
  });
  m.def("write_allotropic",
        [](const HeteroGraph& g, const std::filesystem::path& path) { write_allotropic(path, to_allotropic(g), g); },
        py::arg("graph"), py::arg("path"));

  m.def("config_reference", &config_reference);
  m.def("method_names", &method_names);
  m.def(
      "check_config", [](const std::string& text) { configure(text, std::nullopt, std::nullopt); }, py::arg("text"),
      "Raises ConfigError when the text is not a valid config.");
  m.def(
      "run",
      [](const std::string& text, std::optional<std::uint64_t> seed, std::optional<int> workers) {
        const ExperimentConfig c = configure(text, seed, workers);
        std::vector<ResultRow> rows;
        {
          py::gil_scoped_release release;
          rows = run_experiment(load_dataset(c), c);
        }
        py::list out;
        for (const auto& r : rows) out.append(result_dict(r));
        return out;
      },
      py::arg("config") = "", py::arg("seed") = py::none(), py::arg("workers") = py::none(),
      "Static experiment; one dict per results CSV row.");
  m.def(
      "stream",
      [](const std::string& text, std::optional<std::uint64_t> seed) {
        const ExperimentConfig c = configure(text, seed, std::nullopt);
        std::vector<StreamResult> results;
        {
          py::gil_scoped_release release;
          results = run_stream_experiment(load_stream_input(c), c);
        }
        py::list out;
        for (const auto& r : results) {
          for (const auto& s : r.steps) {
            py::dict d;
            d["strategy"] = strategy_name(r.strategy);
            d["t"] = s.t;
            d["accuracy"] = s.accuracy;
            d["seconds"] = s.seconds;
            d["params_changed"] = s.params_changed;
            out.append(d);
          }
        }
        return out;
      },
      py::arg("config") = "", py::arg("seed") = py::none(), "Continual experiment; one dict per timestamp and strategy.");
}
