// Python module: datasets, discovery, graph edits, simulation, evaluation
// and the in-process session service. Structured results cross the
// boundary as JSON and come out as plain dicts and lists.

#include "causalfair/json_io.hpp"
#include "causalfair/metrics.hpp"
#include "causalfair/pipeline.hpp"
#include "causalfair/service.hpp"
#include "causalfair/simulate.hpp"
#include "causalfair/synthgen.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace causalfair;

namespace {

using DatasetPtr = std::shared_ptr<tabular::Dataset>;
using ModelPtr = std::shared_ptr<graph::CausalModel>;

py::object to_py(const io::Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

io::Json from_py(const py::object& o) {
    const std::string text = py::module_::import("json").attr("dumps")(o).cast<std::string>();
    return io::parse(text, "argument");
}

std::optional<tabular::SchemaHint> hint_arg(const py::object& schema) {
    if (schema.is_none()) return std::nullopt;
    if (py::isinstance<py::str>(schema)) return tabular::read_schema(schema.cast<std::string>());
    return tabular::parse_schema(from_py(schema).dump());
}

DatasetPtr share(tabular::Dataset d) { return std::make_shared<tabular::Dataset>(std::move(d)); }

std::vector<std::string> decoded(const tabular::Dataset& d, const std::string& name) {
    const std::size_t j = d.index_of(name);
    const auto& spec = d.spec(j);
    std::vector<std::string> out;
    out.reserve(d.rows());
    for (double v : d.column(j))
        out.push_back(spec.nominal() ? spec.levels[static_cast<std::size_t>(v)] : tabular::format_number(v));
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Human-in-the-loop causal debiasing of tabular data";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<DataError>(m, "DataError", base.ptr());
    py::register_exception<EditError>(m, "EditError", base.ptr());
    py::register_exception<StageError>(m, "StageError", base.ptr());

    py::class_<tabular::Dataset, DatasetPtr>(m, "Dataset")
        .def_property_readonly("name", &tabular::Dataset::name)
        .def_property_readonly("rows", &tabular::Dataset::rows)
        .def_property_readonly("columns", &tabular::Dataset::column_names)
        .def_property_readonly("label", &tabular::Dataset::label)
        .def("kind", [](const tabular::Dataset& d, const std::string& c) {
            return std::string(tabular::to_string(d.spec(d.index_of(c)).kind));
        })
        .def("levels", [](const tabular::Dataset& d, const std::string& c) { return d.spec(d.index_of(c)).levels; })
        .def("values", &decoded, py::arg("column"), "Column values as strings (levels or shortest numbers).")
        .def("codes", [](const tabular::Dataset& d, const std::string& c) {
            const auto v = d.column(d.index_of(c));
            return std::vector<double>(v.begin(), v.end());
        })
        .def("to_csv", [](const tabular::Dataset& d) { return tabular::to_csv(d); })
        .def("save", [](const tabular::Dataset& d, const std::string& path) { tabular::save_csv(d, path); })
        .def("__len__", &tabular::Dataset::rows)
        .def("__repr__", [](const tabular::Dataset& d) {
            return "<Dataset '" + d.name() + "' " + std::to_string(d.rows()) + "x" + std::to_string(d.cols()) + ">";
        });

    m.def(
        "load_csv",
        [](const std::string& path, const py::object& schema) {
            auto r = tabular::load_csv(path, hint_arg(schema));
            return share(std::move(r.data));
        },
        py::arg("path"), py::arg("schema") = py::none(),
        "Loads a CSV; `schema` is a schema file path or a dict of column kinds, label and favorable level.");
    m.def(
        "parse_csv",
        [](const std::string& text, const std::string& name, const py::object& schema) {
            auto r = tabular::parse_csv(text, name, hint_arg(schema));
            return share(std::move(r.data));
        },
        py::arg("text"), py::arg("name") = "dataset", py::arg("schema") = py::none());
    m.def(
        "synth_hiring",
        [](std::size_t n, std::uint64_t seed, double p_male) {
            synthgen::SynthConfig cfg;
            cfg.n = n;
            cfg.seed = seed;
            cfg.p_male = p_male;
            return share(synthgen::generate_hiring(cfg));
        },
        py::arg("n") = 4000, py::arg("seed") = 0, py::arg("p_male") = 0.6);

    py::class_<graph::CausalModel, ModelPtr>(m, "CausalModel")
        .def_property_readonly("stage", [](const graph::CausalModel& g) { return std::string(graph::to_string(g.stage())); })
        .def_property_readonly("nodes", &graph::CausalModel::nodes)
        .def("graph", [](const graph::CausalModel& g) { return to_py(io::graph_summary(g)); })
        .def("fit", [](const graph::CausalModel& g) { return to_py(io::fit_summary(g)); })
        .def("edits", [](const graph::CausalModel& g) { return to_py(io::to_json(g.log())); })
        .def(
            "refine",
            [](graph::CausalModel& g, const std::string& op, const std::string& s, const std::string& t) {
                return g.apply_refine(graph::parse_op(op), s, t);
            },
            py::arg("op"), py::arg("source"), py::arg("target"), "Refine-stage edit; returns the BIC change.")
        .def("enter_debias", &graph::CausalModel::enter_debias)
        .def(
            "debias",
            [](graph::CausalModel& g, const std::string& op, const std::string& s, const std::string& t,
               std::optional<double> slider) { g.apply_debias(graph::parse_op(op), s, t, slider); },
            py::arg("op"), py::arg("source"), py::arg("target"), py::arg("slider") = py::none())
        .def("reset", &graph::CausalModel::reset_to_refined)
        .def(
            "replay",
            [](graph::CausalModel& g, const py::object& edits) { pipeline::replay(g, io::edit_log_from_json(from_py(edits))); },
            py::arg("edits"))
        .def("paths", &graph::CausalModel::find_paths, py::arg("source"), py::arg("target"))
        .def("footprint", &graph::CausalModel::debias_footprint)
        .def("topological_order", &graph::CausalModel::topological_order);

    m.def(
        "discover",
        [](const DatasetPtr& data, double p_value, std::optional<std::size_t> max_cond_size, unsigned threads) {
            discovery::DiscoveryConfig cfg;
            cfg.alpha = p_value;
            cfg.max_cond_size = max_cond_size;
            cfg.threads = threads;
            py::gil_scoped_release release;
            return pipeline::discover(data, cfg).model;
        },
        py::arg("data"), py::arg("p_value") = 0.01, py::arg("max_cond_size") = py::none(), py::arg("threads") = 1);

    m.def(
        "generate_debiased",
        [](const DatasetPtr& data, const graph::CausalModel& model, std::uint64_t seed, unsigned threads) {
            simulate::SimulationConfig cfg;
            cfg.seed = seed;
            cfg.threads = threads;
            py::gil_scoped_release release;
            return share(simulate::generate_debiased(*data, model, cfg).data);
        },
        py::arg("data"), py::arg("model"), py::arg("seed"), py::arg("threads") = 1);

    m.def(
        "evaluate",
        [](const DatasetPtr& original, const DatasetPtr& debiased, const py::object& group, const py::object& learner,
           std::uint64_t seed, std::size_t k, int splits, unsigned threads) {
            metrics::EvalConfig cfg;
            cfg.learner = io::learner_from_json(from_py(learner));
            cfg.seed = seed;
            cfg.k = k;
            cfg.splits = splits;
            cfg.threads = threads;
            const auto groups = io::group_from_json(from_py(group));
            const auto outcome = metrics::Outcome::of(*original);
            metrics::Comparison c;
            {
                py::gil_scoped_release release;
                c = metrics::compare(*original, *debiased, groups, outcome, cfg);
            }
            return to_py(io::to_json(c));
        },
        py::arg("original"), py::arg("debiased"), py::arg("group"), py::arg("learner") = "logistic",
        py::arg("seed") = 0, py::arg("k") = 5, py::arg("splits") = 3, py::arg("threads") = 1);

    py::class_<service::SessionService>(m, "SessionService")
        .def(py::init([](std::optional<std::string> snapshot_dir, std::size_t max_rows, std::size_t max_cols) {
                 service::ServiceConfig cfg;
                 cfg.snapshot_dir = snapshot_dir;
                 cfg.max_rows = max_rows;
                 cfg.max_cols = max_cols;
                 return std::make_unique<service::SessionService>(cfg);
             }),
             py::arg("snapshot_dir") = py::none(), py::arg("max_rows") = 50000, py::arg("max_cols") = 40)
        .def(
            "handle",
            [](service::SessionService& s, const std::string& method, const std::string& target,
               const std::string& body) {
                service::Response r;
                {
                    py::gil_scoped_release release;
                    r = s.handle(method, target, body);
                }
                return py::make_tuple(r.status, r.content_type, r.body);
            },
            py::arg("method"), py::arg("target"), py::arg("body") = "",
            "Returns (status, content_type, body).")
        .def("serve", &service::serve, py::arg("host") = "127.0.0.1", py::arg("port") = 8080,
             py::call_guard<py::gil_scoped_release>());
}
