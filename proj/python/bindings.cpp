// Python bindings for the vortex scheduling engine. The module mirrors the
// CLI surface: load + lint, dispatch + explain, simulate + compare, and the
// expression engine for direct use.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vortex/config.hpp"
#include "vortex/dispatch.hpp"
#include "vortex/expr.hpp"
#include "vortex/rank.hpp"
#include "vortex/sim.hpp"

namespace py = pybind11;
using namespace vortex;

namespace {

py::object json_to_py(const nlohmann::ordered_json& j) {
    switch (j.type()) {
        case nlohmann::ordered_json::value_t::null: return py::none();
        case nlohmann::ordered_json::value_t::boolean: return py::bool_(j.get<bool>());
        case nlohmann::ordered_json::value_t::number_integer:
            return py::int_(j.get<long long>());
        case nlohmann::ordered_json::value_t::number_unsigned:
            return py::int_(j.get<unsigned long long>());
        case nlohmann::ordered_json::value_t::number_float:
            return py::float_(j.get<double>());
        case nlohmann::ordered_json::value_t::string: return py::str(j.get<std::string>());
        case nlohmann::ordered_json::value_t::array: {
            py::list out;
            for (const auto& item : j) out.append(json_to_py(item));
            return out;
        }
        case nlohmann::ordered_json::value_t::object: {
            py::dict out;
            for (auto it = j.begin(); it != j.end(); ++it)
                out[py::str(it.key())] = json_to_py(it.value());
            return out;
        }
        default: return py::none();
    }
}

expr::Value py_to_value(py::handle h) {
    if (py::isinstance<py::bool_>(h)) return h.cast<bool>();
    if (py::isinstance<py::int_>(h) || py::isinstance<py::float_>(h)) return h.cast<double>();
    if (py::isinstance<py::str>(h)) return h.cast<std::string>();
    if (py::isinstance<py::list>(h) || py::isinstance<py::tuple>(h))
        return h.cast<std::vector<std::string>>();
    throw py::type_error("bindings accept bool, number, str, or list[str] values");
}

expr::EvalContext context_from_dict(const py::dict& bindings) {
    expr::EvalContext ctx;
    for (auto item : bindings)
        ctx.set(item.first.cast<std::string>(), py_to_value(item.second));
    return ctx;
}

py::object value_to_py(const expr::Value& v) {
    return std::visit(
        [](const auto& inner) -> py::object { return py::cast(inner); }, v);
}

py::list diags_to_py(const std::vector<Diagnostic>& diags) {
    py::list out;
    for (const auto& d : diags) {
        py::dict row;
        row["severity"] = to_string(d.severity);
        row["path"] = d.path;
        row["message"] = d.message;
        out.append(row);
    }
    return out;
}

struct ConfigHandle {
    config::ResolvedConfig resolved;
};

ConfigHandle load(const std::vector<std::string>& sources, const std::string& cache_dir) {
    auto docs = config::load_sources(sources, cache_dir);
    return {config::resolve_inheritance(config::merge_documents(docs))};
}

ConfigHandle loads(const std::string& text) {
    return {config::resolve_inheritance(config::parse_document(text))};
}

dispatch::JobContext make_job(const std::string& tool, const std::optional<std::string>& user,
                              const std::vector<std::string>& roles,
                              std::optional<double> input_size_gb) {
    dispatch::JobContext job;
    job.tool_id = tool;
    job.user = user;
    job.roles = roles;
    job.input_size_gb = input_size_gb;
    return job;
}

rank::Strategy make_strategy(const std::string& name, std::uint64_t seed) {
    auto kind = rank::strategy_from_name(name);
    if (!kind) throw py::value_error("unknown rank strategy '" + name + "'");
    return {*kind, seed};
}

std::optional<rank::LoadSnapshot> maybe_load(const std::optional<std::string>& load_feed) {
    if (!load_feed) return std::nullopt;
    rank::FetchOutcome outcome = rank::fetch_load(*load_feed);
    if (!outcome.ok) throw VortexError(outcome.message);
    return outcome.snapshot;
}

py::dict py_dispatch(const ConfigHandle& cfg, const std::string& tool,
                     const std::optional<std::string>& user,
                     const std::vector<std::string>& roles, std::optional<double> input_size_gb,
                     const std::string& strategy, std::uint64_t seed,
                     const std::optional<std::string>& load_feed) {
    auto snapshot = maybe_load(load_feed);
    dispatch::DispatchDecision d =
        dispatch::dispatch(cfg.resolved, make_job(tool, user, roles, input_size_gb),
                           make_strategy(strategy, seed), snapshot ? &*snapshot : nullptr);
    return json_to_py(d.to_json());
}

py::dict py_explain(const ConfigHandle& cfg, const std::string& tool,
                    const std::optional<std::string>& user,
                    const std::vector<std::string>& roles, std::optional<double> input_size_gb,
                    const std::string& strategy, std::uint64_t seed,
                    const std::optional<std::string>& load_feed) {
    auto snapshot = maybe_load(load_feed);
    dispatch::DispatchTrace trace;
    py::dict out;
    try {
        dispatch::DispatchDecision d =
            dispatch::dispatch(cfg.resolved, make_job(tool, user, roles, input_size_gb),
                               make_strategy(strategy, seed), snapshot ? &*snapshot : nullptr,
                               &trace);
        out["decision"] = json_to_py(d.to_json());
    } catch (const dispatch::DispatchError& e) {
        py::dict error;
        error["stage"] = e.stage;
        error["message"] = std::string(e.what());
        out["error"] = error;
    }
    out["trace"] = json_to_py(trace.to_json());
    return out;
}

py::dict py_simulate(const ConfigHandle& cfg, const std::string& destinations_path,
                     const std::string& trace_path, const std::string& strategy,
                     std::uint64_t seed) {
    auto destinations = sim::load_destinations(destinations_path);
    auto trace = sim::load_trace(trace_path);
    sim::SimMetrics metrics =
        sim::run_simulation(cfg.resolved, destinations, trace, make_strategy(strategy, seed), seed);
    return json_to_py(metrics.to_json());
}

py::dict py_compare(const ConfigHandle& cfg, const std::string& destinations_path,
                    const std::string& trace_path, const std::vector<std::string>& strategies,
                    std::uint64_t seed) {
    auto destinations = sim::load_destinations(destinations_path);
    auto trace = sim::load_trace(trace_path);
    std::vector<sim::StrategyRun> runs;
    for (const auto& name : strategies)
        runs.push_back({name, make_strategy(name, seed)});
    sim::Comparison cmp = sim::compare_strategies(cfg.resolved, destinations, trace, runs, seed);
    return json_to_py(cmp.to_json());
}

py::object py_evaluate(const std::string& source, const py::dict& bindings) {
    expr::Expression parsed = expr::Expression::parse(source);
    return value_to_py(parsed.evaluate(context_from_dict(bindings)));
}

std::string py_interpolate(const std::string& tmpl, const py::dict& bindings) {
    return expr::interpolate(tmpl, context_from_dict(bindings));
}

}  // namespace

PYBIND11_MODULE(_vortex, m) {
    m.doc() = "Tag-aware job dispatch: configuration, routing, and simulation";

    py::register_exception<VortexError>(m, "VortexError", PyExc_RuntimeError);

    py::class_<ConfigHandle>(m, "Config")
        .def_static("load", &load, py::arg("sources"), py::arg("cache_dir") = "",
                    "Load and merge one or more config files or URLs, later sources winning.")
        .def_static("loads", &loads, py::arg("text"),
                    "Parse a single configuration document from a string.")
        .def("lint",
             [](const ConfigHandle& cfg) { return diags_to_py(config::validate(cfg.resolved)); },
             "All diagnostics: parse, resolve, and validation problems.")
        .def("dispatch", &py_dispatch, py::arg("tool"), py::arg("user") = std::nullopt,
             py::arg("roles") = std::vector<std::string>{},
             py::arg("input_size_gb") = std::nullopt, py::arg("strategy") = "default",
             py::arg("seed") = 0, py::arg("load_feed") = std::nullopt,
             "Route one job; returns the decision as a dict.")
        .def("explain", &py_explain, py::arg("tool"), py::arg("user") = std::nullopt,
             py::arg("roles") = std::vector<std::string>{},
             py::arg("input_size_gb") = std::nullopt, py::arg("strategy") = "default",
             py::arg("seed") = 0, py::arg("load_feed") = std::nullopt,
             "Route one job keeping the full pipeline trace; never raises on "
             "dispatch failures, which appear under 'error'.")
        .def("simulate", &py_simulate, py::arg("destinations"), py::arg("trace"),
             py::arg("strategy") = "default", py::arg("seed") = 0,
             "Replay a workload trace against simulated destinations.")
        .def("compare", &py_compare, py::arg("destinations"), py::arg("trace"),
             py::arg("strategies"), py::arg("seed") = 0,
             "Run several rank strategies over one trace and compare waits.");

    m.def("evaluate", &py_evaluate, py::arg("source"), py::arg("bindings") = py::dict(),
          "Evaluate one expression with the given name bindings.");
    m.def("interpolate", &py_interpolate, py::arg("template"), py::arg("bindings") = py::dict(),
          "Render a {expr}-style template with the given name bindings.");

    m.attr("__version__") = "0.1.0";
}
