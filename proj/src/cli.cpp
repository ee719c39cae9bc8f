#include "vortex/cli.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <ostream>

#include "CLI11.hpp"

#include "vortex/config.hpp"
#include "vortex/dispatch.hpp"
#include "vortex/rank.hpp"
#include "vortex/sim.hpp"
#include "vortex/sources.hpp"

namespace vortex::cli {

namespace {

constexpr int kOk = 0;
constexpr int kDomainError = 1;
constexpr int kUsageOrIoError = 2;

void print_diagnostics(const std::vector<Diagnostic>& diags, std::ostream& err) {
    for (const auto& d : diags) err << render(d) << "\n";
}

// Loads, merges, resolves, and validates; prints diagnostics to err. Returns
// kOk and fills `out` when the config has no errors.
int load_config(const std::vector<std::string>& sources, const std::string& cache_dir,
                std::ostream& err, config::ResolvedConfig& out) {
    std::vector<config::ConfigDoc> docs;
    try {
        docs = config::load_sources(sources, cache_dir);
    } catch (const sources::FetchError& e) {
        err << "error: " << e.what() << "\n";
        return kUsageOrIoError;
    } catch (const config::ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kDomainError;
    }
    config::ConfigDoc merged;
    try {
        merged = config::merge_documents(docs);
    } catch (const config::ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kDomainError;
    }
    out = config::resolve_inheritance(merged);
    std::vector<Diagnostic> diags = config::validate(out);
    print_diagnostics(diags, err);
    return has_errors(diags) ? kDomainError : kOk;
}

struct JobFlags {
    std::string tool;
    std::string user;
    std::string roles;  // comma-separated
    double input_size_gb = 0;
};

struct RankFlags {
    std::string rank = "default";
    std::string load_source;
    std::uint64_t seed = 0;
    double staleness_s = 300.0;
};

void add_job_flags(CLI::App* cmd, JobFlags& job) {
    cmd->add_option("--tool", job.tool, "Tool id to dispatch")->required();
    cmd->add_option("--user", job.user, "Submitting user name");
    cmd->add_option("--roles", job.roles, "Comma-separated role names");
    cmd->add_option("--input-size-gb", job.input_size_gb, "Total input size in GB")
        ->check(CLI::NonNegativeNumber);
}

void add_rank_flags(CLI::App* cmd, RankFlags& rank) {
    cmd->add_option("--rank", rank.rank, "Ranking strategy")
        ->check(CLI::IsMember({"default", "least-loaded", "random"}));
    cmd->add_option("--load-source", rank.load_source,
                    "Path or URL of the destination load feed");
    cmd->add_option("--seed", rank.seed, "Seed for randomized ranking");
    cmd->add_option("--staleness", rank.staleness_s, "Maximum load feed age in seconds");
}

dispatch::JobContext to_job_context(const JobFlags& flags) {
    dispatch::JobContext job;
    job.tool_id = flags.tool;
    if (!flags.user.empty()) job.user = flags.user;
    std::string::size_type pos = 0;
    while (pos <= flags.roles.size() && !flags.roles.empty()) {
        auto comma = flags.roles.find(',', pos);
        std::string role = flags.roles.substr(
            pos, comma == std::string::npos ? std::string::npos : comma - pos);
        if (!role.empty()) job.roles.push_back(role);
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    job.input_size_gb = flags.input_size_gb;
    return job;
}

// Resolves the strategy and, for least-loaded, the load snapshot; fetch
// problems degrade to the weighted-random fallback with a warning.
rank::Strategy to_strategy(const RankFlags& flags, std::ostream& err,
                           std::optional<rank::LoadSnapshot>& snapshot) {
    rank::Strategy strategy;
    strategy.kind = *rank::strategy_from_name(flags.rank);
    strategy.seed = flags.seed;
    if (strategy.kind == rank::StrategyKind::LeastLoaded && !flags.load_source.empty()) {
        rank::FetchOutcome outcome = rank::fetch_load(flags.load_source, flags.staleness_s);
        if (outcome.ok)
            snapshot = std::move(outcome.snapshot);
        else
            err << "warning: " << outcome.message << "; falling back to weighted-random\n";
    }
    return strategy;
}

int cmd_lint(const std::vector<std::string>& sources, const std::string& cache_dir,
             std::ostream& err) {
    config::ResolvedConfig resolved;
    return load_config(sources, cache_dir, err, resolved);
}

int cmd_explain_or_dispatch(bool explain_mode, const std::vector<std::string>& sources,
                            const std::string& cache_dir, const JobFlags& job_flags,
                            const RankFlags& rank_flags, bool json, std::ostream& out,
                            std::ostream& err) {
    config::ResolvedConfig resolved;
    if (int code = load_config(sources, cache_dir, err, resolved); code != kOk) return code;

    dispatch::JobContext job = to_job_context(job_flags);
    std::optional<rank::LoadSnapshot> snapshot;
    rank::Strategy strategy = to_strategy(rank_flags, err, snapshot);

    dispatch::DispatchTrace trace;
    dispatch::DispatchDecision decision;
    try {
        decision = dispatch::dispatch(resolved, job, strategy,
                                      snapshot ? &*snapshot : nullptr, &trace);
    } catch (const dispatch::DispatchError& e) {
        if (explain_mode && !json) out << trace.render_text();
        if (json) {
            nlohmann::ordered_json j;
            j["error"] = {{"stage", e.stage}, {"message", e.what()}};
            err << j.dump() << "\n";
        } else {
            err << "error: " << e.what() << "\n";
        }
        return kDomainError;
    }

    if (explain_mode) {
        if (json) {
            out << trace.to_json().dump(2) << "\n";
        } else {
            out << trace.render_text();
            out << "decision:\n  " << decision.to_json().dump() << "\n";
        }
    } else {
        out << decision.to_json().dump() << "\n";
    }
    return kOk;
}

int cmd_simulate(const std::vector<std::string>& sources, const std::string& cache_dir,
                 const std::string& destinations_path, const std::string& trace_path,
                 const std::vector<std::string>& rank_names, std::uint64_t seed,
                 const std::string& out_path, std::ostream& out, std::ostream& err) {
    config::ResolvedConfig resolved;
    if (int code = load_config(sources, cache_dir, err, resolved); code != kOk) return code;

    std::vector<sim::SimDestination> destinations;
    std::vector<sim::TraceJob> trace;
    try {
        destinations = sim::load_destinations(destinations_path);
        trace = sim::load_trace(trace_path);
    } catch (const sources::FetchError& e) {
        err << "error: " << e.what() << "\n";
        return kUsageOrIoError;
    } catch (const sim::SimError& e) {
        err << "error: " << e.what() << "\n";
        return kDomainError;
    }

    std::vector<sim::StrategyRun> runs;
    for (const auto& name : rank_names) {
        if (std::any_of(runs.begin(), runs.end(),
                        [&name](const sim::StrategyRun& r) { return r.name == name; })) {
            err << "error: duplicate --rank strategy '" << name << "'\n";
            return kUsageOrIoError;
        }
        rank::Strategy strategy;
        strategy.kind = *rank::strategy_from_name(name);
        strategy.seed = seed;
        runs.push_back({name, strategy});
    }

    nlohmann::ordered_json payload;
    try {
        if (runs.size() == 1) {
            payload = sim::run_simulation(resolved, destinations, trace, runs.front().strategy,
                                          seed)
                          .to_json();
        } else {
            payload = sim::compare_strategies(resolved, destinations, trace, runs, seed).to_json();
        }
    } catch (const sim::SimError& e) {
        err << "error: " << e.what() << "\n";
        return kDomainError;
    }

    std::string text = payload.dump(2) + "\n";
    if (out_path.empty()) {
        out << text;
    } else {
        std::ofstream file(out_path, std::ios::binary);
        if (!file || !(file << text)) {
            err << "error: cannot write output file '" << out_path << "'\n";
            return kUsageOrIoError;
        }
    }
    return kOk;
}

int cmd_fetch_db(const std::string& url, const std::string& cache_dir, std::ostream& out,
                 std::ostream& err) {
    std::vector<Diagnostic> warnings;
    std::string text;
    try {
        text = sources::load_text(url, cache_dir, &warnings);
    } catch (const sources::FetchError& e) {
        err << "error: " << e.what() << "\n";
        return kUsageOrIoError;
    }
    print_diagnostics(warnings, err);

    config::ConfigDoc doc;
    try {
        doc = config::parse_document(text);
    } catch (const config::ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kDomainError;
    }
    config::ResolvedConfig resolved = config::resolve_inheritance(doc);
    std::vector<Diagnostic> diags = config::validate(resolved);
    print_diagnostics(diags, err);
    if (has_errors(diags)) return kDomainError;

    out << doc.tools.entries.size() << " tool entities\n";
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"vortex - tag- and rule-driven job meta-scheduling toolkit"};
    app.require_subcommand(1);

    std::string cache_dir;
    app.add_option("--cache-dir", cache_dir,
                   "Cache directory for remote sources (default: $VORTEX_CACHE_DIR)");

    auto* lint = app.add_subcommand("lint", "Validate configuration sources");
    std::vector<std::string> lint_sources;
    lint->add_option("sources", lint_sources, "Config files or URLs")->required();

    auto* explain = app.add_subcommand("explain", "Show every dispatch stage for one job");
    std::vector<std::string> explain_sources;
    JobFlags explain_job;
    RankFlags explain_rank;
    bool explain_json = false;
    explain->add_option("sources", explain_sources, "Config files or URLs")->required();
    add_job_flags(explain, explain_job);
    add_rank_flags(explain, explain_rank);
    explain->add_flag("--json", explain_json, "Emit the trace as one JSON document");

    auto* dispatch_cmd = app.add_subcommand("dispatch", "Print the dispatch decision for one job");
    std::vector<std::string> dispatch_sources;
    JobFlags dispatch_job;
    RankFlags dispatch_rank;
    dispatch_cmd->add_option("sources", dispatch_sources, "Config files or URLs")->required();
    add_job_flags(dispatch_cmd, dispatch_job);
    add_rank_flags(dispatch_cmd, dispatch_rank);

    auto* simulate = app.add_subcommand("simulate", "Replay a job trace against destinations");
    std::vector<std::string> sim_sources;
    std::string sim_destinations, sim_trace, sim_out;
    std::vector<std::string> sim_ranks;
    std::uint64_t sim_seed = 0;
    simulate->add_option("--config", sim_sources, "Config files or URLs")->required();
    simulate->add_option("--destinations", sim_destinations, "Destination capacity JSON file")
        ->required();
    simulate->add_option("--trace", sim_trace, "Line-delimited JSON job trace")->required();
    simulate->add_option("--rank", sim_ranks, "Strategy; repeat to compare")
        ->check(CLI::IsMember({"default", "least-loaded", "random"}));
    simulate->add_option("--seed", sim_seed, "Simulation seed");
    simulate->add_option("--out", sim_out, "Write metrics JSON here instead of stdout");

    auto* fetch_db = app.add_subcommand("fetch-db", "Download and validate a shared tool database");
    std::string db_url;
    fetch_db->add_option("url", db_url, "Database document URL or path")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsageOrIoError;
    }

    if (*lint) return cmd_lint(lint_sources, cache_dir, err);
    if (*explain)
        return cmd_explain_or_dispatch(true, explain_sources, cache_dir, explain_job, explain_rank,
                                       explain_json, out, err);
    if (*dispatch_cmd)
        return cmd_explain_or_dispatch(false, dispatch_sources, cache_dir, dispatch_job,
                                       dispatch_rank, false, out, err);
    if (*simulate) {
        if (sim_ranks.empty()) sim_ranks.push_back("default");
        return cmd_simulate(sim_sources, cache_dir, sim_destinations, sim_trace, sim_ranks,
                            sim_seed, sim_out, out, err);
    }
    if (*fetch_db) return cmd_fetch_db(db_url, cache_dir, out, err);
    return kUsageOrIoError;
}

}  // namespace vortex::cli

