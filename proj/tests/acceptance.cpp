// Acceptance checks, one per shipping criterion. Each prints a single
// [PASS]/[FAIL] line; the exit code is the number of failures.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "expr_oracle.hpp"
#include "vortex/config.hpp"
#include "vortex/dispatch.hpp"
#include "vortex/expr.hpp"
#include "vortex/rank.hpp"
#include "vortex/sim.hpp"
#include "vortex/sources.hpp"
#include "vortex/tags.hpp"

using namespace vortex;

namespace {

struct Checker {
    std::ostringstream detail;
    bool ok = true;

    template <typename A, typename B>
    void eq(const A& got, const B& want, const char* what) {
        if (!(got == want)) {
            ok = false;
            detail << "  " << what << ": got " << got << ", want " << want << "\n";
        }
    }
    void is_true(bool cond, const char* what) {
        if (!cond) {
            ok = false;
            detail << "  failed: " << what << "\n";
        }
    }
};

config::ResolvedConfig load_file(const std::string& path) {
    auto doc = config::parse_document(sources::read_file(path));
    return config::resolve_inheritance(doc);
}

std::string data_path(const char* name) {
    return std::string(VORTEX_TEST_DATA_DIR) + "/" + name;
}

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// --------------------------------------------------------------------------

bool criterion_1_worked_example(Checker& c) {
    config::ResolvedConfig rc = load_file(data_path("worked_example.yml"));
    dispatch::JobContext job;
    job.tool_id = "toolshed.g2.bx.psu.edu/repos/iuc/hisat2/1.0.0";
    job.roles = {"training_2023"};
    job.input_size_gb = 0.1;

    dispatch::DispatchDecision d = dispatch::dispatch(rc, job);
    c.eq(d.destination_id, std::string("my_slurm_cluster"), "destination");
    c.eq(d.cores, 6LL, "cores");
    c.eq(d.mem_gb, 24.0, "mem_gb");
    c.eq(d.gpus, 1LL, "gpus");
    c.eq(d.params.at("nativeSpecification"),
         std::string("--nodes=1 --ntasks=6 --ntasks-per-node=6 --mem=24576"),
         "params.nativeSpecification");
    c.eq(d.env.at("_JAVA_OPTIONS"), std::string("-Xmx24G -Xms1G"), "env._JAVA_OPTIONS");
    return c.ok;
}

bool criterion_2_tag_matrix(Checker& c) {
    using tags::Category;
    const std::array<std::optional<Category>, 5> cells = {
        Category::Require, Category::Prefer, Category::Accept, Category::Reject, std::nullopt,
    };
    const bool want[5][5] = {
        {true, true, true, false, false},
        {true, true, true, false, true},
        {true, true, true, false, true},
        {false, false, false, false, true},
        {false, true, true, true, true},
    };
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 5; ++j) {
            bool got = tags::pair_compatible(cells[i], cells[j]);
            if (got != want[i][j]) {
                c.ok = false;
                c.detail << "  cell [" << i << "][" << j << "]: got " << got << ", want "
                         << want[i][j] << "\n";
            }
            c.is_true(got == tags::pair_compatible(cells[j], cells[i]), "matrix symmetry");
        }
    }
    return c.ok;
}

bool criterion_3_merge_rules(Checker& c) {
    using tags::Category;
    auto up = tags::merge_tag_sets({{"T", Category::Require}}, {{"T", Category::Prefer}});
    c.is_true(up.ok(), "require+prefer merges");
    c.eq(static_cast<int>(up.merged.at("T")), static_cast<int>(Category::Require),
         "require+prefer resolves to require");
    auto down = tags::merge_tag_sets({{"T", Category::Prefer}}, {{"T", Category::Require}});
    c.eq(static_cast<int>(down.merged.at("T")), static_cast<int>(Category::Require),
         "prefer+require resolves to require");

    // Role prefers T on top of a tool rejecting T cannot be scheduled.
    config::ResolvedConfig rc = config::resolve_inheritance(config::parse_document(R"(tools:
  t: {cores: 1, scheduling: {reject: [T]}}
roles:
  r: {scheduling: {prefer: [T]}}
destinations:
  d: {}
)"));
    dispatch::JobContext job;
    job.tool_id = "t";
    job.roles = {"r"};
    bool threw = false;
    try {
        dispatch::dispatch(rc, job);
    } catch (const dispatch::DispatchError& e) {
        threw = true;
        c.eq(e.stage, std::string("combine"), "conflict stage");
    }
    c.is_true(threw, "prefer-over-reject raises unschedulable");
    return c.ok;
}

bool criterion_4_clamping(Checker& c) {
    config::ResolvedConfig rc = config::resolve_inheritance(config::parse_document(R"(tools:
  greedy: {cores: 64}
destinations:
  capped: {max_cores: 32}
)"));
    dispatch::JobContext job;
    job.tool_id = "greedy";
    c.eq(dispatch::dispatch(rc, job).cores, 32LL, "64 cores clamp to 32");

    std::mt19937_64 rng(0xC1A);
    for (int i = 0; i < 1500 && c.ok; ++i) {
        config::EntityDef dest;
        auto maybe = [&](double hi) -> std::optional<double> {
            if ((rng() & 3u) == 0) return std::nullopt;
            return static_cast<double>(rng() % 640) / 10.0 * hi / 64.0;
        };
        dest.max_cores = maybe(64);
        dest.max_mem = maybe(512);
        dest.max_gpus = maybe(8);

        dispatch::FlatEntity flat;
        flat.cores = static_cast<double>(rng() % 1280) / 10.0;
        flat.mem = static_cast<double>(rng() % 10240) / 10.0;
        flat.gpus = static_cast<double>(rng() % 160) / 10.0;

        dispatch::DispatchDecision d = dispatch::evaluate(flat, "capped", dest);

        auto check_int = [&](long long got, double requested,
                             const std::optional<double>& bound, const char* what) {
            double clamped = bound ? std::min(requested, *bound) : requested;
            long long expect = static_cast<long long>(std::ceil(clamped));
            if (bound && static_cast<double>(expect) > *bound)
                expect = static_cast<long long>(std::floor(*bound));
            if (expect < 0) expect = 0;
            c.eq(got, expect, what);
            c.is_true(got >= 0, "non-negative");
            if (bound) c.is_true(static_cast<double>(got) <= *bound, "integer within bound");
        };
        check_int(d.cores, flat.cores, dest.max_cores, "cores law");
        check_int(d.gpus, flat.gpus, dest.max_gpus, "gpus law");

        double want_mem = dest.max_mem ? std::min(flat.mem, *dest.max_mem) : flat.mem;
        c.eq(d.mem_gb, want_mem, "mem law");
    }
    return c.ok;
}

bool criterion_5_capacity_gating(Checker& c) {
    config::ResolvedConfig rc = load_file(data_path("worked_example.yml"));
    dispatch::JobContext job;
    job.tool_id = "toolshed.g2.bx.psu.edu/repos/iuc/hisat2/1.0.0";
    job.roles = {"training_2023"};
    job.input_size_gb = 0.1;

    config::EntityDef combined = dispatch::combine(dispatch::lookup(rc, job));
    dispatch::FlatEntity flat = dispatch::flatten(combined, job);
    c.eq(flat.cores, 6.0, "flat cores");

    auto ids = [](const std::vector<rank::Candidate>& cs) {
        std::vector<std::string> out;
        for (const auto& x : cs) out.push_back(x.id);
        return out;
    };
    auto bounded = ids(dispatch::match(flat, rc));
    c.is_true(bounded == std::vector<std::string>{"my_slurm_cluster"},
              "pulsar excluded by max_accepted_cores=4");

    // The capacity bound alone gates a plain 6-core request (no tags in play).
    dispatch::FlatEntity plain;
    plain.cores = 6;
    plain.mem = 24;
    plain.gpus = 1;
    c.is_true(ids(dispatch::match(plain, rc)) == std::vector<std::string>{"my_slurm_cluster"},
              "bound excludes an untagged 6-core request too");

    config::ResolvedConfig relaxed = rc;
    relaxed.doc.destinations.find("my_pulsar_cluster")->entity.max_accepted_cores.reset();
    auto open = ids(dispatch::match(plain, relaxed));
    c.is_true(open == std::vector<std::string>{"my_slurm_cluster", "my_pulsar_cluster"},
              "removing the bound admits pulsar");

    // Monotonicity on random inputs: dropping a bound never shrinks the set.
    std::mt19937_64 rng(55);
    for (int i = 0; i < 300 && c.ok; ++i) {
        config::ConfigDoc doc;
        config::EntityDef dest;
        dest.max_accepted_cores = static_cast<double>(rng() % 16);
        dest.min_accepted_mem = static_cast<double>(rng() % 8);
        doc.destinations.entries.push_back({"d", dest});
        config::ResolvedConfig tight = config::resolve_inheritance(doc);

        doc.destinations.entries[0].entity.max_accepted_cores.reset();
        config::ResolvedConfig loose = config::resolve_inheritance(doc);

        dispatch::FlatEntity flat_r;
        flat_r.cores = static_cast<double>(rng() % 24);
        flat_r.mem = static_cast<double>(rng() % 12);
        c.is_true(dispatch::match(flat_r, tight).size() <= dispatch::match(flat_r, loose).size(),
                  "bound removal is monotone");
    }
    return c.ok;
}

bool criterion_6_latency(Checker& c) {
    std::ostringstream cfg;
    cfg << "global:\n  default_inherits: default\n";
    cfg << "tools:\n  default: {cores: 1, mem: cores * 2}\n";
    for (int i = 0; i < 1000; ++i) {
        cfg << "  tool_" << i << "/.*:\n";
        cfg << "    cores: " << (i % 16 + 1) << "\n";
        cfg << "    mem: cores * " << (i % 4 + 1) << "\n";
        if (i % 3 == 0) {
            cfg << "    rules:\n";
            cfg << "      - if: input_size > " << (i % 7 + 1) << "\n";
            cfg << "        cores: " << (i % 16 + 2) << "\n";
        }
        if (i % 5 == 0) cfg << "    scheduling: {prefer: [fast]}\n";
    }
    cfg << "destinations:\n";
    for (int i = 0; i < 6; ++i) {
        cfg << "  dest_" << i << ":\n";
        cfg << "    max_accepted_cores: " << 8 + 4 * i << "\n";
        cfg << "    max_cores: " << 6 + 4 * i << "\n";
        if (i % 2 == 0) cfg << "    scheduling: {accept: [fast]}\n";
        cfg << "    params: {spec: 'cores={cores} mem={mem}'}\n";
    }
    config::ResolvedConfig rc = config::resolve_inheritance(config::parse_document(cfg.str()));
    c.is_true(rc.diagnostics.empty(), "generated config resolves cleanly");

    std::vector<double> times_ms;
    std::mt19937_64 rng(6);
    for (int i = 0; i < 400; ++i) {
        dispatch::JobContext job;
        job.tool_id = "tool_" + std::to_string(rng() % 1000) + "/1.2";
        job.input_size_gb = static_cast<double>(rng() % 10);
        auto start = std::chrono::steady_clock::now();
        dispatch::DispatchDecision d = dispatch::dispatch(rc, job);
        auto stop = std::chrono::steady_clock::now();
        c.is_true(!d.destination_id.empty(), "decision produced");
        times_ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
    }
    std::sort(times_ms.begin(), times_ms.end());
    double median = times_ms[times_ms.size() / 2];
    c.detail << "  median dispatch time: " << median << " ms over " << times_ms.size()
             << " decisions\n";
    c.is_true(median < 10.0, "median dispatch < 10 ms");
    return c.ok;
}

bool criterion_7_meta_scheduling_benefit(Checker& c) {
    config::ResolvedConfig rc = config::resolve_inheritance(config::parse_document(R"(global:
  default_inherits: default
tools:
  default: {cores: 2, mem: 4}
destinations:
  busy: {}
  idle: {}
)"));
    sim::SimDestination busy;
    busy.id = "busy";
    busy.total_cores = 16;
    busy.total_mem_gb = 512;
    busy.background.push_back({0, 100000, 13});  // ~80% occupied throughout
    sim::SimDestination idle = busy;
    idle.id = "idle";
    idle.background.clear();

    std::mt19937_64 rng(42);
    std::vector<sim::TraceJob> trace;
    double t = 0;
    for (int i = 0; i < 500; ++i) {
        t += -10.0 * std::log(1.0 - uniform01(rng));  // Poisson arrivals, 0.1/s
        sim::TraceJob job;
        job.arrival_s = t;
        job.tool_id = "synthetic";
        job.service_s = -60.0 * std::log(1.0 - uniform01(rng));
        trace.push_back(job);
    }

    auto mean_wait = [&](rank::StrategyKind kind) {
        rank::Strategy strat;
        strat.kind = kind;
        return sim::run_simulation(rc, {busy, idle}, trace, strat, 42).mean_wait_s;
    };
    double least = mean_wait(rank::StrategyKind::LeastLoaded);
    double random = mean_wait(rank::StrategyKind::RandomWeighted);
    double first = mean_wait(rank::StrategyKind::Default);  // equal scores: always 'busy'

    c.detail << "  mean waits: least-loaded " << least << "s, random " << random
             << "s, always-first " << first << "s\n";
    c.is_true(least < random, "least-loaded beats weighted-random");
    c.is_true(least <= 0.9 * first, "least-loaded at least 10% below always-first");
    return c.ok;
}

bool criterion_8_expression_oracle(Checker& c) {
    std::mt19937_64 rng(0x0DDBA11);
    expr::EvalContext ctx;
    for (const auto& [name, value] : oracle::default_bindings()) ctx.set(name, value);

    int checked = 0, errors = 0;
    for (int i = 0; i < 10000; ++i) {
        oracle::Sample sample = oracle::generate(rng);
        try {
            expr::Expression parsed = expr::Expression::parse(sample.text);
            expr::Value got = parsed.evaluate(ctx);
            if (sample.is_bool) {
                if (!sample.truth.has_value() || !std::holds_alternative<bool>(got) ||
                    std::get<bool>(got) != *sample.truth) {
                    c.ok = false;
                    c.detail << "  bool mismatch on: " << sample.text << "\n";
                    break;
                }
            } else {
                if (!sample.num.has_value() || !std::holds_alternative<double>(got)) {
                    c.ok = false;
                    c.detail << "  numeric mismatch on: " << sample.text << "\n";
                    break;
                }
                double a = std::get<double>(got), b = *sample.num;
                bool same_nan = std::isnan(a) && std::isnan(b);
                if (!same_nan &&
                    std::abs(a - b) > 1e-9 * std::max({1.0, std::abs(a), std::abs(b)})) {
                    c.ok = false;
                    c.detail << "  value mismatch on: " << sample.text << " (engine " << a
                             << ", oracle " << b << ")\n";
                    break;
                }
            }
            ++checked;
        } catch (const expr::EvalError&) {
            bool expected_error = sample.is_bool ? !sample.truth.has_value()
                                                 : !sample.num.has_value();
            if (!expected_error) {
                c.ok = false;
                c.detail << "  unexpected evaluation error on: " << sample.text << "\n";
                break;
            }
            ++checked;
            ++errors;
        } catch (const expr::ParseError& e) {
            c.ok = false;
            c.detail << "  rendered text failed to parse: " << sample.text << " (" << e.what()
                     << ")\n";
            break;
        }
    }
    c.detail << "  " << checked << " expressions compared (" << errors
             << " agreed-on evaluation errors)\n";
    c.is_true(checked == 10000, "all 10,000 expressions compared");
    return c.ok;
}

bool criterion_9_shared_db(Checker& c) {
    auto docs = config::load_sources(
        {data_path("shared_db_tools.yml"), data_path("site_override.yml")});
    config::ResolvedConfig merged = config::resolve_inheritance(config::merge_documents(docs));

    dispatch::JobContext job;
    job.tool_id = "toolshed.example.org/repos/devteam/bwa/bwa/0.7.17";
    dispatch::DispatchDecision d = dispatch::dispatch(merged, job);
    c.eq(d.cores, 4LL, "site override halves the shared default");
    c.eq(d.mem_gb, 16.0, "shared mem expression follows the halved cores");
    c.eq(d.destination_id, std::string("site_cluster"), "site destination");

    // Without the override the shared database value stands.
    auto shared_only = config::load_sources({data_path("shared_db_tools.yml")});
    config::ResolvedConfig shared =
        config::resolve_inheritance(config::merge_documents(shared_only));
    config::EntityDef combined = dispatch::combine(dispatch::lookup(shared, job));
    c.eq(dispatch::flatten(combined, job).cores, 8.0, "shared default cores");
    return c.ok;
}

bool criterion_10_conservation_determinism(Checker& c) {
    config::ResolvedConfig rc = config::resolve_inheritance(config::parse_document(R"(global:
  default_inherits: default
tools:
  default: {cores: 1, mem: 2}
  wide: {cores: 6, mem: 12}
  tall: {cores: 3, mem: 24}
destinations:
  a: {}
  b: {}
  c: {max_accepted_cores: 2}
)"));
    std::vector<sim::SimDestination> dests;
    for (const char* id : {"a", "b", "c"}) {
        sim::SimDestination d;
        d.id = id;
        d.total_cores = 8;
        d.total_mem_gb = 32;
        dests.push_back(d);
    }
    dests[0].background.push_back({0, 5000, 4});

    std::mt19937_64 rng(123);
    const char* tools[] = {"default", "wide", "tall", "unlisted"};
    const rank::StrategyKind kinds[] = {rank::StrategyKind::Default,
                                        rank::StrategyKind::LeastLoaded,
                                        rank::StrategyKind::RandomWeighted};
    for (int round = 0; round < 100 && c.ok; ++round) {
        std::vector<sim::TraceJob> trace;
        double t = 0;
        std::size_t n = 10 + rng() % 80;
        for (std::size_t i = 0; i < n; ++i) {
            t += static_cast<double>(rng() % 300) / 10.0;
            sim::TraceJob job;
            job.arrival_s = t;
            job.tool_id = tools[rng() % 4];
            job.service_s = 1.0 + static_cast<double>(rng() % 900);
            trace.push_back(job);
        }
        rank::Strategy strat;
        strat.kind = kinds[round % 3];
        std::uint64_t seed = rng();

        sim::SimMetrics first = sim::run_simulation(rc, dests, trace, strat, seed);
        sim::SimMetrics again = sim::run_simulation(rc, dests, trace, strat, seed);
        c.is_true(first.to_json().dump() == again.to_json().dump(),
                  "equal seeds give byte-identical metrics");
        c.is_true(first.jobs_completed + first.jobs_unschedulable + first.jobs_still_queued ==
                      static_cast<long long>(trace.size()),
                  "jobs are conserved");
    }
    return c.ok;
}

struct Criterion {
    const char* label;
    std::function<bool(Checker&)> run;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {"worked example dispatches to my_slurm_cluster with 6 cores / 24 GB / 1 gpu",
         criterion_1_worked_example},
        {"tag compatibility matrix matches all 25 documented cells", criterion_2_tag_matrix},
        {"stronger claims win merges and reject conflicts are unschedulable",
         criterion_3_merge_rules},
        {"resource requests clamp to destination ceilings (64 -> 32, plus property)",
         criterion_4_clamping},
        {"capacity bounds gate candidacy and removing them is monotone",
         criterion_5_capacity_gating},
        {"median dispatch latency under 10 ms on a 1,000-tool config", criterion_6_latency},
        {"least-loaded routing beats random and always-first on a skewed fixture",
         criterion_7_meta_scheduling_benefit},
        {"engine agrees with an independent oracle on 10,000 expressions",
         criterion_8_expression_oracle},
        {"shared tool database loads and site overrides win", criterion_9_shared_db},
        {"simulation conserves jobs and is deterministic across 100 traces",
         criterion_10_conservation_determinism},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Checker checker;
        bool ok = false;
        std::string blew_up;
        auto start = std::chrono::steady_clock::now();
        try {
            ok = criteria[i].run(checker);
        } catch (const std::exception& e) {
            blew_up = e.what();
        }
        auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                            start)
                      .count();
        std::printf("[%s] criterion %zu: %s (%.0f ms)\n", ok ? "PASS" : "FAIL", i + 1,
                    criteria[i].label, ms);
        if (!ok) {
            ++failures;
            if (!blew_up.empty()) std::printf("  unexpected exception: %s\n", blew_up.c_str());
            std::fputs(checker.detail.str().c_str(), stdout);
        }
    }
    return failures;
}
