#include "vortex/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <queue>
#include <sstream>

#include "vortex/dispatch.hpp"
#include "vortex/sources.hpp"

namespace vortex::sim {

// ---------------------------------------------------------------------------
// Input parsing
// ---------------------------------------------------------------------------

namespace {

double require_number(const nlohmann::json& obj, const char* field, const std::string& where) {
    if (!obj.contains(field) || !obj[field].is_number())
        throw SimError(where + ": missing or non-numeric field '" + field + "'");
    return obj[field].get<double>();
}

}  // namespace

std::vector<TraceJob> parse_trace(const std::string& text) {
    std::vector<TraceJob> jobs;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = "trace line " + std::to_string(line_no);

        nlohmann::json obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded()) throw SimError(where + ": not valid JSON");
        if (!obj.is_object()) throw SimError(where + ": expected a JSON object");

        TraceJob job;
        job.arrival_s = require_number(obj, "arrival_s", where);
        if (job.arrival_s < 0) throw SimError(where + ": arrival_s must be >= 0");
        if (!obj.contains("tool_id") || !obj["tool_id"].is_string())
            throw SimError(where + ": missing or non-string field 'tool_id'");
        job.tool_id = obj["tool_id"].get<std::string>();
        job.service_s = require_number(obj, "service_s", where);
        if (job.service_s <= 0) throw SimError(where + ": service_s must be > 0");
        if (obj.contains("input_gb")) {
            if (!obj["input_gb"].is_number())
                throw SimError(where + ": field 'input_gb' must be a number");
            job.input_gb = obj["input_gb"].get<double>();
            if (job.input_gb < 0) throw SimError(where + ": input_gb must be >= 0");
        }
        if (obj.contains("user")) {
            if (!obj["user"].is_string())
                throw SimError(where + ": field 'user' must be a string");
            job.user = obj["user"].get<std::string>();
        }
        if (obj.contains("roles")) {
            if (!obj["roles"].is_array())
                throw SimError(where + ": field 'roles' must be a list of strings");
            for (const auto& r : obj["roles"]) {
                if (!r.is_string()) throw SimError(where + ": field 'roles' must be a list of strings");
                job.roles.push_back(r.get<std::string>());
            }
        }
        jobs.push_back(std::move(job));
    }
    std::stable_sort(jobs.begin(), jobs.end(),
                     [](const TraceJob& a, const TraceJob& b) { return a.arrival_s < b.arrival_s; });
    return jobs;
}

std::vector<TraceJob> load_trace(const std::string& path) {
    return parse_trace(sources::read_file(path));
}

std::vector<SimDestination> parse_destinations(const std::string& text) {
    nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw SimError("destinations file is not valid JSON");
    if (!doc.is_array()) throw SimError("destinations file must be a JSON list");

    std::vector<SimDestination> out;
    for (const auto& item : doc) {
        if (!item.is_object()) throw SimError("each destination must be a JSON object");
        SimDestination d;
        if (!item.contains("id") || !item["id"].is_string())
            throw SimError("destination is missing a string 'id'");
        d.id = item["id"].get<std::string>();
        const std::string where = "destination '" + d.id + "'";

        double cores = require_number(item, "total_cores", where);
        if (cores <= 0) throw SimError(where + ": total_cores must be > 0");
        d.total_cores = static_cast<long long>(cores);
        d.total_mem_gb = require_number(item, "total_mem_gb", where);
        if (d.total_mem_gb <= 0) throw SimError(where + ": total_mem_gb must be > 0");
        if (item.contains("total_gpus")) {
            double gpus = require_number(item, "total_gpus", where);
            if (gpus < 0) throw SimError(where + ": total_gpus must be >= 0");
            d.total_gpus = static_cast<long long>(gpus);
        }
        if (item.contains("background_load")) {
            if (!item["background_load"].is_array())
                throw SimError(where + ": background_load must be a list");
            for (const auto& span_json : item["background_load"]) {
                BackgroundSpan span;
                span.start_s = require_number(span_json, "start_s", where);
                span.end_s = require_number(span_json, "end_s", where);
                span.cores_occupied = require_number(span_json, "cores_occupied", where);
                if (span.start_s < 0 || span.end_s < span.start_s)
                    throw SimError(where + ": background span must have 0 <= start_s <= end_s");
                if (span.cores_occupied < 0 ||
                    span.cores_occupied > static_cast<double>(d.total_cores))
                    throw SimError(where + ": background occupancy exceeds total_cores");
                d.background.push_back(span);
            }
        }
        out.push_back(std::move(d));
    }
    return out;
}

std::vector<SimDestination> load_destinations(const std::string& path) {
    return parse_destinations(sources::read_file(path));
}

// ---------------------------------------------------------------------------
// Metrics serialization
// ---------------------------------------------------------------------------

nlohmann::ordered_json SimMetrics::to_json() const {
    nlohmann::ordered_json j;
    j["jobs_completed"] = jobs_completed;
    j["jobs_unschedulable"] = jobs_unschedulable;
    j["jobs_still_queued"] = jobs_still_queued;
    j["mean_wait_s"] = mean_wait_s;
    j["p50_wait_s"] = p50_wait_s;
    j["p95_wait_s"] = p95_wait_s;
    nlohmann::ordered_json per = nlohmann::ordered_json::object();
    for (const auto& [id, m] : per_destination) {
        nlohmann::ordered_json d;
        d["jobs"] = m.jobs;
        d["mean_wait_s"] = m.mean_wait_s;
        d["utilization_fraction"] = m.utilization_fraction;
        per[id] = std::move(d);
    }
    j["per_destination"] = std::move(per);
    return j;
}

// ---------------------------------------------------------------------------
// Event loop
// ---------------------------------------------------------------------------

namespace {

// Tie order at equal times: releases free capacity before anything else,
// background growth lands before arrivals see the snapshot.
enum EventKind { kRelease = 0, kBackgroundStart = 1, kArrival = 2 };

struct Event {
    double time = 0;
    int kind = kArrival;
    std::uint64_t seq = 0;
    int dest = -1;       // release / background events
    bool is_job = false;  // distinguishes job completion from background end
    double cores = 0;    // released job cores or background delta
    double mem = 0;
    double gpus = 0;
    std::size_t job = 0;  // trace index
};

struct EventLater {
    bool operator()(const Event& a, const Event& b) const {
        if (a.time != b.time) return a.time > b.time;
        if (a.kind != b.kind) return a.kind > b.kind;
        return a.seq > b.seq;
    }
};

struct QueuedJob {
    std::size_t index;
    double cores, mem, gpus;
    double arrival;
    double service;
};

struct DestState {
    const SimDestination* spec = nullptr;
    double job_cores = 0, job_mem = 0, job_gpus = 0;
    double bg_cores = 0;
    std::deque<QueuedJob> queue;

    double busy_core_seconds = 0;
    double last_change = 0;
    long long started = 0;
    double wait_sum = 0;

    void integrate_to(double t) {
        busy_core_seconds += job_cores * (t - last_change);
        last_change = t;
    }
};

double percentile(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0;
    std::size_t rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
    if (rank == 0) rank = 1;
    return sorted[std::min(rank, sorted.size()) - 1];
}

}  // namespace

SimMetrics run_simulation(const config::ResolvedConfig& cfg,
                          const std::vector<SimDestination>& destinations,
                          const std::vector<TraceJob>& trace, const rank::Strategy& strategy,
                          std::uint64_t seed, const OccupancyHook& hook) {
    std::vector<DestState> dests(destinations.size());
    std::map<std::string, int> dest_index;
    for (std::size_t i = 0; i < destinations.size(); ++i) {
        if (!cfg.doc.destinations.find(destinations[i].id))
            throw SimError("destination '" + destinations[i].id +
                           "' is not defined in the configuration");
        if (dest_index.count(destinations[i].id))
            throw SimError("duplicate destination '" + destinations[i].id + "'");
        dests[i].spec = &destinations[i];
        dest_index[destinations[i].id] = static_cast<int>(i);
    }

    std::priority_queue<Event, std::vector<Event>, EventLater> events;
    std::uint64_t seq = 0;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        Event e;
        e.time = trace[i].arrival_s;
        e.kind = kArrival;
        e.seq = seq++;
        e.job = i;
        events.push(e);
    }
    for (std::size_t i = 0; i < destinations.size(); ++i) {
        for (const auto& span : destinations[i].background) {
            Event start;
            start.time = span.start_s;
            start.kind = kBackgroundStart;
            start.seq = seq++;
            start.dest = static_cast<int>(i);
            start.cores = span.cores_occupied;
            events.push(start);
            Event end;
            end.time = span.end_s;
            end.kind = kRelease;
            end.seq = seq++;
            end.dest = static_cast<int>(i);
            end.cores = -span.cores_occupied;
            events.push(end);
        }
    }

    std::vector<double> waits;
    waits.reserve(trace.size());
    long long completed = 0, unschedulable = 0;
    double last_completion = 0;

    auto observe = [&hook](double t, const DestState& d) {
        if (!hook) return;
        OccupancySample s;
        s.time = t;
        s.destination = d.spec;
        s.job_cores = d.job_cores;
        s.background_cores = d.bg_cores;
        s.job_mem_gb = d.job_mem;
        s.job_gpus = d.job_gpus;
        hook(s);
    };

    auto try_start = [&](DestState& d, double t) {
        while (!d.queue.empty()) {
            const QueuedJob& head = d.queue.front();
            double free_cores = static_cast<double>(d.spec->total_cores) - d.job_cores - d.bg_cores;
            double free_mem = d.spec->total_mem_gb - d.job_mem;
            double free_gpus = static_cast<double>(d.spec->total_gpus) - d.job_gpus;
            if (head.cores > free_cores || head.mem > free_mem || head.gpus > free_gpus) break;

            d.integrate_to(t);
            d.job_cores += head.cores;
            d.job_mem += head.mem;
            d.job_gpus += head.gpus;
            d.started += 1;
            double wait = t - head.arrival;
            d.wait_sum += wait;
            waits.push_back(wait);

            Event release;
            release.time = t + head.service;
            release.kind = kRelease;
            release.seq = seq++;
            release.dest = static_cast<int>(&d - dests.data());
            release.is_job = true;
            release.cores = head.cores;
            release.mem = head.mem;
            release.gpus = head.gpus;
            release.job = head.index;
            events.push(release);

            d.queue.pop_front();
            observe(t, d);
        }
    };

    while (!events.empty()) {
        Event e = events.top();
        events.pop();

        if (e.kind == kArrival) {
            const TraceJob& tj = trace[e.job];
            rank::LoadSnapshot snapshot;
            for (const auto& d : dests) {
                double total = static_cast<double>(d.spec->total_cores);
                double occupied = std::min(d.job_cores + d.bg_cores, total);
                snapshot.entries[d.spec->id] = occupied / total * 100.0;
            }
            dispatch::JobContext job;
            job.tool_id = tj.tool_id;
            job.user = tj.user;
            job.roles = tj.roles;
            job.input_size_gb = tj.input_gb;

            rank::Strategy strat = strategy;
            strat.seed = rank::mix_seed(seed + static_cast<std::uint64_t>(e.job));

            dispatch::DispatchDecision decision;
            try {
                decision = dispatch::dispatch(cfg, job, strat, &snapshot);
            } catch (const dispatch::DispatchError&) {
                unschedulable += 1;
                continue;
            }
            auto it = dest_index.find(decision.destination_id);
            if (it == dest_index.end())
                throw SimError("dispatch chose destination '" + decision.destination_id +
                               "', which is not simulated");
            DestState& d = dests[static_cast<std::size_t>(it->second)];
            d.queue.push_back({e.job, static_cast<double>(decision.cores), decision.mem_gb,
                               static_cast<double>(decision.gpus), e.time, tj.service_s});
            try_start(d, e.time);
        } else if (e.kind == kBackgroundStart) {
            DestState& d = dests[static_cast<std::size_t>(e.dest)];
            d.bg_cores += e.cores;
            observe(e.time, d);
        } else {  // kRelease: job completion or background end
            DestState& d = dests[static_cast<std::size_t>(e.dest)];
            if (e.is_job) {
                d.integrate_to(e.time);
                d.job_cores -= e.cores;
                d.job_mem -= e.mem;
                d.job_gpus -= e.gpus;
                completed += 1;
                last_completion = std::max(last_completion, e.time);
            } else {
                d.bg_cores += e.cores;  // negative delta
            }
            observe(e.time, d);
            try_start(d, e.time);
        }
    }

    SimMetrics metrics;
    metrics.jobs_completed = completed;
    metrics.jobs_unschedulable = unschedulable;
    for (auto& d : dests) {
        metrics.jobs_still_queued += static_cast<long long>(d.queue.size());
        d.integrate_to(last_completion > d.last_change ? last_completion : d.last_change);
    }

    std::vector<double> sorted = waits;
    std::sort(sorted.begin(), sorted.end());
    if (!sorted.empty()) {
        double sum = 0;
        for (double w : sorted) sum += w;
        metrics.mean_wait_s = sum / static_cast<double>(sorted.size());
        metrics.p50_wait_s = percentile(sorted, 0.50);
        metrics.p95_wait_s = percentile(sorted, 0.95);
    }
    for (const auto& d : dests) {
        DestinationMetrics dm;
        dm.jobs = d.started;
        dm.mean_wait_s = d.started > 0 ? d.wait_sum / static_cast<double>(d.started) : 0;
        double capacity = static_cast<double>(d.spec->total_cores) * last_completion;
        dm.utilization_fraction = capacity > 0 ? d.busy_core_seconds / capacity : 0;
        metrics.per_destination[d.spec->id] = dm;
    }
    return metrics;
}

// ---------------------------------------------------------------------------
// Strategy comparison
// ---------------------------------------------------------------------------

Comparison compare_strategies(const config::ResolvedConfig& cfg,
                              const std::vector<SimDestination>& destinations,
                              const std::vector<TraceJob>& trace,
                              const std::vector<StrategyRun>& runs, std::uint64_t seed) {
    Comparison out;
    for (const auto& run : runs)
        out.results.emplace_back(run.name,
                                 run_simulation(cfg, destinations, trace, run.strategy, seed));
    return out;
}

nlohmann::ordered_json Comparison::to_json() const {
    nlohmann::ordered_json j;
    j["baseline"] = results.empty() ? "" : results.front().first;
    nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
    for (const auto& [name, m] : results) metrics[name] = m.to_json();
    j["results"] = std::move(metrics);

    nlohmann::ordered_json deltas = nlohmann::ordered_json::object();
    if (!results.empty()) {
        double base = results.front().second.mean_wait_s;
        for (const auto& [name, m] : results) {
            if (base > 0)
                deltas[name] = (m.mean_wait_s - base) / base * 100.0;
            else
                deltas[name] = nullptr;
        }
    }
    j["mean_wait_delta_pct"] = std::move(deltas);
    return j;
}

}  // namespace vortex::sim
