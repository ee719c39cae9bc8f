#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "vortex/config.hpp"
#include "vortex/rank.hpp"

namespace vortex::sim {

struct SimError : VortexError {
    using VortexError::VortexError;
};

struct TraceJob {
    double arrival_s = 0;
    std::string tool_id;
    std::optional<std::string> user;
    std::vector<std::string> roles;
    double input_gb = 0;
    double service_s = 0;

    bool operator==(const TraceJob&) const = default;
};

struct BackgroundSpan {
    double start_s = 0;
    double end_s = 0;
    double cores_occupied = 0;

    bool operator==(const BackgroundSpan&) const = default;
};

struct SimDestination {
    std::string id;  // must name a configured destination
    long long total_cores = 0;
    double total_mem_gb = 0;
    long long total_gpus = 0;
    std::vector<BackgroundSpan> background;

    bool operator==(const SimDestination&) const = default;
};

struct DestinationMetrics {
    long long jobs = 0;  // jobs started here
    double mean_wait_s = 0;
    double utilization_fraction = 0;

    bool operator==(const DestinationMetrics&) const = default;
};

struct SimMetrics {
    long long jobs_completed = 0;
    long long jobs_unschedulable = 0;
    long long jobs_still_queued = 0;
    double mean_wait_s = 0;
    double p50_wait_s = 0;
    double p95_wait_s = 0;
    std::map<std::string, DestinationMetrics> per_destination;

    nlohmann::ordered_json to_json() const;
    bool operator==(const SimMetrics&) const = default;
};

// Fired at every occupancy change; lets tests assert capacity safety.
struct OccupancySample {
    double time = 0;
    const SimDestination* destination = nullptr;
    double job_cores = 0;
    double background_cores = 0;  // nominal background occupancy at this time
    double job_mem_gb = 0;
    double job_gpus = 0;
};
using OccupancyHook = std::function<void(const OccupancySample&)>;

// Line-delimited JSON, one TraceJob per line; validated and sorted by
// arrival. Throws SimError with the offending line number.
std::vector<TraceJob> parse_trace(const std::string& text);
std::vector<TraceJob> load_trace(const std::string& path);

// JSON list of SimDestination records.
std::vector<SimDestination> parse_destinations(const std::string& text);
std::vector<SimDestination> load_destinations(const std::string& path);

// Deterministic discrete-event replay: dispatch at arrival with a load
// snapshot of that instant, per-destination FIFO queues, head-of-line start
// when capacity fits. Ties in event time break completion-before-arrival,
// then by sequence number.
SimMetrics run_simulation(const config::ResolvedConfig& cfg,
                          const std::vector<SimDestination>& destinations,
                          const std::vector<TraceJob>& trace, const rank::Strategy& strategy,
                          std::uint64_t seed, const OccupancyHook& hook = {});

struct StrategyRun {
    std::string name;
    rank::Strategy strategy;
};

struct Comparison {
    std::vector<std::pair<std::string, SimMetrics>> results;  // run order preserved

    // Side-by-side metrics plus each run's mean-wait delta against the first.
    nlohmann::ordered_json to_json() const;
};

Comparison compare_strategies(const config::ResolvedConfig& cfg,
                              const std::vector<SimDestination>& destinations,
                              const std::vector<TraceJob>& trace,
                              const std::vector<StrategyRun>& runs, std::uint64_t seed);

}  // namespace vortex::sim
