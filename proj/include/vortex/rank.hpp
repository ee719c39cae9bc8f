#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vortex/config.hpp"

namespace vortex::rank {

// Utilization feed: destination id -> percent allocated, 0..100. Destinations
// absent from the map count as fully loaded.
struct LoadSnapshot {
    std::map<std::string, double> entries;
    std::optional<std::int64_t> captured_at_unix;

    bool operator==(const LoadSnapshot&) const = default;
};

enum class StrategyKind { Default, LeastLoaded, RandomWeighted };

// CLI spellings: default | least-loaded | random.
std::optional<StrategyKind> strategy_from_name(std::string_view name);
const char* strategy_name(StrategyKind kind);

struct Strategy {
    StrategyKind kind = StrategyKind::Default;
    std::uint64_t seed = 0;
};

struct Candidate {
    std::string id;
    const config::EntityDef* entity = nullptr;
    int score = 0;  // tag preference score against the flattened job

    bool operator==(const Candidate&) const = default;
};

// Stable sort by score descending; ties keep input (declaration) order.
std::vector<Candidate> rank_default(std::vector<Candidate> candidates);

// Sort key (-score, load ascending); missing load entries count as 100.
std::vector<Candidate> rank_least_loaded(std::vector<Candidate> candidates,
                                         const LoadSnapshot& load);

// Random permutation by repeated weighted sampling without replacement,
// weight = max(score, 0) + 1; deterministic per seed.
std::vector<Candidate> rank_random_weighted(std::vector<Candidate> candidates,
                                            std::uint64_t seed);

// Applies the strategy. LeastLoaded without a snapshot falls back to seeded
// weighted-random.
std::vector<Candidate> order_candidates(std::vector<Candidate> candidates,
                                        const Strategy& strategy, const LoadSnapshot* load);

struct FetchOutcome {
    bool ok = false;
    LoadSnapshot snapshot;
    std::string message;  // failure description when !ok

    static FetchOutcome failure(std::string msg) {
        FetchOutcome out;
        out.message = std::move(msg);
        return out;
    }
};

// Reads a load feed from a local path or http(s) URL. Any fetch, parse,
// range, or staleness problem yields a failure outcome, never an exception:
// callers fall back to weighted-random. now_unix is injectable for tests and
// defaults to the current wall clock.
FetchOutcome fetch_load(const std::string& source, double staleness_limit_s = 300.0,
                        std::optional<std::int64_t> now_unix = std::nullopt);

// Parses a feed document already in hand; bare {"id": pct} objects take
// fetched_at_unix as their capture time.
FetchOutcome parse_load_feed(const std::string& text, std::optional<std::int64_t> fetched_at_unix);

// "2024-05-01T12:00:00Z" (or with +hh:mm offset) -> unix seconds.
std::optional<std::int64_t> parse_rfc3339(const std::string& text);

// SplitMix64 step; used to derive per-decision seeds deterministically.
std::uint64_t mix_seed(std::uint64_t x);

}  // namespace vortex::rank
