#include "vortex/rank.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <random>

#include "json.hpp"

#include "vortex/sources.hpp"

namespace vortex::rank {

std::optional<StrategyKind> strategy_from_name(std::string_view name) {
    if (name == "default") return StrategyKind::Default;
    if (name == "least-loaded") return StrategyKind::LeastLoaded;
    if (name == "random") return StrategyKind::RandomWeighted;
    return std::nullopt;
}

const char* strategy_name(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::Default: return "default";
        case StrategyKind::LeastLoaded: return "least-loaded";
        case StrategyKind::RandomWeighted: return "random";
    }
    return "default";
}

std::vector<Candidate> rank_default(std::vector<Candidate> candidates) {
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
    return candidates;
}

std::vector<Candidate> rank_least_loaded(std::vector<Candidate> candidates,
                                         const LoadSnapshot& load) {
    auto load_of = [&load](const Candidate& c) {
        auto it = load.entries.find(c.id);
        return it == load.entries.end() ? 100.0 : it->second;
    };
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](const Candidate& a, const Candidate& b) {
                         if (a.score != b.score) return a.score > b.score;
                         return load_of(a) < load_of(b);
                     });
    return candidates;
}

std::vector<Candidate> rank_random_weighted(std::vector<Candidate> candidates,
                                            std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<Candidate> pool = std::move(candidates);
    std::vector<Candidate> out;
    out.reserve(pool.size());
    while (!pool.empty()) {
        double total = 0;
        for (const auto& c : pool) total += std::max(c.score, 0) + 1;
        // 53-bit uniform in [0,1); avoids distribution classes so the draw
        // sequence is identical on every standard library.
        double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        double target = u * total;
        std::size_t pick = pool.size() - 1;
        double cumulative = 0;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            cumulative += std::max(pool[i].score, 0) + 1;
            if (target < cumulative) {
                pick = i;
                break;
            }
        }
        out.push_back(std::move(pool[pick]));
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    return out;
}

std::vector<Candidate> order_candidates(std::vector<Candidate> candidates,
                                        const Strategy& strategy, const LoadSnapshot* load) {
    switch (strategy.kind) {
        case StrategyKind::Default:
            return rank_default(std::move(candidates));
        case StrategyKind::LeastLoaded:
            if (load) return rank_least_loaded(std::move(candidates), *load);
            return rank_random_weighted(std::move(candidates), strategy.seed);
        case StrategyKind::RandomWeighted:
            return rank_random_weighted(std::move(candidates), strategy.seed);
    }
    return candidates;
}

std::optional<std::int64_t> parse_rfc3339(const std::string& text) {
    int year, month, day, hour, minute;
    double second;
    int consumed = 0;
    if (std::sscanf(text.c_str(), "%4d-%2d-%2d%*1[Tt]%2d:%2d:%lf%n", &year, &month, &day, &hour,
                    &minute, &second, &consumed) != 6)
        return std::nullopt;

    std::string rest = text.substr(static_cast<std::size_t>(consumed));
    std::int64_t offset_s = 0;
    if (rest == "Z" || rest == "z") {
        offset_s = 0;
    } else if (!rest.empty() && (rest[0] == '+' || rest[0] == '-')) {
        int oh, om;
        if (std::sscanf(rest.c_str() + 1, "%2d:%2d", &oh, &om) != 2) return std::nullopt;
        offset_s = (rest[0] == '-' ? -1 : 1) * (oh * 3600 + om * 60);
    } else {
        return std::nullopt;
    }

    std::tm tm{};
    tm.tm_year = year - 1900;
    tm.tm_mon = month - 1;
    tm.tm_mday = day;
    tm.tm_hour = hour;
    tm.tm_min = minute;
    tm.tm_sec = 0;
    std::int64_t base = static_cast<std::int64_t>(timegm(&tm));
    return base + static_cast<std::int64_t>(second) - offset_s;
}

FetchOutcome parse_load_feed(const std::string& text,
                             std::optional<std::int64_t> fetched_at_unix) {
    nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_discarded()) return FetchOutcome::failure("load feed is not valid JSON");
    if (!doc.is_object()) return FetchOutcome::failure("load feed must be a JSON object");

    FetchOutcome out;
    const nlohmann::json* entries = &doc;
    if (doc.contains("load")) {
        if (!doc["load"].is_object())
            return FetchOutcome::failure("'load' must be an object of destination loads");
        entries = &doc["load"];
        if (doc.contains("captured_at")) {
            if (!doc["captured_at"].is_string())
                return FetchOutcome::failure("'captured_at' must be an RFC3339 timestamp string");
            auto ts = parse_rfc3339(doc["captured_at"].get<std::string>());
            if (!ts)
                return FetchOutcome::failure("cannot parse captured_at timestamp '" +
                                             doc["captured_at"].get<std::string>() + "'");
            out.snapshot.captured_at_unix = ts;
        }
    }
    if (!out.snapshot.captured_at_unix) out.snapshot.captured_at_unix = fetched_at_unix;

    for (const auto& [key, value] : entries->items()) {
        if (entries == &doc && key == "captured_at") continue;
        if (!value.is_number())
            return FetchOutcome::failure("load for '" + key + "' must be a number");
        double v = value.get<double>();
        if (v < 0.0 || v > 100.0)
            return FetchOutcome::failure("load for '" + key + "' is outside [0,100]: " +
                                         std::to_string(v));
        out.snapshot.entries[key] = v;
    }
    out.ok = true;
    return out;
}

FetchOutcome fetch_load(const std::string& source, double staleness_limit_s,
                        std::optional<std::int64_t> now_unix) {
    std::int64_t now = now_unix ? *now_unix
                                : std::chrono::duration_cast<std::chrono::seconds>(
                                      std::chrono::system_clock::now().time_since_epoch())
                                      .count();
    std::string text;
    try {
        text = sources::is_url(source) ? sources::http_get(source) : sources::read_file(source);
    } catch (const sources::FetchError& e) {
        return FetchOutcome::failure(e.what());
    }

    FetchOutcome out = parse_load_feed(text, now);
    if (!out.ok) return out;

    if (out.snapshot.captured_at_unix) {
        double age = static_cast<double>(now - *out.snapshot.captured_at_unix);
        if (age > staleness_limit_s)
            return FetchOutcome::failure("load feed is stale: captured " +
                                         std::to_string(static_cast<long long>(age)) +
                                         "s ago, limit " +
                                         std::to_string(static_cast<long long>(staleness_limit_s)) +
                                         "s");
    }
    return out;
}

std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace vortex::rank
