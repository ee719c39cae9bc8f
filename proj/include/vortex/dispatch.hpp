#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "vortex/config.hpp"
#include "vortex/rank.hpp"
#include "vortex/tags.hpp"

namespace vortex::dispatch {

// Every pipeline failure names the stage it came from, so "combine:
// incompatible tag 'training'" reads directly off what().
struct DispatchError : VortexError {
    DispatchError(std::string stage_name, const std::string& message)
        : VortexError(stage_name + ": " + message), stage(std::move(stage_name)) {}
    std::string stage;
};

struct JobContext {
    std::string tool_id;
    std::optional<std::string> user;
    std::vector<std::string> roles;
    std::optional<double> input_size_gb;
};

// Post-flatten job requirements: concrete resources, templates still pending.
struct FlatEntity {
    double cores = 0;
    double mem = 0;  // GB
    double gpus = 0;
    std::map<std::string, std::string> env;
    std::map<std::string, std::string> params;
    tags::TagSet scheduling;

    bool operator==(const FlatEntity&) const = default;
};

struct DispatchDecision {
    std::string destination_id;
    long long cores = 0;
    double mem_gb = 0;
    long long gpus = 0;
    std::map<std::string, std::string> env;
    std::map<std::string, std::string> params;

    nlohmann::ordered_json to_json() const;
    bool operator==(const DispatchDecision&) const = default;
};

struct LookupResult {
    config::EntityDef tool;
    std::string tool_key;       // matching pattern, the default id, or empty
    bool tool_matched = false;  // a tools pattern matched the id
    bool used_default = false;  // fell back to the global default entity
    std::optional<std::pair<std::string, config::EntityDef>> user;
    std::vector<std::pair<std::string, config::EntityDef>> roles;  // declaration order
};

struct StageTrace {
    std::vector<std::string> notes;
    nlohmann::ordered_json data = nlohmann::ordered_json::object();
};

// The intermediate state of all six stages, for the CLI `explain` rendering.
struct DispatchTrace {
    StageTrace lookup, combine, flatten, match, rank, evaluate;

    nlohmann::ordered_json to_json() const;
    std::string render_text() const;
};

nlohmann::ordered_json fields_to_json(const config::EntityFields& fields);
nlohmann::ordered_json entity_to_json(const config::EntityDef& entity);
nlohmann::ordered_json tag_set_to_json(const tags::TagSet& set);
nlohmann::ordered_json flat_to_json(const FlatEntity& flat);

LookupResult lookup(const config::ResolvedConfig& cfg, const JobContext& job,
                    StageTrace* trace = nullptr);

// Stacks tool -> roles (declaration order) -> user; throws DispatchError on
// incompatible tag claims.
config::EntityDef combine(const LookupResult& found, StageTrace* trace = nullptr);

// Runs rules once each in order, then evaluates resource expressions in
// dependency order (cores, mem, gpus). Throws DispatchError on expression
// failures or non-boolean rule conditions.
FlatEntity flatten(const config::EntityDef& job_entity, const JobContext& job,
                   StageTrace* trace = nullptr);

// Candidates in destination declaration order; a destination qualifies when
// each resource lies within its accepted bounds and the tag sets match.
std::vector<rank::Candidate> match(const FlatEntity& flat, const config::ResolvedConfig& cfg,
                                   StageTrace* trace = nullptr);

// Clamps to the destination's max_* bounds, rounds cores/gpus up to whole
// units (never past a declared bound), overlays destination env/params, and
// interpolates every template with the final values bound.
DispatchDecision evaluate(const FlatEntity& flat, const std::string& destination_id,
                          const config::EntityDef& destination, StageTrace* trace = nullptr,
                          const JobContext* job = nullptr);

// Full pipeline. When trace is given it is filled stage by stage, so on a
// DispatchError it holds everything up to the failing stage.
DispatchDecision dispatch(const config::ResolvedConfig& cfg, const JobContext& job,
                          const rank::Strategy& strategy = {},
                          const rank::LoadSnapshot* load = nullptr,
                          DispatchTrace* trace = nullptr);

}  // namespace vortex::dispatch
