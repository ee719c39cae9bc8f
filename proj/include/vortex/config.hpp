#pragma once

#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "vortex/diagnostics.hpp"
#include "vortex/expr.hpp"
#include "vortex/tags.hpp"

namespace vortex::config {

struct ConfigError : VortexError {
    using VortexError::VortexError;
};

// The four scheduling tag lists as written in a document. A list that is
// absent stays absent so that merging can replace per category.
struct SchedulingBlock {
    std::optional<std::vector<std::string>> require, prefer, accept, reject;

    bool empty() const { return !require && !prefer && !accept && !reject; }
    tags::TagSet tag_set() const;
    static SchedulingBlock from_tag_set(const tags::TagSet& set);

    bool operator==(const SchedulingBlock&) const = default;
};

// Every property an entity can carry except rules and inherits; rule
// overrides are exactly this set.
struct EntityFields {
    std::optional<expr::Expression> cores, mem, gpus;
    std::map<std::string, std::string> env;     // name -> template
    std::map<std::string, std::string> params;  // name -> template
    SchedulingBlock scheduling;

    // Destination-only: job admission bounds and clamp ceilings.
    std::optional<double> min_accepted_cores, min_accepted_mem, min_accepted_gpus;
    std::optional<double> max_accepted_cores, max_accepted_mem, max_accepted_gpus;
    std::optional<double> max_cores, max_mem, max_gpus;

    bool operator==(const EntityFields&) const = default;
};

struct RuleDef;

struct EntityDef : EntityFields {
    std::vector<RuleDef> rules;
    std::optional<std::string> inherits;

    bool operator==(const EntityDef&) const;
};

struct RuleDef {
    expr::Expression condition;  // the 'if' expression, must evaluate to boolean
    std::optional<std::string> id;
    EntityFields overrides;

    bool operator==(const RuleDef&) const = default;
};

// Applies 'over' on top of 'base': set fields win, env/params merge key-wise,
// scheduling lists replace per category, rules concatenate base-then-over.
// Shared by document merging and rule application.
EntityFields merge_fields(const EntityFields& base, const EntityFields& over);
EntityDef merge_entities(const EntityDef& base, const EntityDef& over);

// Like merge_entities but scheduling tags follow the tag algebra with the
// 'over' side as the stronger claim. Incompatible claims are reported through
// diags (as errors at 'path') and resolve in favour of 'over' so callers can
// decide whether to continue. Used for inheritance and request-side stacking.
EntityDef combine_entities(const EntityDef& base, const EntityDef& over, const std::string& path,
                           std::vector<Diagnostic>& diags);

struct Entry {
    std::string key;  // regex pattern for tools/users/roles, literal id for destinations
    EntityDef entity;

    bool operator==(const Entry&) const = default;
};

struct Section {
    std::vector<Entry> entries;  // declaration order

    const Entry* find(std::string_view key) const;
    Entry* find(std::string_view key);
    bool operator==(const Section&) const = default;
};

struct GlobalSection {
    std::optional<std::string> default_inherits;
    bool operator==(const GlobalSection&) const = default;
};

struct ConfigDoc {
    GlobalSection global;
    Section tools, users, roles, destinations;
    std::vector<Diagnostic> diagnostics;  // parse-time, carried through merging

    bool operator==(const ConfigDoc& other) const;
};

// Anchored matcher for one tools/users/roles key. Patterns without regex
// metacharacters compare as plain strings; others go through std::regex after
// a cheap positional-prefix rejection test.
class CompiledPattern {
public:
    CompiledPattern() = default;
    static CompiledPattern compile(const std::string& pattern, std::string* error);

    bool valid() const { return valid_; }
    bool matches(std::string_view name) const;

private:
    std::string pattern_;
    bool valid_ = false;
    bool literal_ = false;
    struct Atom {
        char ch;
        bool any;
    };
    std::vector<Atom> prefix_;  // positional quick-reject filter
    std::regex re_;
};

struct ResolvedConfig {
    ConfigDoc doc;  // effective entities: inheritance applied, inherits cleared
    std::optional<std::string> default_entity;  // global default id, for lookup fallback
    std::vector<Diagnostic> diagnostics;        // resolve-time problems

    std::vector<CompiledPattern> tool_patterns, user_patterns, role_patterns;

    // Last declared full match wins; nullptr when nothing matches.
    const Entry* match_tool(std::string_view tool_id) const;
    const Entry* match_user(std::string_view user_name) const;
    // All role entries matching any of the given role names, declaration order.
    std::vector<const Entry*> match_roles(const std::vector<std::string>& role_names) const;
};

// Parses one configuration document. Throws ConfigError only when the text is
// not parseable at all; schema and expression problems become diagnostics.
ConfigDoc parse_document(const std::string& text);

// Reads each local path or http(s) URL and parses it, in source order.
// Remote fetches are cached under cache_dir (default resolution: see
// sources.hpp); a stale cached copy is used with a warning when the remote is
// unreachable. Throws sources::FetchError when a source cannot be read at
// all and ConfigError when its text is not parseable.
std::vector<ConfigDoc> load_sources(const std::vector<std::string>& sources,
                                    const std::string& cache_dir = "");

// Later documents override earlier ones; same-key entities deep-merge.
ConfigDoc merge_documents(const std::vector<ConfigDoc>& docs);

ResolvedConfig resolve_inheritance(const ConfigDoc& doc);

// All invariant violations: carried parse/resolve diagnostics plus bounds
// ordering, misplaced destination-only fields, duplicate rule ids.
std::vector<Diagnostic> validate(const ResolvedConfig& config);

}  // namespace vortex::config
