#include "vortex/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <set>

#include <yaml-cpp/yaml.h>

#include "vortex/sources.hpp"

namespace vortex::config {

// ---------------------------------------------------------------------------
// SchedulingBlock
// ---------------------------------------------------------------------------

tags::TagSet SchedulingBlock::tag_set() const {
    tags::TagSet out;
    auto add = [&out](const std::optional<std::vector<std::string>>& list, tags::Category cat) {
        if (!list) return;
        for (const auto& name : *list) out.emplace(name, cat);
    };
    // Strongest category first so a stray duplicate resolves high.
    add(require, tags::Category::Require);
    add(prefer, tags::Category::Prefer);
    add(accept, tags::Category::Accept);
    add(reject, tags::Category::Reject);
    return out;
}

SchedulingBlock SchedulingBlock::from_tag_set(const tags::TagSet& set) {
    SchedulingBlock out;
    auto push = [](std::optional<std::vector<std::string>>& list, const std::string& name) {
        if (!list) list.emplace();
        list->push_back(name);
    };
    for (const auto& [name, cat] : set) {
        switch (cat) {
            case tags::Category::Require: push(out.require, name); break;
            case tags::Category::Prefer: push(out.prefer, name); break;
            case tags::Category::Accept: push(out.accept, name); break;
            case tags::Category::Reject: push(out.reject, name); break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Entity merging
// ---------------------------------------------------------------------------

EntityFields merge_fields(const EntityFields& base, const EntityFields& over) {
    EntityFields out = base;
    if (over.cores) out.cores = over.cores;
    if (over.mem) out.mem = over.mem;
    if (over.gpus) out.gpus = over.gpus;
    for (const auto& [k, v] : over.env) out.env[k] = v;
    for (const auto& [k, v] : over.params) out.params[k] = v;
    if (over.scheduling.require) out.scheduling.require = over.scheduling.require;
    if (over.scheduling.prefer) out.scheduling.prefer = over.scheduling.prefer;
    if (over.scheduling.accept) out.scheduling.accept = over.scheduling.accept;
    if (over.scheduling.reject) out.scheduling.reject = over.scheduling.reject;
    if (over.min_accepted_cores) out.min_accepted_cores = over.min_accepted_cores;
    if (over.min_accepted_mem) out.min_accepted_mem = over.min_accepted_mem;
    if (over.min_accepted_gpus) out.min_accepted_gpus = over.min_accepted_gpus;
    if (over.max_accepted_cores) out.max_accepted_cores = over.max_accepted_cores;
    if (over.max_accepted_mem) out.max_accepted_mem = over.max_accepted_mem;
    if (over.max_accepted_gpus) out.max_accepted_gpus = over.max_accepted_gpus;
    if (over.max_cores) out.max_cores = over.max_cores;
    if (over.max_mem) out.max_mem = over.max_mem;
    if (over.max_gpus) out.max_gpus = over.max_gpus;
    return out;
}

EntityDef merge_entities(const EntityDef& base, const EntityDef& over) {
    EntityDef out;
    static_cast<EntityFields&>(out) = merge_fields(base, over);
    out.rules = base.rules;
    out.rules.insert(out.rules.end(), over.rules.begin(), over.rules.end());
    out.inherits = over.inherits ? over.inherits : base.inherits;
    return out;
}

bool EntityDef::operator==(const EntityDef& other) const {
    return static_cast<const EntityFields&>(*this) == static_cast<const EntityFields&>(other) &&
           rules == other.rules && inherits == other.inherits;
}

const Entry* Section::find(std::string_view key) const {
    for (const auto& e : entries)
        if (e.key == key) return &e;
    return nullptr;
}

Entry* Section::find(std::string_view key) {
    for (auto& e : entries)
        if (e.key == key) return &e;
    return nullptr;
}

bool ConfigDoc::operator==(const ConfigDoc& other) const {
    // Semantic equality; diagnostics are transport, not content.
    return global == other.global && tools == other.tools && users == other.users &&
           roles == other.roles && destinations == other.destinations;
}

// ---------------------------------------------------------------------------
// Pattern compilation
// ---------------------------------------------------------------------------

namespace {

bool is_meta(char c) {
    return std::strchr(".^$|()[]{}*+?\\", c) != nullptr;
}

bool is_quantifier(char c) {
    return c == '*' || c == '+' || c == '?' || c == '{';
}

}  // namespace

CompiledPattern CompiledPattern::compile(const std::string& pattern, std::string* error) {
    CompiledPattern p;
    p.pattern_ = pattern;

    bool has_meta = std::any_of(pattern.begin(), pattern.end(), is_meta);
    if (!has_meta) {
        p.literal_ = true;
        p.valid_ = true;
        return p;
    }

    try {
        p.re_ = std::regex(pattern, std::regex::ECMAScript);
    } catch (const std::regex_error& e) {
        if (error) *error = e.what();
        return p;
    }
    p.valid_ = true;

    // Positional prefix filter: leading chars the anchored regex must match
    // one-for-one ('.' matches anything). Stops at the first construct it
    // cannot model; the filter may only under-reject, never over-reject.
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        char c = pattern[i];
        if (c == '.') {
            p.prefix_.push_back({0, true});
        } else if (c == '\\' && i + 1 < pattern.size() &&
                   !std::isalnum(static_cast<unsigned char>(pattern[i + 1]))) {
            p.prefix_.push_back({pattern[i + 1], false});
            ++i;
        } else if (is_meta(c)) {
            if (is_quantifier(c) && !p.prefix_.empty()) p.prefix_.pop_back();
            break;
        } else {
            p.prefix_.push_back({c, false});
        }
    }
    if (pattern.find('|') != std::string::npos) p.prefix_.clear();
    return p;
}

bool CompiledPattern::matches(std::string_view name) const {
    if (!valid_) return false;
    if (literal_) return name == pattern_;
    if (name.size() < prefix_.size()) return false;
    for (std::size_t i = 0; i < prefix_.size(); ++i)
        if (!prefix_[i].any && name[i] != prefix_[i].ch) return false;
    return std::regex_match(name.begin(), name.end(), re_);
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace {

void add_diag(std::vector<Diagnostic>& diags, Severity sev, std::string path, std::string msg) {
    diags.push_back({sev, std::move(path), std::move(msg)});
}

std::optional<std::string> scalar_string(const YAML::Node& node) {
    if (!node.IsScalar()) return std::nullopt;
    return node.as<std::string>();
}

void parse_expression_field(const YAML::Node& node, const std::string& path,
                            std::optional<expr::Expression>& slot,
                            std::vector<Diagnostic>& diags) {
    auto text = scalar_string(node);
    if (!text) {
        add_diag(diags, Severity::Error, path, "expected a scalar expression");
        return;
    }
    try {
        slot = expr::Expression::parse(*text);
    } catch (const expr::ParseError& e) {
        add_diag(diags, Severity::Error, path, std::string("expression parse error: ") + e.what());
    }
}

void parse_number_field(const YAML::Node& node, const std::string& path,
                        std::optional<double>& slot, std::vector<Diagnostic>& diags) {
    try {
        slot = node.as<double>();
    } catch (const YAML::Exception&) {
        add_diag(diags, Severity::Error, path, "expected a number");
    }
}

void parse_template_map(const YAML::Node& node, const std::string& path,
                        std::map<std::string, std::string>& out,
                        std::vector<Diagnostic>& diags) {
    if (!node.IsMap()) {
        add_diag(diags, Severity::Error, path, "expected a mapping of name to value");
        return;
    }
    for (const auto& kv : node) {
        std::string name = kv.first.as<std::string>();
        auto value = scalar_string(kv.second);
        if (!value) {
            add_diag(diags, Severity::Error, path + "/" + name, "expected a scalar value");
            continue;
        }
        if (auto problem = expr::check_template(*value))
            add_diag(diags, Severity::Error, path + "/" + name, *problem);
        out[name] = *value;
    }
}

void parse_scheduling(const YAML::Node& node, const std::string& path, SchedulingBlock& out,
                      std::vector<Diagnostic>& diags) {
    if (!node.IsMap()) {
        add_diag(diags, Severity::Error, path, "expected a mapping of category to tag list");
        return;
    }
    auto parse_list = [&](const YAML::Node& n,
                          const std::string& cat) -> std::optional<std::vector<std::string>> {
        if (!n.IsSequence()) {
            add_diag(diags, Severity::Error, path + "/" + cat, "expected a list of tag names");
            return std::vector<std::string>{};
        }
        std::vector<std::string> list;
        for (const auto& item : n) {
            auto s = scalar_string(item);
            if (!s) {
                add_diag(diags, Severity::Error, path + "/" + cat, "tag names must be scalars");
                continue;
            }
            list.push_back(*s);
        }
        return list;
    };
    for (const auto& kv : node) {
        std::string key = kv.first.as<std::string>();
        if (key == "require") out.require = parse_list(kv.second, key);
        else if (key == "prefer") out.prefer = parse_list(kv.second, key);
        else if (key == "accept") out.accept = parse_list(kv.second, key);
        else if (key == "reject") out.reject = parse_list(kv.second, key);
        else add_diag(diags, Severity::Warning, path + "/" + key, "unknown scheduling category");
    }
    // Each tag name may appear under exactly one category; keep the first
    // (strongest listed) occurrence and drop the rest.
    std::set<std::string> seen;
    auto dedupe = [&](std::optional<std::vector<std::string>>& list) {
        if (!list) return;
        auto& v = *list;
        for (auto it = v.begin(); it != v.end();) {
            if (!seen.insert(*it).second) {
                add_diag(diags, Severity::Error, path,
                         "tag '" + *it + "' listed under multiple categories");
                it = v.erase(it);
            } else {
                ++it;
            }
        }
    };
    dedupe(out.require);
    dedupe(out.prefer);
    dedupe(out.accept);
    dedupe(out.reject);
}

// Handles one EntityFields key; returns false when the key is not a field.
bool parse_field_key(const std::string& key, const YAML::Node& value, const std::string& path,
                     EntityFields& out, std::vector<Diagnostic>& diags) {
    const std::string field_path = path + "/" + key;
    if (key == "cores") parse_expression_field(value, field_path, out.cores, diags);
    else if (key == "mem") parse_expression_field(value, field_path, out.mem, diags);
    else if (key == "gpus") parse_expression_field(value, field_path, out.gpus, diags);
    else if (key == "env") parse_template_map(value, field_path, out.env, diags);
    else if (key == "params") parse_template_map(value, field_path, out.params, diags);
    else if (key == "scheduling") parse_scheduling(value, field_path, out.scheduling, diags);
    else if (key == "min_accepted_cores") parse_number_field(value, field_path, out.min_accepted_cores, diags);
    else if (key == "min_accepted_mem") parse_number_field(value, field_path, out.min_accepted_mem, diags);
    else if (key == "min_accepted_gpus") parse_number_field(value, field_path, out.min_accepted_gpus, diags);
    else if (key == "max_accepted_cores") parse_number_field(value, field_path, out.max_accepted_cores, diags);
    else if (key == "max_accepted_mem") parse_number_field(value, field_path, out.max_accepted_mem, diags);
    else if (key == "max_accepted_gpus") parse_number_field(value, field_path, out.max_accepted_gpus, diags);
    else if (key == "max_cores") parse_number_field(value, field_path, out.max_cores, diags);
    else if (key == "max_mem") parse_number_field(value, field_path, out.max_mem, diags);
    else if (key == "max_gpus") parse_number_field(value, field_path, out.max_gpus, diags);
    else return false;
    return true;
}

void parse_rule(const YAML::Node& node, const std::string& path, std::vector<RuleDef>& out,
                std::vector<Diagnostic>& diags) {
    if (!node.IsMap()) {
        add_diag(diags, Severity::Error, path, "rule must be a mapping");
        return;
    }
    RuleDef rule;
    bool have_if = false;
    for (const auto& kv : node) {
        std::string key = kv.first.as<std::string>();
        if (key == "if") {
            auto text = scalar_string(kv.second);
            if (!text) {
                add_diag(diags, Severity::Error, path + "/if", "expected a scalar expression");
                return;
            }
            try {
                rule.condition = expr::Expression::parse(*text);
                have_if = true;
            } catch (const expr::ParseError& e) {
                add_diag(diags, Severity::Error, path + "/if",
                         std::string("expression parse error: ") + e.what());
                return;
            }
        } else if (key == "id") {
            if (auto s = scalar_string(kv.second)) rule.id = *s;
            else add_diag(diags, Severity::Error, path + "/id", "rule id must be a string");
        } else if (key == "rules" || key == "inherits") {
            add_diag(diags, Severity::Warning, path + "/" + key,
                     "'" + key + "' is not allowed inside a rule and is ignored");
        } else if (!parse_field_key(key, kv.second, path, rule.overrides, diags)) {
            add_diag(diags, Severity::Warning, path + "/" + key, "unknown field '" + key + "'");
        }
    }
    if (!have_if) {
        add_diag(diags, Severity::Error, path, "rule is missing its 'if' condition");
        return;
    }
    out.push_back(std::move(rule));
}

EntityDef parse_entity(const YAML::Node& node, const std::string& path,
                       std::vector<Diagnostic>& diags) {
    EntityDef entity;
    if (node.IsNull() || !node.IsDefined()) return entity;
    if (!node.IsMap()) {
        add_diag(diags, Severity::Error, path, "entity must be a mapping");
        return entity;
    }
    for (const auto& kv : node) {
        std::string key = kv.first.as<std::string>();
        if (key == "rules") {
            if (!kv.second.IsSequence()) {
                add_diag(diags, Severity::Error, path + "/rules", "expected a list of rules");
                continue;
            }
            std::size_t index = 0;
            for (const auto& item : kv.second) {
                parse_rule(item, path + "/rules[" + std::to_string(index) + "]", entity.rules,
                           diags);
                ++index;
            }
        } else if (key == "inherits") {
            if (auto s = scalar_string(kv.second)) entity.inherits = *s;
            else add_diag(diags, Severity::Error, path + "/inherits", "expected an entity id");
        } else if (!parse_field_key(key, kv.second, path, entity, diags)) {
            add_diag(diags, Severity::Warning, path + "/" + key, "unknown field '" + key + "'");
        }
    }
    return entity;
}

void parse_section(const YAML::Node& node, const std::string& name, Section& out,
                   std::vector<Diagnostic>& diags) {
    if (node.IsNull() || !node.IsDefined()) return;
    if (!node.IsMap()) {
        add_diag(diags, Severity::Error, name, "section must be a mapping of id to entity");
        return;
    }
    for (const auto& kv : node) {
        std::string key = kv.first.as<std::string>();
        std::string path = name + "/" + key;
        if (out.find(key)) {
            add_diag(diags, Severity::Error, path, "duplicate id-pattern in section");
            continue;
        }
        out.entries.push_back({key, parse_entity(kv.second, path, diags)});
    }
}

}  // namespace

ConfigDoc parse_document(const std::string& text) {
    ConfigDoc doc;
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("syntax error: ") + e.what());
    }
    if (!root.IsDefined() || root.IsNull()) return doc;
    if (!root.IsMap()) {
        add_diag(doc.diagnostics, Severity::Error, "", "top level must be a mapping");
        return doc;
    }
    for (const auto& kv : root) {
        std::string key = kv.first.as<std::string>();
        if (key == "global") {
            if (!kv.second.IsMap()) {
                add_diag(doc.diagnostics, Severity::Error, "global", "expected a mapping");
                continue;
            }
            for (const auto& gkv : kv.second) {
                std::string gkey = gkv.first.as<std::string>();
                if (gkey == "default_inherits") {
                    if (auto s = scalar_string(gkv.second)) doc.global.default_inherits = *s;
                    else
                        add_diag(doc.diagnostics, Severity::Error, "global/default_inherits",
                                 "expected an entity id");
                } else {
                    add_diag(doc.diagnostics, Severity::Warning, "global/" + gkey,
                             "unknown field '" + gkey + "'");
                }
            }
        } else if (key == "tools") {
            parse_section(kv.second, "tools", doc.tools, doc.diagnostics);
        } else if (key == "users") {
            parse_section(kv.second, "users", doc.users, doc.diagnostics);
        } else if (key == "roles") {
            parse_section(kv.second, "roles", doc.roles, doc.diagnostics);
        } else if (key == "destinations") {
            parse_section(kv.second, "destinations", doc.destinations, doc.diagnostics);
        } else {
            add_diag(doc.diagnostics, Severity::Error, key, "unknown top-level key '" + key + "'");
        }
    }
    return doc;
}

std::vector<ConfigDoc> load_sources(const std::vector<std::string>& sources,
                                    const std::string& cache_dir) {
    std::vector<ConfigDoc> docs;
    for (const auto& src : sources) {
        std::vector<Diagnostic> warnings;
        std::string text = sources::load_text(src, cache_dir, &warnings);
        ConfigDoc doc;
        try {
            doc = parse_document(text);
        } catch (const ConfigError& e) {
            throw ConfigError(src + ": " + e.what());
        }
        for (auto& d : doc.diagnostics) d.path = src + ": " + d.path;
        doc.diagnostics.insert(doc.diagnostics.begin(), warnings.begin(), warnings.end());
        docs.push_back(std::move(doc));
    }
    return docs;
}

// ---------------------------------------------------------------------------
// Merging documents
// ---------------------------------------------------------------------------

namespace {

void merge_section_into(Section& base, const Section& over) {
    for (const auto& e : over.entries) {
        if (Entry* existing = base.find(e.key))
            existing->entity = merge_entities(existing->entity, e.entity);
        else
            base.entries.push_back(e);
    }
}

}  // namespace

ConfigDoc merge_documents(const std::vector<ConfigDoc>& docs) {
    if (docs.empty()) throw ConfigError("merge_documents requires at least one document");
    ConfigDoc out = docs.front();
    for (std::size_t i = 1; i < docs.size(); ++i) {
        const ConfigDoc& over = docs[i];
        if (over.global.default_inherits)
            out.global.default_inherits = over.global.default_inherits;
        merge_section_into(out.tools, over.tools);
        merge_section_into(out.users, over.users);
        merge_section_into(out.roles, over.roles);
        merge_section_into(out.destinations, over.destinations);
        out.diagnostics.insert(out.diagnostics.end(), over.diagnostics.begin(),
                               over.diagnostics.end());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Inheritance resolution
// ---------------------------------------------------------------------------

EntityDef combine_entities(const EntityDef& base, const EntityDef& over, const std::string& path,
                           std::vector<Diagnostic>& diags) {
    EntityDef out;
    static_cast<EntityFields&>(out) = merge_fields(base, over);

    // Tags follow the scheduling algebra, the 'over' side stronger.
    tags::TagSet over_tags = over.scheduling.tag_set();
    tags::TagSet base_tags = base.scheduling.tag_set();
    if (!base_tags.empty() || !over_tags.empty()) {
        auto outcome = tags::merge_tag_sets(over_tags, base_tags);
        if (outcome.ok()) {
            out.scheduling = SchedulingBlock::from_tag_set(outcome.merged);
        } else {
            for (const auto& name : outcome.conflicts)
                add_diag(diags, Severity::Error, path, "incompatible tag '" + name + "'");
            // Recover with the stronger side's claim so callers can continue.
            tags::TagSet recovered = base_tags;
            for (const auto& [name, cat] : over_tags) recovered[name] = cat;
            out.scheduling = SchedulingBlock::from_tag_set(recovered);
        }
    }

    out.rules = base.rules;
    out.rules.insert(out.rules.end(), over.rules.begin(), over.rules.end());
    return out;
}

namespace {

class SectionResolver {
public:
    SectionResolver(const Section& in, std::string name,
                    const std::optional<std::string>& default_id,
                    std::vector<Diagnostic>& diags)
        : in_(in), name_(std::move(name)), default_id_(default_id), diags_(diags) {}

    Section run() {
        Section out;
        for (const auto& entry : in_.entries) {
            std::vector<std::string> stack;
            out.entries.push_back({entry.key, resolve(entry.key, stack)});
        }
        return out;
    }

private:
    EntityDef resolve(const std::string& key, std::vector<std::string>& stack) {
        if (auto it = done_.find(key); it != done_.end()) return it->second;

        const EntityDef& entity = in_.find(key)->entity;
        if (std::find(stack.begin(), stack.end(), key) != stack.end()) {
            std::string cycle;
            for (const auto& k : stack) cycle += k + " -> ";
            cycle += key;
            add_diag(diags_, Severity::Error, name_ + "/" + key,
                     "inheritance cycle: " + cycle);
            return strip(entity);
        }
        stack.push_back(key);

        std::optional<std::string> parent_key;
        if (entity.inherits) {
            if (in_.find(*entity.inherits)) {
                parent_key = entity.inherits;
            } else {
                add_diag(diags_, Severity::Error, name_ + "/" + key + "/inherits",
                         "inherits target '" + *entity.inherits + "' not found");
            }
        } else if (default_id_ && key != *default_id_ && in_.find(*default_id_)) {
            parent_key = default_id_;
        }

        EntityDef resolved;
        if (parent_key) {
            EntityDef parent = resolve(*parent_key, stack);
            resolved = combine_entities(parent, entity, name_ + "/" + key, diags_);
        } else {
            resolved = entity;
        }
        resolved.inherits.reset();
        stack.pop_back();
        done_.emplace(key, resolved);
        return resolved;
    }

    static EntityDef strip(EntityDef e) {
        e.inherits.reset();
        return e;
    }

    const Section& in_;
    std::string name_;
    const std::optional<std::string>& default_id_;
    std::vector<Diagnostic>& diags_;
    std::map<std::string, EntityDef> done_;
};

std::vector<CompiledPattern> compile_section_patterns(const Section& section,
                                                      const std::string& name,
                                                      std::vector<Diagnostic>& diags) {
    std::vector<CompiledPattern> out;
    out.reserve(section.entries.size());
    for (const auto& entry : section.entries) {
        std::string error;
        CompiledPattern p = CompiledPattern::compile(entry.key, &error);
        if (!p.valid())
            add_diag(diags, Severity::Error, name + "/" + entry.key,
                     "invalid pattern: " + error);
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace

ResolvedConfig resolve_inheritance(const ConfigDoc& doc) {
    ResolvedConfig out;
    out.default_entity = doc.global.default_inherits;
    out.doc.diagnostics = doc.diagnostics;

    const auto& def = doc.global.default_inherits;
    out.doc.tools = SectionResolver(doc.tools, "tools", def, out.diagnostics).run();
    out.doc.users = SectionResolver(doc.users, "users", def, out.diagnostics).run();
    out.doc.roles = SectionResolver(doc.roles, "roles", def, out.diagnostics).run();
    out.doc.destinations =
        SectionResolver(doc.destinations, "destinations", def, out.diagnostics).run();

    out.tool_patterns = compile_section_patterns(out.doc.tools, "tools", out.diagnostics);
    out.user_patterns = compile_section_patterns(out.doc.users, "users", out.diagnostics);
    out.role_patterns = compile_section_patterns(out.doc.roles, "roles", out.diagnostics);
    return out;
}

const Entry* ResolvedConfig::match_tool(std::string_view tool_id) const {
    const Entry* last = nullptr;
    for (std::size_t i = 0; i < doc.tools.entries.size(); ++i)
        if (tool_patterns[i].matches(tool_id)) last = &doc.tools.entries[i];
    return last;
}

const Entry* ResolvedConfig::match_user(std::string_view user_name) const {
    const Entry* last = nullptr;
    for (std::size_t i = 0; i < doc.users.entries.size(); ++i)
        if (user_patterns[i].matches(user_name)) last = &doc.users.entries[i];
    return last;
}

std::vector<const Entry*> ResolvedConfig::match_roles(
    const std::vector<std::string>& role_names) const {
    std::vector<const Entry*> out;
    for (std::size_t i = 0; i < doc.roles.entries.size(); ++i) {
        for (const auto& name : role_names) {
            if (role_patterns[i].matches(name)) {
                out.push_back(&doc.roles.entries[i]);
                break;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace {

struct BoundTriple {
    const char* name;
    const std::optional<double> EntityFields::*min_accepted;
    const std::optional<double> EntityFields::*max_accepted;
    const std::optional<double> EntityFields::*max_clamp;
};

constexpr BoundTriple kBounds[] = {
    {"cores", &EntityFields::min_accepted_cores, &EntityFields::max_accepted_cores,
     &EntityFields::max_cores},
    {"mem", &EntityFields::min_accepted_mem, &EntityFields::max_accepted_mem,
     &EntityFields::max_mem},
    {"gpus", &EntityFields::min_accepted_gpus, &EntityFields::max_accepted_gpus,
     &EntityFields::max_gpus},
};

bool any_destination_field(const EntityFields& f, std::string& which) {
    for (const auto& b : kBounds) {
        if (f.*(b.min_accepted)) { which = std::string("min_accepted_") + b.name; return true; }
        if (f.*(b.max_accepted)) { which = std::string("max_accepted_") + b.name; return true; }
        if (f.*(b.max_clamp)) { which = std::string("max_") + b.name; return true; }
    }
    return false;
}

std::string format_number(double v) {
    return expr::to_display_string(expr::Value(v));
}

void validate_entity(const std::string& section, const Entry& entry, bool is_destination,
                     std::vector<Diagnostic>& out) {
    const std::string path = section + "/" + entry.key;
    const EntityDef& e = entry.entity;

    for (const auto& b : kBounds) {
        const auto& lo = e.*(b.min_accepted);
        const auto& hi = e.*(b.max_accepted);
        if (lo && hi && *lo > *hi)
            add_diag(out, Severity::Error, path,
                     std::string("min_accepted_") + b.name + " (" + format_number(*lo) +
                         ") exceeds max_accepted_" + b.name + " (" + format_number(*hi) + ")");
    }

    if (!is_destination) {
        std::string which;
        if (any_destination_field(e, which))
            add_diag(out, Severity::Warning, path,
                     "destination-only field '" + which + "' on a " +
                         section.substr(0, section.size() - 1) + " entity");
        for (std::size_t i = 0; i < e.rules.size(); ++i) {
            if (any_destination_field(e.rules[i].overrides, which))
                add_diag(out, Severity::Warning, path + "/rules[" + std::to_string(i) + "]",
                         "destination-only field '" + which + "' in a rule override");
        }
    } else {
        if (e.cores || e.mem || e.gpus)
            add_diag(out, Severity::Warning, path,
                     "resource expressions on a destination are ignored");
        if (!e.rules.empty())
            add_diag(out, Severity::Warning, path, "rules on a destination are ignored");
    }

    std::set<std::string> rule_ids;
    for (const auto& rule : e.rules) {
        if (!rule.id) continue;
        if (!rule_ids.insert(*rule.id).second)
            add_diag(out, Severity::Error, path, "duplicate rule id '" + *rule.id + "'");
    }
}

}  // namespace

std::vector<Diagnostic> validate(const ResolvedConfig& config) {
    std::vector<Diagnostic> out = config.doc.diagnostics;
    out.insert(out.end(), config.diagnostics.begin(), config.diagnostics.end());

    for (const auto& entry : config.doc.tools.entries)
        validate_entity("tools", entry, false, out);
    for (const auto& entry : config.doc.users.entries)
        validate_entity("users", entry, false, out);
    for (const auto& entry : config.doc.roles.entries)
        validate_entity("roles", entry, false, out);
    for (const auto& entry : config.doc.destinations.entries)
        validate_entity("destinations", entry, true, out);
    return out;
}

}  // namespace vortex::config
