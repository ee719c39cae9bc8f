#include "vortex/dispatch.hpp"

#include <cmath>
#include <set>
#include <variant>

namespace vortex::dispatch {

namespace {

std::string fmt_num(double v) {
    return expr::to_display_string(expr::Value(v));
}

nlohmann::ordered_json json_number(double v) {
    if (std::trunc(v) == v && std::abs(v) < 9.007199254740992e15)
        return static_cast<long long>(v);
    return v;
}

}  // namespace

nlohmann::ordered_json tag_set_to_json(const tags::TagSet& set) {
    config::SchedulingBlock block = config::SchedulingBlock::from_tag_set(set);
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    if (block.require) j["require"] = *block.require;
    if (block.prefer) j["prefer"] = *block.prefer;
    if (block.accept) j["accept"] = *block.accept;
    if (block.reject) j["reject"] = *block.reject;
    return j;
}

nlohmann::ordered_json fields_to_json(const config::EntityFields& fields) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    if (fields.cores) j["cores"] = fields.cores->source();
    if (fields.mem) j["mem"] = fields.mem->source();
    if (fields.gpus) j["gpus"] = fields.gpus->source();
    if (!fields.env.empty()) j["env"] = fields.env;
    if (!fields.params.empty()) j["params"] = fields.params;
    if (!fields.scheduling.empty()) j["scheduling"] = tag_set_to_json(fields.scheduling.tag_set());

    auto bound = [&j](const char* name, const std::optional<double>& v) {
        if (v) j[name] = json_number(*v);
    };
    bound("min_accepted_cores", fields.min_accepted_cores);
    bound("min_accepted_mem", fields.min_accepted_mem);
    bound("min_accepted_gpus", fields.min_accepted_gpus);
    bound("max_accepted_cores", fields.max_accepted_cores);
    bound("max_accepted_mem", fields.max_accepted_mem);
    bound("max_accepted_gpus", fields.max_accepted_gpus);
    bound("max_cores", fields.max_cores);
    bound("max_mem", fields.max_mem);
    bound("max_gpus", fields.max_gpus);
    return j;
}

nlohmann::ordered_json entity_to_json(const config::EntityDef& entity) {
    nlohmann::ordered_json j = fields_to_json(entity);
    if (!entity.rules.empty()) {
        nlohmann::ordered_json rules = nlohmann::ordered_json::array();
        for (const auto& rule : entity.rules) {
            nlohmann::ordered_json r;
            r["if"] = rule.condition.source();
            if (rule.id) r["id"] = *rule.id;
            nlohmann::ordered_json overrides = fields_to_json(rule.overrides);
            for (auto& [k, v] : overrides.items()) r[k] = v;
            rules.push_back(std::move(r));
        }
        j["rules"] = std::move(rules);
    }
    if (entity.inherits) j["inherits"] = *entity.inherits;
    return j;
}

nlohmann::ordered_json flat_to_json(const FlatEntity& flat) {
    nlohmann::ordered_json j;
    j["cores"] = json_number(flat.cores);
    j["mem"] = json_number(flat.mem);
    j["gpus"] = json_number(flat.gpus);
    j["env"] = flat.env;
    j["params"] = flat.params;
    j["scheduling"] = tag_set_to_json(flat.scheduling);
    return j;
}

nlohmann::ordered_json DispatchDecision::to_json() const {
    nlohmann::ordered_json j;
    j["destination_id"] = destination_id;
    j["cores"] = cores;
    j["mem_gb"] = json_number(mem_gb);
    j["gpus"] = gpus;
    j["env"] = env;
    j["params"] = params;
    return j;
}

nlohmann::ordered_json DispatchTrace::to_json() const {
    auto stage_json = [](const StageTrace& s) {
        nlohmann::ordered_json j;
        j["notes"] = s.notes;
        for (const auto& [k, v] : s.data.items()) j[k] = v;
        return j;
    };
    nlohmann::ordered_json j;
    j["lookup"] = stage_json(lookup);
    j["combine"] = stage_json(combine);
    j["flatten"] = stage_json(flatten);
    j["match"] = stage_json(match);
    j["rank"] = stage_json(rank);
    j["evaluate"] = stage_json(evaluate);
    return j;
}

std::string DispatchTrace::render_text() const {
    std::string out;
    auto stage_text = [&out](const char* name, const StageTrace& s) {
        if (s.notes.empty() && s.data.empty()) return;
        out += name;
        out += ":\n";
        for (const auto& note : s.notes) {
            out += "  ";
            out += note;
            out += "\n";
        }
    };
    stage_text("lookup", lookup);
    stage_text("combine", combine);
    stage_text("flatten", flatten);
    stage_text("match", match);
    stage_text("rank", rank);
    stage_text("evaluate", evaluate);
    return out;
}

// ---------------------------------------------------------------------------
// lookup
// ---------------------------------------------------------------------------

LookupResult lookup(const config::ResolvedConfig& cfg, const JobContext& job, StageTrace* trace) {
    LookupResult out;
    if (const config::Entry* hit = cfg.match_tool(job.tool_id)) {
        out.tool = hit->entity;
        out.tool_key = hit->key;
        out.tool_matched = true;
    } else if (cfg.default_entity) {
        if (const config::Entry* def = cfg.doc.tools.find(*cfg.default_entity)) {
            out.tool = def->entity;
            out.tool_key = def->key;
            out.used_default = true;
        }
    }
    if (job.user) {
        if (const config::Entry* hit = cfg.match_user(*job.user))
            out.user = {hit->key, hit->entity};
    }
    for (const config::Entry* entry : cfg.match_roles(job.roles))
        out.roles.emplace_back(entry->key, entry->entity);

    if (trace) {
        if (out.tool_matched)
            trace->notes.push_back("tool '" + job.tool_id + "': matched pattern '" + out.tool_key +
                                   "'");
        else if (out.used_default)
            trace->notes.push_back("tool '" + job.tool_id + "': no match, using default entity '" +
                                   out.tool_key + "'");
        else
            trace->notes.push_back("tool '" + job.tool_id + "': no matching entry");
        if (job.user) {
            if (out.user)
                trace->notes.push_back("user '" + *job.user + "': matched pattern '" +
                                       out.user->first + "'");
            else
                trace->notes.push_back("user '" + *job.user + "': no matching entry");
        }
        if (!job.roles.empty()) {
            std::string matched;
            for (const auto& [key, entity] : out.roles) {
                if (!matched.empty()) matched += ", ";
                matched += "'" + key + "'";
            }
            trace->notes.push_back("roles: " +
                                   (matched.empty() ? std::string("no matching entries")
                                                    : "matched " + matched));
        }
        trace->notes.push_back("destinations: " +
                               std::to_string(cfg.doc.destinations.entries.size()) + " defined");

        trace->data["tool_pattern"] =
            out.tool_key.empty() ? nlohmann::ordered_json() : nlohmann::ordered_json(out.tool_key);
        trace->data["tool_matched"] = out.tool_matched;
        trace->data["used_default"] = out.used_default;
        trace->data["user_pattern"] =
            out.user ? nlohmann::ordered_json(out.user->first) : nlohmann::ordered_json();
        nlohmann::ordered_json roles = nlohmann::ordered_json::array();
        for (const auto& [key, entity] : out.roles) roles.push_back(key);
        trace->data["role_patterns"] = std::move(roles);
        trace->data["destinations"] = cfg.doc.destinations.entries.size();
        trace->data["tool_entity"] = entity_to_json(out.tool);
    }
    return out;
}

// ---------------------------------------------------------------------------
// combine
// ---------------------------------------------------------------------------

config::EntityDef combine(const LookupResult& found, StageTrace* trace) {
    std::vector<Diagnostic> diags;
    config::EntityDef combined = found.tool;
    std::string stacking =
        found.tool_key.empty() ? "(empty tool entity)" : "tool '" + found.tool_key + "'";
    for (const auto& [key, entity] : found.roles) {
        combined = config::combine_entities(combined, entity, "combine", diags);
        stacking += " -> role '" + key + "'";
    }
    if (found.user) {
        combined = config::combine_entities(combined, found.user->second, "combine", diags);
        stacking += " -> user '" + found.user->first + "'";
    }
    for (const auto& d : diags)
        if (d.severity == Severity::Error) throw DispatchError("combine", d.message);

    if (trace) {
        trace->notes.push_back("stacking: " + stacking);
        if (combined.cores) trace->notes.push_back("cores: " + combined.cores->source());
        if (combined.mem) trace->notes.push_back("mem: " + combined.mem->source());
        if (combined.gpus) trace->notes.push_back("gpus: " + combined.gpus->source());
        if (!combined.scheduling.empty()) {
            trace->notes.push_back("scheduling: " +
                                   tag_set_to_json(combined.scheduling.tag_set()).dump());
        }
        trace->notes.push_back("rules: " + std::to_string(combined.rules.size()));
        trace->data["entity"] = entity_to_json(combined);
    }
    return combined;
}

// ---------------------------------------------------------------------------
// flatten
// ---------------------------------------------------------------------------

namespace {

expr::EvalContext base_context(const JobContext& job) {
    expr::EvalContext ctx;
    ctx.set("tool_id", job.tool_id);
    if (job.user) ctx.set("user", *job.user);
    ctx.set("roles", job.roles);
    if (job.input_size_gb) ctx.set("input_size", *job.input_size_gb);
    return ctx;
}

double eval_resource(const expr::Expression& e, const expr::EvalContext& ctx, const char* name) {
    expr::Value v = e.evaluate(ctx);
    if (!std::holds_alternative<double>(v))
        throw DispatchError("flatten", std::string(name) + " expression produced " +
                                           expr::type_name(v) + ", expected a number");
    double d = std::get<double>(v);
    return d < 0 ? 0.0 : d;
}

// Resources may depend on earlier ones (mem on cores, gpus on both), so bind
// in that order up to the last one the caller needs: 0 cores, 1 mem, 2 gpus.
void bind_resources(const config::EntityFields& fields, expr::EvalContext& ctx, int highest) {
    if (highest >= 0 && fields.cores)
        ctx.set("cores", eval_resource(*fields.cores, ctx, "cores"));
    if (highest >= 1 && fields.mem) ctx.set("mem", eval_resource(*fields.mem, ctx, "mem"));
    if (highest >= 2 && fields.gpus) ctx.set("gpus", eval_resource(*fields.gpus, ctx, "gpus"));
}

}  // namespace

FlatEntity flatten(const config::EntityDef& job_entity, const JobContext& job, StageTrace* trace) {
    config::EntityFields current = job_entity;
    const expr::EvalContext base = base_context(job);
    nlohmann::ordered_json rule_log = nlohmann::ordered_json::array();

    for (std::size_t i = 0; i < job_entity.rules.size(); ++i) {
        const config::RuleDef& rule = job_entity.rules[i];
        std::string label = rule.id ? *rule.id : "rules[" + std::to_string(i) + "]";

        int highest = -1;
        for (const auto& name : rule.condition.free_identifiers()) {
            if (name == "cores") highest = std::max(highest, 0);
            else if (name == "mem") highest = std::max(highest, 1);
            else if (name == "gpus") highest = std::max(highest, 2);
        }

        bool fired = false;
        try {
            expr::EvalContext ctx = base;
            bind_resources(current, ctx, highest);
            expr::Value v = rule.condition.evaluate(ctx);
            if (!std::holds_alternative<bool>(v))
                throw DispatchError("flatten", "rule '" + label +
                                                   "' condition must evaluate to a boolean, got " +
                                                   expr::type_name(v));
            fired = std::get<bool>(v);
        } catch (const expr::EvalError& e) {
            throw DispatchError("flatten", "rule '" + label + "': " + e.what());
        }
        if (fired) current = config::merge_fields(current, rule.overrides);

        if (trace) {
            trace->notes.push_back("rule '" + label + "' (if " + rule.condition.source() + "): " +
                                   (fired ? "fired" : "skipped"));
            nlohmann::ordered_json r;
            r["rule"] = label;
            r["if"] = rule.condition.source();
            r["fired"] = fired;
            rule_log.push_back(std::move(r));
        }
    }

    FlatEntity flat;
    try {
        expr::EvalContext ctx = base;
        if (current.cores) {
            flat.cores = eval_resource(*current.cores, ctx, "cores");
            ctx.set("cores", flat.cores);
        }
        if (current.mem) {
            flat.mem = eval_resource(*current.mem, ctx, "mem");
            ctx.set("mem", flat.mem);
        }
        if (current.gpus) flat.gpus = eval_resource(*current.gpus, ctx, "gpus");
    } catch (const expr::EvalError& e) {
        throw DispatchError("flatten", e.what());
    }
    flat.env = current.env;
    flat.params = current.params;
    flat.scheduling = current.scheduling.tag_set();

    if (trace) {
        trace->notes.push_back("cores: " + fmt_num(flat.cores) + ", mem: " + fmt_num(flat.mem) +
                               ", gpus: " + fmt_num(flat.gpus));
        trace->data["rules"] = std::move(rule_log);
        trace->data["entity"] = flat_to_json(flat);
    }
    return flat;
}

// ---------------------------------------------------------------------------
// match
// ---------------------------------------------------------------------------

namespace {

std::string exclusion_reason(const FlatEntity& flat, const config::EntityDef& dest) {
    struct Check {
        const char* name;
        double value;
        const std::optional<double>& lo;
        const std::optional<double>& hi;
    };
    const Check checks[] = {
        {"cores", flat.cores, dest.min_accepted_cores, dest.max_accepted_cores},
        {"mem", flat.mem, dest.min_accepted_mem, dest.max_accepted_mem},
        {"gpus", flat.gpus, dest.min_accepted_gpus, dest.max_accepted_gpus},
    };
    for (const auto& c : checks) {
        if (c.lo && c.value < *c.lo)
            return std::string(c.name) + " " + fmt_num(c.value) + " below min_accepted_" + c.name +
                   " " + fmt_num(*c.lo);
        if (c.hi && c.value > *c.hi)
            return std::string(c.name) + " " + fmt_num(c.value) + " exceeds max_accepted_" +
                   c.name + " " + fmt_num(*c.hi);
    }

    tags::TagSet dest_tags = dest.scheduling.tag_set();
    if (!tags::match_tags(flat.scheduling, dest_tags)) {
        std::set<std::string> names;
        for (const auto& [name, cat] : flat.scheduling) names.insert(name);
        for (const auto& [name, cat] : dest_tags) names.insert(name);
        for (const auto& name : names) {
            auto side = [](const tags::TagSet& set,
                           const std::string& n) -> std::optional<tags::Category> {
                auto it = set.find(n);
                if (it == set.end()) return std::nullopt;
                return it->second;
            };
            if (!tags::pair_compatible(side(flat.scheduling, name), side(dest_tags, name)))
                return "incompatible tag '" + name + "'";
        }
        return "incompatible tags";
    }
    return "";
}

}  // namespace

std::vector<rank::Candidate> match(const FlatEntity& flat, const config::ResolvedConfig& cfg,
                                   StageTrace* trace) {
    std::vector<rank::Candidate> out;
    nlohmann::ordered_json log;
    if (trace) log = nlohmann::ordered_json::array();

    for (const auto& entry : cfg.doc.destinations.entries) {
        std::string reason = exclusion_reason(flat, entry.entity);
        if (reason.empty()) {
            int score =
                tags::preference_score(flat.scheduling, entry.entity.scheduling.tag_set());
            out.push_back({entry.key, &entry.entity, score});
            if (trace) {
                trace->notes.push_back(entry.key + ": candidate (score " + std::to_string(score) +
                                       ")");
                nlohmann::ordered_json item;
                item["id"] = entry.key;
                item["outcome"] = "candidate";
                item["score"] = score;
                log.push_back(std::move(item));
            }
        } else if (trace) {
            trace->notes.push_back(entry.key + ": excluded (" + reason + ")");
            nlohmann::ordered_json item;
            item["id"] = entry.key;
            item["outcome"] = "excluded";
            item["reason"] = reason;
            log.push_back(std::move(item));
        }
    }
    if (trace) trace->data["destinations"] = std::move(log);
    return out;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

namespace {

long long ceil_within(double v, const std::optional<double>& max_bound) {
    double r = std::ceil(v);
    if (max_bound && r > *max_bound) r = std::floor(*max_bound);
    if (r < 0) r = 0;
    return static_cast<long long>(r);
}

}  // namespace

DispatchDecision evaluate(const FlatEntity& flat, const std::string& destination_id,
                          const config::EntityDef& destination, StageTrace* trace,
                          const JobContext* job) {
    double cores = flat.cores, mem = flat.mem, gpus = flat.gpus;
    std::vector<std::string> clamps;
    auto clamp = [&clamps](const char* name, double& value, const std::optional<double>& bound) {
        if (bound && value > *bound) {
            clamps.push_back(std::string(name) + " " + fmt_num(value) + " -> " + fmt_num(*bound) +
                             " (max_" + name + ")");
            value = *bound;
        }
    };
    clamp("cores", cores, destination.max_cores);
    clamp("mem", mem, destination.max_mem);
    clamp("gpus", gpus, destination.max_gpus);

    DispatchDecision decision;
    decision.destination_id = destination_id;
    decision.cores = ceil_within(cores, destination.max_cores);
    decision.mem_gb = mem;
    decision.gpus = ceil_within(gpus, destination.max_gpus);
    decision.env = flat.env;
    for (const auto& [k, v] : destination.env) decision.env[k] = v;
    decision.params = flat.params;
    for (const auto& [k, v] : destination.params) decision.params[k] = v;

    expr::EvalContext ctx;
    if (job) {
        ctx = base_context(*job);
    }
    ctx.set("cores", static_cast<double>(decision.cores));
    ctx.set("mem", decision.mem_gb);
    ctx.set("gpus", static_cast<double>(decision.gpus));

    for (auto& [name, tmpl] : decision.env) {
        try {
            tmpl = expr::interpolate(tmpl, ctx);
        } catch (const expr::EvalError& e) {
            throw DispatchError("evaluate", "env '" + name + "': " + e.what());
        }
    }
    for (auto& [name, tmpl] : decision.params) {
        try {
            tmpl = expr::interpolate(tmpl, ctx);
        } catch (const expr::EvalError& e) {
            throw DispatchError("evaluate", "param '" + name + "': " + e.what());
        }
    }

    if (trace) {
        trace->notes.push_back("destination: " + destination_id);
        for (const auto& c : clamps) trace->notes.push_back("clamped " + c);
        trace->notes.push_back("cores: " + std::to_string(decision.cores) +
                               ", mem_gb: " + fmt_num(decision.mem_gb) +
                               ", gpus: " + std::to_string(decision.gpus));
        trace->data["destination"] = destination_id;
        trace->data["clamps"] = clamps;
        trace->data["decision"] = decision.to_json();
    }
    return decision;
}

// ---------------------------------------------------------------------------
// dispatch
// ---------------------------------------------------------------------------

DispatchDecision dispatch(const config::ResolvedConfig& cfg, const JobContext& job,
                          const rank::Strategy& strategy, const rank::LoadSnapshot* load,
                          DispatchTrace* trace) {
    auto stage = [trace](StageTrace DispatchTrace::*member) {
        return trace ? &(trace->*member) : nullptr;
    };

    LookupResult found = lookup(cfg, job, stage(&DispatchTrace::lookup));
    config::EntityDef combined = combine(found, stage(&DispatchTrace::combine));
    FlatEntity flat = flatten(combined, job, stage(&DispatchTrace::flatten));
    std::vector<rank::Candidate> candidates = match(flat, cfg, stage(&DispatchTrace::match));
    if (candidates.empty()) throw DispatchError("match", "no destination accepts the job");

    bool fallback = strategy.kind == rank::StrategyKind::LeastLoaded && !load;
    std::vector<rank::Candidate> ordered = rank::order_candidates(candidates, strategy, load);

    if (trace) {
        StageTrace& r = trace->rank;
        r.notes.push_back(std::string("strategy: ") + rank::strategy_name(strategy.kind));
        if (fallback)
            r.notes.push_back("no usable load snapshot; falling back to weighted-random");
        nlohmann::ordered_json order = nlohmann::ordered_json::array();
        for (const auto& c : ordered) {
            std::string line = c.id + " (score " + std::to_string(c.score);
            nlohmann::ordered_json item;
            item["id"] = c.id;
            item["score"] = c.score;
            if (strategy.kind == rank::StrategyKind::LeastLoaded && load) {
                auto it = load->entries.find(c.id);
                double pct = it == load->entries.end() ? 100.0 : it->second;
                line += ", load " + fmt_num(pct);
                item["load"] = json_number(pct);
            }
            line += ")";
            r.notes.push_back(line);
            order.push_back(std::move(item));
        }
        r.data["strategy"] = rank::strategy_name(strategy.kind);
        r.data["fallback_weighted_random"] = fallback;
        r.data["order"] = std::move(order);
    }

    const rank::Candidate& top = ordered.front();
    return evaluate(flat, top.id, *top.entity, stage(&DispatchTrace::evaluate), &job);
}

}  // namespace vortex::dispatch
