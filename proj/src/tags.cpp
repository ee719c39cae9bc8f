#include "vortex/tags.hpp"

namespace vortex::tags {

const char* to_string(Category c) {
    switch (c) {
        case Category::Require: return "require";
        case Category::Prefer: return "prefer";
        case Category::Accept: return "accept";
        case Category::Reject: return "reject";
    }
    return "?";
}

std::optional<Category> category_from_string(std::string_view s) {
    if (s == "require" || s == "required") return Category::Require;
    if (s == "prefer" || s == "preferred") return Category::Prefer;
    if (s == "accept" || s == "accepted") return Category::Accept;
    if (s == "reject" || s == "rejected") return Category::Reject;
    return std::nullopt;
}

bool pair_compatible(std::optional<Category> a, std::optional<Category> b) {
    // Reject tolerates only absence, on either side.
    if (a == Category::Reject || b == Category::Reject)
        return !a.has_value() || !b.has_value();
    // Require insists the other side carries the tag.
    if (a == Category::Require || b == Category::Require)
        return a.has_value() && b.has_value();
    // Prefer/Accept/absent combinations all coexist.
    return true;
}

namespace {

// Require > Prefer > Accept (enum order is already strongest-first).
Category stronger_claim(Category a, Category b) {
    return static_cast<int>(a) <= static_cast<int>(b) ? a : b;
}

}  // namespace

MergeOutcome merge_tag_sets(const TagSet& stronger, const TagSet& weaker) {
    MergeOutcome out;
    out.merged = stronger;
    for (const auto& [name, cat] : weaker) {
        auto it = out.merged.find(name);
        if (it == out.merged.end()) {
            out.merged.emplace(name, cat);
            continue;
        }
        if (!pair_compatible(it->second, cat)) {
            out.conflicts.push_back(name);
            continue;
        }
        it->second = stronger_claim(it->second, cat);
    }
    if (!out.conflicts.empty()) out.merged.clear();
    return out;
}

bool match_tags(const TagSet& job, const TagSet& destination) {
    auto category_of = [](const TagSet& set, const std::string& name) -> std::optional<Category> {
        auto it = set.find(name);
        if (it == set.end()) return std::nullopt;
        return it->second;
    };
    for (const auto& [name, cat] : job)
        if (!pair_compatible(cat, category_of(destination, name))) return false;
    for (const auto& [name, cat] : destination)
        if (!job.count(name) && !pair_compatible(std::nullopt, cat)) return false;
    return true;
}

int preference_score(const TagSet& job, const TagSet& destination) {
    int score = 0;
    auto side = [&score](const TagSet& preferring, const TagSet& other) {
        for (const auto& [name, cat] : preferring) {
            if (cat != Category::Prefer) continue;
            auto it = other.find(name);
            if (it != other.end() && it->second != Category::Reject)
                score += 1;
            else if (it == other.end())
                score -= 1;
        }
    };
    side(job, destination);
    side(destination, job);
    return score;
}

}  // namespace vortex::tags
