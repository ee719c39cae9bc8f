#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vortex::tags {

// Claim strength for merging: Require > Prefer > Accept. Reject is absolute
// and never coexists with another claim on the same name.
enum class Category { Require, Prefer, Accept, Reject };

// Each tag name appears under exactly one category.
using TagSet = std::map<std::string, Category>;

const char* to_string(Category c);
std::optional<Category> category_from_string(std::string_view s);

// Pairwise compatibility matrix; nullopt models "not tagged".
bool pair_compatible(std::optional<Category> a, std::optional<Category> b);

struct MergeOutcome {
    TagSet merged;
    std::vector<std::string> conflicts;  // tag names that cannot coexist
    bool ok() const { return conflicts.empty(); }
};

// Entity-merge semantics: one-sided names carry over unchanged; names on both
// sides must be pair-compatible (all offenders reported) and resolve to the
// stronger claim.
MergeOutcome merge_tag_sets(const TagSet& stronger, const TagSet& weaker);

// Match-time rule: every name in the union of both sets must be
// pair-compatible, treating absence as "not tagged".
bool match_tags(const TagSet& job, const TagSet& destination);

// Default rank score: +1 per preferred tag present on the other side,
// -1 per preferred tag absent, counted symmetrically for both sides.
int preference_score(const TagSet& job, const TagSet& destination);

}  // namespace vortex::tags
