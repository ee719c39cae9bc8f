#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "vortex/diagnostics.hpp"

namespace vortex::expr {

// Runtime value of an expression. Numbers are 64-bit floats; resource math
// never silently coerces strings.
using Value = std::variant<double, std::string, bool, std::vector<std::string>>;

const char* type_name(const Value& v);

// Rendering used by interpolation: integral numbers print without a decimal
// point, booleans print as true/false, lists join with ",".
std::string to_display_string(const Value& v);

bool values_equal(const Value& a, const Value& b);

struct ParseError : VortexError {
    ParseError(std::size_t offset, const std::string& message)
        : VortexError(message + " (at offset " + std::to_string(offset) + ")"),
          offset(offset),
          detail(message) {}
    std::size_t offset;
    std::string detail;
};

struct EvalError : VortexError {
    using VortexError::VortexError;
};

// Name bindings available during evaluation. Resource names (cores, mem,
// gpus) bind to numbers; tool_id and user to strings; roles to a string list.
struct EvalContext {
    std::map<std::string, Value> bindings;

    void set(std::string name, Value v) { bindings[std::move(name)] = std::move(v); }
    const Value* find(const std::string& name) const {
        auto it = bindings.find(name);
        return it == bindings.end() ? nullptr : &it->second;
    }
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

// A parsed expression. Keeps its exact source text for diagnostics.
class Expression {
public:
    Expression() = default;

    // Grammar: number and quoted-string literals, identifiers, true/false,
    // + - * / %, comparisons, and/or/not, parentheses, and the calls
    // int float min max ceil floor contains. Throws ParseError.
    static Expression parse(std::string source);

    Value evaluate(const EvalContext& ctx) const;  // throws EvalError

    // Identifiers referenced anywhere in the tree, each listed once.
    std::vector<std::string> free_identifiers() const;

    const std::string& source() const { return source_; }
    bool valid() const { return root_ != nullptr; }

    // Expressions compare by source text; two parses of the same text are equal.
    bool operator==(const Expression& other) const { return source_ == other.source_; }

private:
    std::string source_;
    NodePtr root_;
};

// Replaces each {expr} segment of the template with the rendering of its
// value; {{ and }} escape literal braces. Errors are reported with the
// segment's position in the template.
std::string interpolate(const std::string& tmpl, const EvalContext& ctx);

// Parses every {expr} segment without evaluating anything; returns an error
// description, or nullopt when the template is well formed.
std::optional<std::string> check_template(const std::string& tmpl);

}  // namespace vortex::expr
