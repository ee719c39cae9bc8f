#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace vortex {

enum class Severity { Warning, Error };

// A structured problem report tied to a location in the configuration,
// e.g. {Error, "tools/hisat2.*/cores", "expected expression"}.
struct Diagnostic {
    Severity severity = Severity::Error;
    std::string path;
    std::string message;

    bool operator==(const Diagnostic&) const = default;
};

inline const char* to_string(Severity s) {
    return s == Severity::Error ? "error" : "warning";
}

inline std::string render(const Diagnostic& d) {
    std::string out = to_string(d.severity);
    out += ": ";
    if (!d.path.empty()) {
        out += d.path;
        out += ": ";
    }
    out += d.message;
    return out;
}

inline bool has_errors(const std::vector<Diagnostic>& diags) {
    for (const auto& d : diags)
        if (d.severity == Severity::Error) return true;
    return false;
}

// Base class for all hard failures raised by the engine.
struct VortexError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace vortex
