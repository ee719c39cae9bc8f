#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "vortex/diagnostics.hpp"

namespace vortex::sources {

struct FetchError : VortexError {
    using VortexError::VortexError;
};

bool is_url(std::string_view s);

// VORTEX_CACHE_DIR, else $XDG_CACHE_HOME/vortex, else ~/.cache/vortex.
std::string default_cache_dir();

// Hex digest used as the cache file name for a URL.
std::string cache_key(const std::string& url);

// Plain GET with redirects followed. Throws FetchError on any failure.
std::string http_get(const std::string& url, int timeout_s = 10);

// Reads a local file or fetches a URL. Successful fetches refresh the cache;
// on fetch failure a cached copy is returned with a warning diagnostic.
// Throws FetchError when nothing can be produced.
std::string load_text(const std::string& path_or_url, const std::string& cache_dir,
                      std::vector<Diagnostic>* diags);

std::string read_file(const std::string& path);  // throws FetchError

}  // namespace vortex::sources
