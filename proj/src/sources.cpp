#include "vortex/sources.hpp"

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <httplib.h>

namespace fs = std::filesystem;

namespace vortex::sources {

bool is_url(std::string_view s) {
    return s.rfind("http://", 0) == 0 || s.rfind("https://", 0) == 0;
}

std::string default_cache_dir() {
    if (const char* env = std::getenv("VORTEX_CACHE_DIR"); env && *env) return env;
    if (const char* xdg = std::getenv("XDG_CACHE_HOME"); xdg && *xdg)
        return (fs::path(xdg) / "vortex").string();
    if (const char* home = std::getenv("HOME"); home && *home)
        return (fs::path(home) / ".cache" / "vortex").string();
    return (fs::temp_directory_path() / "vortex-cache").string();
}

std::string cache_key(const std::string& url) {
    // FNV-1a, 64-bit
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : url) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FetchError("cannot read file '" + path + "'");
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

namespace {

struct UrlParts {
    std::string base;  // scheme://host[:port]
    std::string path;  // /rest, always nonempty
};

UrlParts split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw FetchError("malformed URL '" + url + "'");
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

}  // namespace

std::string http_get(const std::string& url, int timeout_s) {
    UrlParts parts = split_url(url);
    httplib::Client client(parts.base);
    client.set_connection_timeout(timeout_s, 0);
    client.set_read_timeout(timeout_s, 0);
    client.set_follow_location(true);
    auto res = client.Get(parts.path);
    if (!res)
        throw FetchError("fetch failed for '" + url + "': " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw FetchError("fetch failed for '" + url + "': HTTP " + std::to_string(res->status));
    return res->body;
}

std::string load_text(const std::string& path_or_url, const std::string& cache_dir,
                      std::vector<Diagnostic>* diags) {
    if (!is_url(path_or_url)) return read_file(path_or_url);

    fs::path dir = cache_dir.empty() ? fs::path(default_cache_dir()) : fs::path(cache_dir);
    fs::path cached = dir / (cache_key(path_or_url) + ".yml");

    std::string fetch_problem;
    try {
        std::string body = http_get(path_or_url);
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (!ec) write_file(cached, body);
        return body;
    } catch (const FetchError& err) {
        fetch_problem = err.what();
    }

    if (fs::exists(cached)) {
        if (diags)
            diags->push_back({Severity::Warning, path_or_url,
                              "using cached copy: " + fetch_problem});
        return read_file(cached.string());
    }
    throw FetchError(fetch_problem + " (no cached copy)");
}

}  // namespace vortex::sources
