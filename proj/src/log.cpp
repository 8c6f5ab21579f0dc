#include "ctnli/log.hpp"

#include <iostream>
#include <mutex>

#include <json.hpp>

namespace ctnli::log {

namespace {

std::mutex g_mutex;
std::ostream* g_sink = &std::cerr;
Level g_min = Level::Info;

const char* level_name(Level l) {
    switch (l) {
        case Level::Debug: return "debug";
        case Level::Info: return "info";
        case Level::Warn: return "warn";
        case Level::Error: return "error";
    }
    return "info";
}

}  // namespace

void set_sink(std::ostream* sink) {
    std::lock_guard lock(g_mutex);
    g_sink = sink;
}

void set_min_level(Level level) {
    std::lock_guard lock(g_mutex);
    g_min = level;
}

void event(Level level, std::string_view name, std::initializer_list<Field> fields) {
    std::lock_guard lock(g_mutex);
    if (!g_sink || level < g_min) return;
    nlohmann::ordered_json line;
    line["level"] = level_name(level);
    line["event"] = name;
    for (const auto& [key, value] : fields) line[std::string(key)] = value;
    *g_sink << line.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
}

}  // namespace ctnli::log
