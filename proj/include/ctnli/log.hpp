#pragma once

#include <initializer_list>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>

namespace ctnli::log {

enum class Level { Debug, Info, Warn, Error };

// Events are written as one JSON object per line:
//   {"level":"warn","event":"duplicate-word","word":"aspirin","line":12}
// The sink defaults to std::cerr; writes are serialized.
void set_sink(std::ostream* sink);
void set_min_level(Level level);

using Field = std::pair<std::string_view, std::string>;

void event(Level level, std::string_view name, std::initializer_list<Field> fields = {});

inline void info(std::string_view name, std::initializer_list<Field> fields = {}) {
    event(Level::Info, name, fields);
}
inline void warn(std::string_view name, std::initializer_list<Field> fields = {}) {
    event(Level::Warn, name, fields);
}

}  // namespace ctnli::log
