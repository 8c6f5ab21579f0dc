#pragma once

#include <string_view>

// Text of the data files shipped with the library, compiled in at build time.
namespace ctnli::resources {

extern const std::string_view kStopWords;
extern const std::string_view kPosLexicon;

}  // namespace ctnli::resources
