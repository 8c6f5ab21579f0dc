#include "json_io.hpp"

#include <atomic>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "ctnli/error.hpp"

namespace ctnli::detail {

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

json read_json_file(const std::filesystem::path& path, bool reject_duplicate_top_keys) {
    const std::string text = read_text_file(path);
    std::set<std::string> seen;
    std::string duplicate;
    json::parser_callback_t cb = [&](int depth, json::parse_event_t event, json& parsed) {
        if (reject_duplicate_top_keys && depth == 1 && event == json::parse_event_t::key) {
            auto key = parsed.get<std::string>();
            if (!seen.insert(key).second && duplicate.empty()) duplicate = key;
        }
        return true;
    };
    json doc;
    try {
        doc = json::parse(text, cb);
    } catch (const json::parse_error& e) {
        throw InputError(path.string() + ": malformed JSON: " + e.what());
    }
    if (!duplicate.empty())
        throw InputError(path.string() + ": duplicate key \"" + duplicate + "\"");
    return doc;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
    static std::atomic<unsigned long> counter{0};
    auto tmp = path;
    tmp += ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id())) +
           "." + std::to_string(counter.fetch_add(1));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw InputError("cannot write " + path.string());
        out << text;
        out.flush();
        if (!out) throw InputError("write failed for " + path.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw InputError("cannot move temporary file into " + path.string());
    }
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

}  // namespace ctnli::detail
