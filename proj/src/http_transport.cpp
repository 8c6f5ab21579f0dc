#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "ctnli/llmclient.hpp"
#include "json_io.hpp"

namespace ctnli {

using detail::json;

HttpChatTransport::HttpChatTransport(std::string endpoint, std::string api_key,
                                     std::chrono::seconds timeout)
    : api_key_(std::move(api_key)), timeout_(timeout) {
    const auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos)
        throw InputError("endpoint must be an absolute http(s) URL: " + endpoint);
    const auto path_start = endpoint.find('/', scheme_end + 3);
    base_ = endpoint.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : endpoint.substr(path_start);
}

TransportResponse HttpChatTransport::send(const TransportRequest& request) {
    httplib::Client cli(base_);
    cli.set_connection_timeout(timeout_);
    cli.set_read_timeout(timeout_);
    cli.set_write_timeout(timeout_);

    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    const json body = {{"model", request.model_name},
                       {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})},
                       {"temperature", request.decoding.temperature},
                       {"max_tokens", request.decoding.max_tokens}};
    auto res = cli.Post(path_, headers, body.dump(), "application/json");
    if (!res) return {0, ""};
    if (res->status < 200 || res->status >= 300) return {res->status, res->body};

    const json doc = json::parse(res->body, nullptr, false);
    if (doc.is_discarded()) return {502, ""};
    const json::json_pointer content("/choices/0/message/content");
    if (!doc.contains(content) || !doc.at(content).is_string()) return {502, ""};
    return {res->status, doc.at(content).get<std::string>()};
}

}  // namespace ctnli
