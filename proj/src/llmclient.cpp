#include "ctnli/llmclient.hpp"

#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#include "ctnli/log.hpp"
#include "json_io.hpp"

namespace ctnli {

using detail::json;

namespace {

constexpr std::string_view kSlot = "{statement}";
constexpr std::string_view kCacheMagic = "# ctnli-cache v1 ";

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 digest failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += kHex[digest[i] >> 4];
        out += kHex[digest[i] & 0xf];
    }
    return out;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

}  // namespace

std::string_view template_id(TemplateName name) {
    switch (name) {
        case TemplateName::NqaGenerate: return "nqa-generate";
        case TemplateName::SpEntail: return "sp-entail";
        case TemplateName::SpContradict: return "sp-contradict";
    }
    return "";
}

const PromptTemplate& builtin_template(TemplateName name) {
    static const PromptTemplate kNqa{
        TemplateName::NqaGenerate,
        "Please convert the statement to a multiple choice question that requires the numerical "
        "or quantitative reasoning, and each question has 3 choices, using the given template:\n"
        "Question: [Question]\n"
        "Choices: 1. [Choice 1]\n"
        "2. [Choice 2]\n"
        "3. [Choice 3]\n"
        "Correct Answer: [Correct Answer].\n"
        "{statement}"};
    static const PromptTemplate kEntail{TemplateName::SpEntail,
                                        "Please rephrase the given statement: {statement}"};
    static const PromptTemplate kContradict{
        TemplateName::SpContradict,
        "Please generate a contradictory statement based on the given statement, with a minor "
        "change: {statement}"};
    switch (name) {
        case TemplateName::NqaGenerate: return kNqa;
        case TemplateName::SpEntail: return kEntail;
        case TemplateName::SpContradict: return kContradict;
    }
    return kEntail;
}

std::string render_prompt(const PromptTemplate& tmpl, std::string_view statement) {
    const auto slot = tmpl.text.find(kSlot);
    if (slot == std::string::npos)
        throw std::invalid_argument("template has no {statement} slot");
    std::string out;
    out.reserve(tmpl.text.size() + statement.size());
    out.append(tmpl.text, 0, slot);
    out.append(statement);
    out.append(tmpl.text, slot + kSlot.size());
    return out;
}

std::string cache_key(const GenerationRequest& request, std::string_view rendered_prompt) {
    // Array form keeps field order fixed; %.17g keeps temperature exact.
    char temp[32];
    std::snprintf(temp, sizeof temp, "%.17g", request.decoding.temperature);
    const json canonical = json::array({request.model_name, template_id(request.template_name),
                                        rendered_prompt, temp, request.decoding.max_tokens});
    return sha256_hex(canonical.dump());
}

std::string cache_key(const GenerationRequest& request) {
    return cache_key(request,
                     render_prompt(builtin_template(request.template_name), request.statement));
}

bool is_transient_status(int status) {
    return status == 0 || status == 408 || status == 429 || (status >= 500 && status < 600);
}

ReplayTransport ReplayTransport::from_file(const std::filesystem::path& path) {
    const json doc = detail::read_json_file(path);
    if (!doc.is_object()) throw InputError(path.string() + ": replay file must be an object");
    auto read_map = [&](const json& obj, const std::string& where) {
        if (!obj.is_object()) throw InputError(path.string() + ": \"" + where + "\" must be an object");
        std::map<std::string, std::string> m;
        for (const auto& [key, value] : obj.items()) {
            if (!value.is_string())
                throw InputError(path.string() + ": response under \"" + where + "\" must be a string");
            m.emplace(key, value.get<std::string>());
        }
        return m;
    };
    std::map<std::string, std::string> by_prompt;
    std::map<std::pair<TemplateName, std::string>, std::string> by_statement;
    for (const auto& [key, value] : doc.items()) {
        if (key == "prompts") {
            by_prompt = read_map(value, key);
            continue;
        }
        std::optional<TemplateName> tmpl;
        for (auto t : {TemplateName::NqaGenerate, TemplateName::SpEntail, TemplateName::SpContradict})
            if (template_id(t) == key) tmpl = t;
        if (!tmpl) throw InputError(path.string() + ": unknown replay section \"" + key + "\"");
        for (auto& [statement, response] : read_map(value, key))
            by_statement.emplace(std::make_pair(*tmpl, statement), std::move(response));
    }
    return ReplayTransport(std::move(by_prompt), std::move(by_statement));
}

TransportResponse ReplayTransport::send(const TransportRequest& request) {
    if (auto it = by_prompt_.find(request.prompt); it != by_prompt_.end()) return {200, it->second};
    if (auto it = by_statement_.find({request.template_name, request.statement});
        it != by_statement_.end())
        return {200, it->second};
    return {404, ""};
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::filesystem::path ResponseCache::path_for(const std::string& key) const {
    return dir_ / (key + ".txt");
}

std::optional<CacheEntry> ResponseCache::get(const std::string& key) const {
    std::ifstream in(path_for(key), std::ios::binary);
    if (!in) return std::nullopt;
    std::string header;
    if (!std::getline(in, header) || !header.starts_with(kCacheMagic)) {
        log::warn("cache-entry-corrupt", {{"key", key}});
        return std::nullopt;
    }
    json meta = json::parse(header.substr(kCacheMagic.size()), nullptr, false);
    if (meta.is_discarded() || meta.value("key", "") != key) {
        log::warn("cache-entry-corrupt", {{"key", key}});
        return std::nullopt;
    }
    std::ostringstream body;
    body << in.rdbuf();
    return CacheEntry{key, body.str(), meta.value("timestamp", "")};
}

void ResponseCache::put(const CacheEntry& entry, const GenerationRequest& request) const {
    std::filesystem::create_directories(dir_);
    const json meta = {{"key", entry.key},
                       {"model", request.model_name},
                       {"template", template_id(request.template_name)},
                       {"temperature", request.decoding.temperature},
                       {"max_tokens", request.decoding.max_tokens},
                       {"timestamp", entry.timestamp}};
    detail::write_file_atomic(path_for(entry.key),
                              std::string(kCacheMagic) + meta.dump() + "\n" + entry.response_text);
}

LlmClient::LlmClient(std::filesystem::path cache_dir, Transport* transport, RetryPolicy retry,
                     std::size_t parallelism)
    : cache_(std::move(cache_dir)), transport_(transport), retry_(retry),
      parallelism_(parallelism == 0 ? 1 : parallelism) {
    if (retry_.attempts < 1) retry_.attempts = 1;
}

Generation LlmClient::generate(const GenerationRequest& request) {
    if (detail::trim(request.statement).empty())
        throw GenerationError("generation request with an empty statement");
    const auto prompt = render_prompt(builtin_template(request.template_name), request.statement);
    const auto key = cache_key(request, prompt);

    if (auto hit = cache_.get(key)) {
        {
            std::lock_guard lock(stats_mutex_);
            ++stats_.cache_hits;
        }
        log::event(log::Level::Debug, "cache-hit", {{"key", key}});
        return {hit->response_text, key, true};
    }
    {
        std::lock_guard lock(stats_mutex_);
        ++stats_.cache_misses;
    }
    log::event(log::Level::Debug, "cache-miss", {{"key", key}});
    if (!transport_)
        throw TransportError("no transport configured and no cached response for " + key, 0);

    const TransportRequest treq{request.model_name, prompt, request.decoding,
                                request.template_name, request.statement};
    auto backoff = retry_.initial_backoff;
    int last_status = 0;
    for (int attempt = 1; attempt <= retry_.attempts; ++attempt) {
        TransportResponse resp;
        try {
            resp = transport_->send(treq);
        } catch (const std::exception& e) {
            log::warn("transport-exception", {{"key", key}, {"what", e.what()}});
            resp = {0, ""};
        }
        {
            std::lock_guard lock(stats_mutex_);
            ++stats_.transport_calls;
        }
        last_status = resp.status;
        if (resp.status >= 200 && resp.status < 300) {
            if (detail::trim(resp.body).empty())
                throw GenerationError("empty response body for " + key);
            cache_.put({key, resp.body, utc_timestamp()}, request);
            return {resp.body, key, false};
        }
        if (!is_transient_status(resp.status))
            throw TransportError("transport returned status " + std::to_string(resp.status),
                                 resp.status);
        log::warn("transport-retry", {{"key", key},
                                      {"attempt", std::to_string(attempt)},
                                      {"status", std::to_string(resp.status)}});
        if (attempt < retry_.attempts && backoff.count() > 0) {
            std::this_thread::sleep_for(backoff);
            backoff = std::chrono::milliseconds(
                static_cast<long long>(static_cast<double>(backoff.count()) * retry_.multiplier));
        }
    }
    throw TransportError("transport failed after " + std::to_string(retry_.attempts) +
                             " attempts, last status " + std::to_string(last_status),
                         last_status);
}

std::vector<GenerationOutcome> LlmClient::generate_all(std::span<const GenerationRequest> requests) {
    std::vector<GenerationOutcome> out(requests.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < requests.size(); i = next.fetch_add(1)) {
            if (failed.load()) {
                out[i] = std::make_exception_ptr(
                    TransportError("not attempted after an earlier transport failure", 0));
                continue;
            }
            try {
                out[i] = generate(requests[i]);
            } catch (const TransportError&) {
                failed.store(true);
                out[i] = std::current_exception();
            } catch (...) {
                out[i] = std::current_exception();
            }
        }
    };
    const auto n = std::min(parallelism_, requests.size());
    {
        std::vector<std::jthread> pool;
        pool.reserve(n);
        for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    }
    return out;
}

ClientStats LlmClient::stats() const {
    std::lock_guard lock(stats_mutex_);
    return stats_;
}

}  // namespace ctnli
