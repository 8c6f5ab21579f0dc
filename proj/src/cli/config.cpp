#include <cmath>

#include "ctnli/cli.hpp"
#include "json_io.hpp"

namespace ctnli::cli {

using detail::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

void apply_schema(SchemaMapping& schema, const json& j) {
    auto set = [&](const char* key, std::string& field) {
        if (j.contains(key)) field = j.at(key).get<std::string>();
    };
    set("trial_id", schema.trial_id);
    set("type", schema.type);
    set("section_id", schema.section_id);
    set("primary_id", schema.primary_id);
    set("secondary_id", schema.secondary_id);
    set("statement", schema.statement);
    set("label", schema.label);
    set("prediction", schema.prediction);
    set("perturbed_uuid", schema.perturbed_uuid);
    set("base_uuid", schema.base_uuid);
    set("intervention", schema.intervention);
    set("trial_file_extension", schema.trial_file_extension);
    if (j.contains("sections")) {
        for (const auto& [name, key] : j.at("sections").items()) {
            auto section = parse_section(name);
            if (!section) throw InputError("config: unknown section \"" + name + "\" in schema.sections");
            schema.section_keys[*section] = key.get<std::string>();
        }
    }
}

}  // namespace

RunConfig load_config(const std::filesystem::path& path) {
    const json doc = detail::read_json_file(path);
    if (!doc.is_object()) throw InputError(path.string() + ": config must be an object");
    const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    RunConfig c;
    try {
        if (doc.contains("paths")) {
            const auto& p = doc.at("paths");
            auto req = [&](const char* key, std::filesystem::path& field) {
                if (p.contains(key) && !p.at(key).is_null())
                    field = resolve(base, p.at(key).get<std::string>());
            };
            auto opt = [&](const char* key, std::optional<std::filesystem::path>& field) {
                if (p.contains(key) && !p.at(key).is_null())
                    field = resolve(base, p.at(key).get<std::string>());
            };
            req("trials_dir", c.trials_dir);
            req("statements", c.statements);
            opt("manifest", c.manifest);
            opt("embeddings", c.embeddings);
            opt("pos_lexicon", c.pos_lexicon);
            opt("stop_words", c.stop_words);
            opt("tfidf_statements", c.tfidf_statements);
            opt("vocab_allow_list", c.vocab_allow_list);
            req("cache_dir", c.cache_dir);
            req("output_dir", c.output_dir);
            if (!p.contains("cache_dir")) c.cache_dir = base / c.cache_dir;
            if (!p.contains("output_dir")) c.output_dir = base / c.output_dir;
        }
        if (doc.contains("provider")) {
            const auto& p = doc.at("provider");
            auto& s = c.provider;
            s.endpoint = p.value("endpoint", s.endpoint);
            if (s.endpoint.starts_with("replay:"))
                s.endpoint = "replay:" + resolve(base, s.endpoint.substr(7)).string();
            s.model_name = p.value("model", s.model_name);
            s.parallelism = p.value("parallelism", s.parallelism);
            s.temperature = p.value("temperature", s.temperature);
            s.max_tokens = p.value("max_tokens", s.max_tokens);
            s.retry_attempts = p.value("retry_attempts", s.retry_attempts);
            s.backoff_ms = p.value("backoff_ms", s.backoff_ms);
            s.api_key_env = p.value("api_key_env", s.api_key_env);
        }
        if (doc.contains("augment")) {
            const auto& a = doc.at("augment");
            c.nqa = a.value("nqa", c.nqa);
            c.sp = a.value("sp", c.sp);
            c.vr = a.value("vr", c.vr);
            c.limit = a.value("limit", c.limit);
        }
        c.lambda = doc.value("lambda", c.lambda);
        c.seed = doc.value("seed", c.seed);
        if (doc.contains("schema")) apply_schema(c.schema, doc.at("schema"));
        if (doc.contains("splits")) {
            for (const auto& s : doc.at("splits")) {
                SplitSpec split;
                split.name = s.at("name").get<std::string>();
                split.statements = resolve(base, s.at("statements").get<std::string>());
                if (s.contains("manifest") && !s.at("manifest").is_null())
                    split.manifest = resolve(base, s.at("manifest").get<std::string>());
                c.splits.push_back(std::move(split));
            }
        }
    } catch (const json::exception& e) {
        throw InputError(path.string() + ": bad config value: " + e.what());
    }
    return c;
}

void validate_config(const RunConfig& c, Command command) {
    auto need_dir = [](const std::filesystem::path& p, const char* what) {
        if (p.empty()) throw InputError(std::string("config: ") + what + " is not set");
        if (!std::filesystem::is_directory(p))
            throw InputError(std::string("config: ") + what + " not found: " + p.string());
    };
    auto need_file = [](const std::filesystem::path& p, const char* what) {
        if (p.empty()) throw InputError(std::string("config: ") + what + " is not set");
        if (!std::filesystem::is_regular_file(p))
            throw InputError(std::string("config: ") + what + " not found: " + p.string());
    };
    auto maybe_file = [&](const std::optional<std::filesystem::path>& p, const char* what) {
        if (p) need_file(*p, what);
    };

    need_dir(c.trials_dir, "trials_dir");
    if (!std::isfinite(c.lambda) || c.lambda < 0.0) throw InputError("config: lambda must be >= 0");
    if (c.provider.parallelism < 1) throw InputError("config: parallelism must be >= 1");
    if (c.provider.retry_attempts < 1) throw InputError("config: retry_attempts must be >= 1");
    if (c.provider.temperature < 0.0) throw InputError("config: temperature must be >= 0");
    if (c.provider.max_tokens < 1) throw InputError("config: max_tokens must be positive");

    switch (command) {
        case Command::Augment:
            need_file(c.statements, "statements");
            maybe_file(c.pos_lexicon, "pos_lexicon");
            maybe_file(c.stop_words, "stop_words");
            maybe_file(c.tfidf_statements, "tfidf_statements");
            maybe_file(c.vocab_allow_list, "vocab_allow_list");
            if (c.vr && !c.embeddings) throw InputError("config: vr needs an embeddings file");
            maybe_file(c.embeddings, "embeddings");
            if (c.provider.endpoint.starts_with("replay:"))
                need_file(c.provider.endpoint.substr(7), "replay file");
            break;
        case Command::Evaluate:
            need_file(c.statements, "statements");
            maybe_file(c.manifest, "manifest");
            break;
        case Command::Stats:
            if (c.splits.empty()) throw InputError("config: no splits to summarize");
            for (const auto& s : c.splits) {
                need_file(s.statements, "split statements");
                maybe_file(s.manifest, "split manifest");
            }
            break;
    }
}

}  // namespace ctnli::cli
