#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <random>

#include <CLI11.hpp>

#include "ctnli/augment.hpp"
#include "ctnli/cli.hpp"
#include "ctnli/log.hpp"
#include "ctnli/metrics.hpp"
#include "json_io.hpp"

namespace ctnli::cli {

namespace {

using ojson = nlohmann::ordered_json;

std::unique_ptr<Transport> make_transport(const ProviderSettings& p) {
    if (p.endpoint.empty() || p.endpoint == "none") return nullptr;
    if (p.endpoint.starts_with("replay:"))
        return std::make_unique<ReplayTransport>(ReplayTransport::from_file(p.endpoint.substr(7)));
    if (p.endpoint.starts_with("http://") || p.endpoint.starts_with("https://")) {
        const char* key = std::getenv(p.api_key_env.c_str());
        if (!key || !*key) log::warn("api-key-missing", {{"env", p.api_key_env}});
        return std::make_unique<HttpChatTransport>(p.endpoint, key ? key : "");
    }
    throw InputError("config: unsupported endpoint " + p.endpoint);
}

std::unordered_set<std::string> read_word_list(const std::filesystem::path& path) {
    std::unordered_set<std::string> words;
    const auto text = detail::read_text_file(path);
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        auto w = detail::to_lower(detail::trim(std::string_view(text).substr(pos, nl - pos)));
        if (!w.empty() && w.front() != '#') words.insert(std::move(w));
        pos = nl + 1;
    }
    return words;
}

// Output text for one method file: header plus one JSON line per item.
template <typename T>
std::string render_items(std::string_view kind, const std::vector<T>& items) {
    std::string text = dataset_header(kind);
    for (const auto& item : items) text += to_json_line(item);
    return text;
}

void write_output(const std::filesystem::path& dir, const std::string& name, const std::string& text,
                  bool partial) {
    auto final_path = dir / name;
    if (partial) {
        std::filesystem::remove(final_path);
        auto p = final_path;
        p += ".partial";
        detail::write_file_atomic(p, text);
    } else {
        auto p = final_path;
        p += ".partial";
        std::filesystem::remove(p);
        detail::write_file_atomic(final_path, text);
    }
}

std::vector<const NliInstance*> pick_sources(const Corpus& corpus, const RunConfig& config) {
    auto sources = entailed_instances(corpus);
    if (config.limit > 0 && config.limit < sources.size()) {
        std::mt19937_64 rng(config.seed);
        std::shuffle(sources.begin(), sources.end(), rng);
        sources.resize(config.limit);
        std::sort(sources.begin(), sources.end(),
                  [](const NliInstance* a, const NliInstance* b) { return a->uuid < b->uuid; });
    }
    return sources;
}

int report_error(std::ostream& err, const char* cmd, const std::exception& e, int code) {
    err << "ctnli " << cmd << ": " << e.what() << "\n";
    return code;
}

}  // namespace

int cmd_augment(const RunConfig& config, const std::set<Method>& methods, Transport* transport,
                std::ostream& out, std::ostream& err) {
    try {
        if (methods.empty()) throw InputError("no augmentation methods selected");
        RunConfig effective = config;
        effective.vr = methods.contains(Method::Vr);
        validate_config(effective, Command::Augment);

        const auto corpus = load_corpus(config.trials_dir, config.statements, config.schema);
        const auto sources = pick_sources(corpus, config);
        std::filesystem::create_directories(config.output_dir);

        std::unique_ptr<Transport> owned;
        if (!transport && (methods.contains(Method::Nqa) || methods.contains(Method::Sp))) {
            owned = make_transport(config.provider);
            transport = owned.get();
        }
        RetryPolicy retry;
        retry.attempts = config.provider.retry_attempts;
        retry.initial_backoff = std::chrono::milliseconds(config.provider.backoff_ms);
        LlmClient client(config.cache_dir, transport, retry, config.provider.parallelism);
        GenerationSettings gen{config.provider.model_name,
                               {config.provider.temperature, config.provider.max_tokens}};

        std::vector<NqaItem> nqa;
        std::vector<AugmentedStatement> augmented;
        std::vector<Skip> skips;
        std::optional<std::string> abort_reason;

        if (methods.contains(Method::Vr)) {
            const auto stop_words = config.stop_words ? StopWords::from_file(*config.stop_words)
                                                      : StopWords::bundled();
            const auto lexicon = config.pos_lexicon ? PosLexicon::from_file(*config.pos_lexicon)
                                                    : PosLexicon::bundled();
            std::vector<TokenizedStatement> docs;
            const auto fit_on = config.tfidf_statements
                                    ? load_statements(*config.tfidf_statements, config.schema)
                                    : corpus.instances();
            for (const auto& inst : fit_on) docs.push_back(tokenize(inst.statement, stop_words, inst.uuid));
            const auto tfidf = fit_tfidf(docs);
            const auto store = load_embeddings(*config.embeddings, lexicon);
            std::unordered_set<std::string> allow;
            VocabSettings vs;
            vs.stop_words = &stop_words;
            if (config.vocab_allow_list) {
                allow = read_word_list(*config.vocab_allow_list);
                vs.neighbor_query.allow_list = &allow;
            }
            auto r = augment_vocab(corpus, tfidf, store, vs, sources);
            write_output(config.output_dir, "vr.jsonl", render_items("vocab", r.items), false);
            out << "vr: " << r.items.size() << " statements, " << r.skips.size() << " skipped\n";
            augmented.insert(augmented.end(), r.items.begin(), r.items.end());
            skips.insert(skips.end(), r.skips.begin(), r.skips.end());
        }

        if (methods.contains(Method::Sp)) {
            auto entail = augment_semantic(corpus, client, SemanticMode::Entail, gen, sources);
            AugmentResult<AugmentedStatement> contradict;
            if (!entail.abort_reason)
                contradict = augment_semantic(corpus, client, SemanticMode::Contradict, gen, sources);
            std::vector<AugmentedStatement> sp = entail.items;
            sp.insert(sp.end(), contradict.items.begin(), contradict.items.end());
            const bool aborted = entail.abort_reason || contradict.abort_reason;
            write_output(config.output_dir, "sp.jsonl", render_items("semantic", sp), aborted);
            out << "sp: " << sp.size() << " statements, "
                << entail.skips.size() + contradict.skips.size() << " skipped\n";
            augmented.insert(augmented.end(), sp.begin(), sp.end());
            skips.insert(skips.end(), entail.skips.begin(), entail.skips.end());
            skips.insert(skips.end(), contradict.skips.begin(), contradict.skips.end());
            if (aborted) abort_reason = entail.abort_reason ? entail.abort_reason : contradict.abort_reason;
        }

        if (methods.contains(Method::Nqa) && !abort_reason) {
            auto r = augment_nqa(corpus, client, gen, sources);
            write_output(config.output_dir, "nqa.jsonl", render_items("nqa", r.items),
                         r.abort_reason.has_value());
            out << "nqa: " << r.items.size() << " items, " << r.skips.size() << " skipped\n";
            nqa = std::move(r.items);
            skips.insert(skips.end(), r.skips.begin(), r.skips.end());
            abort_reason = r.abort_reason;
        }

        std::string skip_text = dataset_header("skips");
        for (const auto& s : skips) {
            ojson j;
            j["uuid"] = s.uuid;
            j["reason"] = s.reason;
            skip_text += j.dump() + "\n";
        }
        write_output(config.output_dir, "skips.jsonl", skip_text, false);

        if (abort_reason) {
            err << "ctnli augment: transport failure: " << *abort_reason << "\n"
                << "partial outputs kept with a .partial suffix in " << config.output_dir.string()
                << "\n";
            return kExitTransport;
        }

        std::vector<NliInstance> originals;
        for (const auto& inst : corpus.instances())
            if (inst.label) originals.push_back(inst);
        std::sort(augmented.begin(), augmented.end(),
                  [](const AugmentedStatement& a, const AugmentedStatement& b) {
                      return std::tie(a.source_uuid, a.method) < std::tie(b.source_uuid, b.method);
                  });
        const auto count = emit_multitask_dataset(originals, augmented, nqa, corpus, config.lambda,
                                                  config.output_dir / "multitask.jsonl");
        out << "multitask: " << count << " records (" << originals.size() + augmented.size()
            << " nli + 3 x " << nqa.size() << " nqa)\n";
        return kExitOk;
    } catch (const TransportError& e) {
        return report_error(err, "augment", e, kExitTransport);
    } catch (const InputError& e) {
        return report_error(err, "augment", e, kExitInput);
    } catch (const std::invalid_argument& e) {
        return report_error(err, "augment", e, kExitInput);
    } catch (const std::exception& e) {
        return report_error(err, "augment", e, kExitFailure);
    }
}

int cmd_evaluate(const RunConfig& config, const EvaluateArgs& args, std::ostream& out,
                 std::ostream& err) {
    try {
        validate_config(config, Command::Evaluate);
        if (!std::filesystem::is_regular_file(args.predictions))
            throw InputError("predictions file not found: " + args.predictions.string());
        const auto corpus = load_corpus(config.trials_dir, config.statements, config.schema);
        std::vector<ContrastPair> pairs;
        if (config.manifest) pairs = load_contrast_manifest(*config.manifest, corpus, config.schema);
        const auto preds = load_predictions(args.predictions, corpus, config.schema);
        const auto report = full_report(corpus, pairs, preds, args.strict_n);

        out << "F1 Prec. Rec. Faith. Con.\n" << format_table_row(report) << "\n";
        const auto report_path = args.report_path ? *args.report_path : config.output_dir / "report.json";
        if (report_path.has_parent_path()) std::filesystem::create_directories(report_path.parent_path());
        detail::write_file_atomic(report_path, report_to_json(report));
        return kExitOk;
    } catch (const InputError& e) {
        return report_error(err, "evaluate", e, kExitInput);
    } catch (const NoEligiblePairs& e) {
        return report_error(err, "evaluate", e, kExitInput);
    } catch (const std::invalid_argument& e) {
        return report_error(err, "evaluate", e, kExitInput);
    } catch (const std::exception& e) {
        return report_error(err, "evaluate", e, kExitFailure);
    }
}

int cmd_stats(const RunConfig& config, std::ostream& out, std::ostream& err) {
    try {
        validate_config(config, Command::Stats);
        std::vector<std::string> rows;
        for (const auto& split : config.splits) {
            const auto corpus = load_corpus(config.trials_dir, split.statements, config.schema);
            std::vector<ContrastPair> pairs;
            if (split.manifest) pairs = load_contrast_manifest(*split.manifest, corpus, config.schema);
            const auto s = corpus_stats(corpus, pairs);
            auto contrast = [&](std::size_t n) {
                return split.manifest ? std::to_string(n) : std::string("-");
            };
            std::string row = split.name + " " + std::to_string(s.entailment) + " " +
                              std::to_string(s.contradiction) + " " + contrast(s.altering) + " " +
                              contrast(s.preserving) + " " + std::to_string(s.total);
            if (s.unlabeled) row += " (" + std::to_string(s.unlabeled) + " unlabeled)";
            rows.push_back(std::move(row));
        }
        out << "split Ent. Con. Alt. Pres. SUM\n";
        for (const auto& r : rows) out << r << "\n";
        return kExitOk;
    } catch (const InputError& e) {
        return report_error(err, "stats", e, kExitInput);
    } catch (const std::exception& e) {
        return report_error(err, "stats", e, kExitFailure);
    }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        Transport* transport) {
    CLI::App app{"Clinical-trial NLI augmentation and robustness evaluation", "ctnli"};
    app.require_subcommand(1);

    std::string config_path;
    std::string log_level = "info";
    app.add_option("--config", config_path, "JSON config file providing defaults");
    app.add_option("--log-level", log_level, "debug, info, warn or error")
        ->check(CLI::IsMember({"debug", "info", "warn", "error"}));

    // Overrides shared by all subcommands.
    std::string trials, statements, manifest, output_dir;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--trials", trials, "Directory with one JSON file per trial");
        sub->add_option("--statements", statements, "Statement map (uuid -> fields)");
        sub->add_option("--manifest", manifest, "Contrast manifest");
        sub->add_option("--output-dir", output_dir, "Directory for output files");
    };

    auto* augment = app.add_subcommand("augment", "Generate augmented training data");
    add_common(augment);
    std::string embeddings, pos_lexicon, stop_words, cache_dir, endpoint, model, tfidf_statements,
        allow_list;
    std::vector<std::string> methods_arg;
    std::optional<std::size_t> parallelism, limit;
    std::optional<double> lambda;
    std::optional<std::uint64_t> seed;
    augment->add_option("--methods", methods_arg, "Subset of nqa,sp,vr (default: config toggles)")
        ->delimiter(',')
        ->check(CLI::IsMember({"nqa", "sp", "vr"}));
    augment->add_option("--embeddings", embeddings, "Word-vector text file");
    augment->add_option("--pos-lexicon", pos_lexicon, "word<TAB>tag lexicon");
    augment->add_option("--stop-words", stop_words, "Stop-word list");
    augment->add_option("--tfidf-statements", tfidf_statements, "Statement file to fit TF-IDF on");
    augment->add_option("--allow-list", allow_list, "Restrict replacement words to this list");
    augment->add_option("--cache-dir", cache_dir, "Response cache directory");
    augment->add_option("--endpoint", endpoint, "none | replay:<file> | http(s)://...");
    augment->add_option("--model", model, "Model name sent to the provider");
    augment->add_option("--parallelism", parallelism, "Concurrent generation requests");
    augment->add_option("--lambda", lambda, "NQA loss weight stored in dataset metadata");
    augment->add_option("--seed", seed, "Seed for statement sampling");
    augment->add_option("--limit", limit, "Augment a seeded sample of N entailed statements");

    auto* evaluate = app.add_subcommand("evaluate", "Score a prediction file");
    add_common(evaluate);
    EvaluateArgs eval_args;
    std::string predictions, report;
    evaluate->add_option("--predictions", predictions, "Prediction file")->required();
    evaluate->add_option("--report", report, "Structured report path");
    evaluate->add_flag("--strict-n", eval_args.strict_n,
                       "Faithfulness denominator = all altering pairs");

    auto* stats = app.add_subcommand("stats", "Per-split label and intervention counts");
    add_common(stats);
    std::vector<std::string> split_args;
    stats->add_option("--split", split_args, "name=statements[,manifest]; repeatable");

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    try {
        app.parse(argv_rev);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "ctnli: " << e.what() << "\n" << app.help();
        return kExitInput;
    }

    log::set_min_level(log_level == "debug"  ? log::Level::Debug
                       : log_level == "warn" ? log::Level::Warn
                       : log_level == "error" ? log::Level::Error
                                              : log::Level::Info);

    RunConfig config;
    try {
        if (!config_path.empty()) config = load_config(config_path);
    } catch (const InputError& e) {
        err << "ctnli: " << e.what() << "\n";
        return kExitInput;
    }
    if (!trials.empty()) config.trials_dir = trials;
    if (!statements.empty()) config.statements = statements;
    if (!manifest.empty()) config.manifest = manifest;
    if (!output_dir.empty()) config.output_dir = output_dir;

    if (augment->parsed()) {
        if (!embeddings.empty()) config.embeddings = embeddings;
        if (!pos_lexicon.empty()) config.pos_lexicon = pos_lexicon;
        if (!stop_words.empty()) config.stop_words = stop_words;
        if (!tfidf_statements.empty()) config.tfidf_statements = tfidf_statements;
        if (!allow_list.empty()) config.vocab_allow_list = allow_list;
        if (!cache_dir.empty()) config.cache_dir = cache_dir;
        if (!endpoint.empty()) config.provider.endpoint = endpoint;
        if (!model.empty()) config.provider.model_name = model;
        if (parallelism) config.provider.parallelism = *parallelism;
        if (lambda) config.lambda = *lambda;
        if (seed) config.seed = *seed;
        if (limit) config.limit = *limit;
        std::set<Method> methods;
        if (methods_arg.empty()) {
            if (config.nqa) methods.insert(Method::Nqa);
            if (config.sp) methods.insert(Method::Sp);
            if (config.vr) methods.insert(Method::Vr);
        }
        for (const auto& m : methods_arg)
            methods.insert(m == "nqa" ? Method::Nqa : m == "sp" ? Method::Sp : Method::Vr);
        return cmd_augment(config, methods, transport, out, err);
    }
    if (evaluate->parsed()) {
        eval_args.predictions = predictions;
        if (!report.empty()) eval_args.report_path = report;
        return cmd_evaluate(config, eval_args, out, err);
    }
    // stats
    if (!split_args.empty()) config.splits.clear();
    for (const auto& s : split_args) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) {
            err << "ctnli stats: --split expects name=statements[,manifest]\n";
            return kExitInput;
        }
        SplitSpec split{s.substr(0, eq), {}, std::nullopt};
        const auto rest = s.substr(eq + 1);
        const auto comma = rest.find(',');
        split.statements = rest.substr(0, comma);
        if (comma != std::string::npos) split.manifest = rest.substr(comma + 1);
        config.splits.push_back(std::move(split));
    }
    if (config.splits.empty() && !config.statements.empty())
        config.splits.push_back({"split", config.statements, config.manifest});
    return cmd_stats(config, out, err);
}

}  // namespace ctnli::cli
