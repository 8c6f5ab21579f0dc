// same configuration as the library's transport, so both see one httplib
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <gtest/gtest.h>

#include <thread>

#include "ctnli/llmclient.hpp"
#include "test_support.hpp"

using namespace ctnli;
using namespace ctnli::testing;

namespace {

constexpr RetryPolicy kFastRetry{3, std::chrono::milliseconds(0), 2.0};

GenerationRequest req(TemplateName t, std::string statement) {
    GenerationRequest r;
    r.template_name = t;
    r.statement = std::move(statement);
    return r;
}

}  // namespace

TEST(Templates, RenderedPromptsAreExact) {
    const std::string s = "X improves Y";
    EXPECT_EQ(render_prompt(builtin_template(TemplateName::SpEntail), s),
              "Please rephrase the given statement: X improves Y");
    EXPECT_EQ(render_prompt(builtin_template(TemplateName::SpContradict), s),
              "Please generate a contradictory statement based on the given statement, with a "
              "minor change: X improves Y");
    EXPECT_EQ(render_prompt(builtin_template(TemplateName::NqaGenerate), s),
              "Please convert the statement to a multiple choice question that requires the "
              "numerical or quantitative reasoning, and each question has 3 choices, using the "
              "given template:\nQuestion: [Question]\nChoices: 1. [Choice 1]\n2. [Choice 2]\n3. "
              "[Choice 3]\nCorrect Answer: [Correct Answer].\nX improves Y");
}

TEST(Templates, StatementIsNotReexpanded) {
    const auto p = render_prompt(builtin_template(TemplateName::SpEntail), "a {statement} b");
    EXPECT_EQ(p, "Please rephrase the given statement: a {statement} b");
    EXPECT_THROW(render_prompt({TemplateName::SpEntail, "no slot"}, "x"), std::invalid_argument);
}

TEST(CacheKey, SensitiveToEveryField) {
    const auto base = req(TemplateName::SpEntail, "Aspirin helps.");
    const auto k = cache_key(base);
    EXPECT_EQ(k.size(), 64u);
    EXPECT_EQ(k, cache_key(base));

    auto r = base;
    r.model_name = "other-model";
    EXPECT_NE(cache_key(r), k);
    r = base;
    r.template_name = TemplateName::SpContradict;
    EXPECT_NE(cache_key(r), k);
    r = base;
    r.statement += " ";
    EXPECT_NE(cache_key(r), k);
    r = base;
    r.decoding.temperature = 1e-12;
    EXPECT_NE(cache_key(r), k);
    r = base;
    r.decoding.max_tokens = 513;
    EXPECT_NE(cache_key(r), k);
}

TEST(CacheKey, NoCollisionsOnRandomPrompts) {
    std::mt19937_64 rng(9);
    std::set<std::string> keys;
    const std::size_t n = 20000;
    for (std::size_t i = 0; i < n; ++i) {
        auto r = req(static_cast<TemplateName>(i % 3), random_word(rng, 1, 4) + " " + std::to_string(i));
        keys.insert(cache_key(r));
    }
    EXPECT_EQ(keys.size(), n);
}

TEST(Client, MissThenHit) {
    TempDir dir("cache");
    MockTransport mock([](const TransportRequest&) { return TransportResponse{200, "ok"}; });
    LlmClient client(dir.path(), &mock, kFastRetry);
    const auto r = req(TemplateName::SpEntail, "Aspirin helps.");
    const auto g1 = client.generate(r);
    EXPECT_EQ(g1.text, "ok");
    EXPECT_FALSE(g1.from_cache);
    EXPECT_TRUE(fs::exists(ResponseCache(dir.path()).path_for(g1.cache_key)));
    const auto g2 = client.generate(r);
    EXPECT_TRUE(g2.from_cache);
    EXPECT_EQ(g2.text, "ok");
    EXPECT_EQ(mock.calls(), 1u);
    EXPECT_EQ(client.stats().cache_hits, 1u);
    EXPECT_EQ(client.stats().cache_misses, 1u);
}

TEST(Client, CacheSurvivesProcessBoundaryWithoutTransport) {
    TempDir dir("cache");
    MockTransport mock([](const TransportRequest&) { return TransportResponse{200, "line1\nline2\n"}; });
    const auto r = req(TemplateName::NqaGenerate, "Median age was 54.");
    {
        LlmClient warm(dir.path(), &mock, kFastRetry);
        warm.generate(r);
    }
    LlmClient cold(dir.path(), nullptr);
    EXPECT_EQ(cold.generate(r).text, "line1\nline2\n");
}

TEST(Client, CacheFileHasMetadataHeader) {
    TempDir dir("cache");
    MockTransport mock([](const TransportRequest&) { return TransportResponse{200, "body"}; });
    LlmClient client(dir.path(), &mock, kFastRetry);
    const auto g = client.generate(req(TemplateName::SpEntail, "s"));
    const auto text = read_text(ResponseCache(dir.path()).path_for(g.cache_key));
    const auto nl = text.find('\n');
    ASSERT_NE(nl, std::string::npos);
    EXPECT_TRUE(text.starts_with("# ctnli-cache v1 "));
    const auto meta = json::parse(text.substr(17, nl - 17));
    EXPECT_EQ(meta["key"], g.cache_key);
    EXPECT_EQ(meta["template"], "sp-entail");
    EXPECT_EQ(text.substr(nl + 1), "body");
}

TEST(Client, CorruptEntryIsAMiss) {
    TempDir dir("cache");
    MockTransport mock([](const TransportRequest&) { return TransportResponse{200, "fresh"}; });
    LlmClient client(dir.path(), &mock, kFastRetry);
    const auto r = req(TemplateName::SpEntail, "s");
    write_text(ResponseCache(dir.path()).path_for(cache_key(r)), "garbage");
    EXPECT_EQ(client.generate(r).text, "fresh");
    EXPECT_EQ(mock.calls(), 1u);
}

TEST(Client, ColdCacheWithoutTransport) {
    TempDir dir("cache");
    LlmClient client(dir.path(), nullptr);
    try {
        client.generate(req(TemplateName::SpEntail, "s"));
        FAIL();
    } catch (const TransportError& e) {
        EXPECT_EQ(e.status(), 0);
    }
}

TEST(Client, RetriesThenFailsWithLastStatus) {
    TempDir dir("cache");
    int n = 0;
    MockTransport mock([&](const TransportRequest&) {
        return TransportResponse{++n < 3 ? 503 : 429, ""};
    });
    LlmClient client(dir.path(), &mock, kFastRetry);
    try {
        client.generate(req(TemplateName::SpEntail, "s"));
        FAIL();
    } catch (const TransportError& e) {
        EXPECT_EQ(e.status(), 429);
    }
    EXPECT_EQ(mock.calls(), 3u);
}

TEST(Client, RecoversWithinRetryBudget) {
    TempDir dir("cache");
    int n = 0;
    MockTransport mock([&](const TransportRequest&) {
        return ++n < 3 ? TransportResponse{500, ""} : TransportResponse{200, "fine"};
    });
    LlmClient client(dir.path(), &mock, kFastRetry);
    EXPECT_EQ(client.generate(req(TemplateName::SpEntail, "s")).text, "fine");
    EXPECT_EQ(mock.calls(), 3u);
}

TEST(Client, PermanentStatusFailsImmediately) {
    TempDir dir("cache");
    MockTransport mock([](const TransportRequest&) { return TransportResponse{401, ""}; });
    LlmClient client(dir.path(), &mock, kFastRetry);
    EXPECT_THROW(client.generate(req(TemplateName::SpEntail, "s")), TransportError);
    EXPECT_EQ(mock.calls(), 1u);
}

TEST(Client, EmptyBodyIsGenerationError) {
    TempDir dir("cache");
    MockTransport mock([](const TransportRequest&) { return TransportResponse{200, "  \n"}; });
    LlmClient client(dir.path(), &mock, kFastRetry);
    EXPECT_THROW(client.generate(req(TemplateName::SpEntail, "s")), GenerationError);
    EXPECT_TRUE(fs::is_empty(dir.path()));
}

TEST(Client, BatchKeepsOrderAndBoundsParallelism) {
    TempDir dir("cache");
    std::atomic<int> in_flight{0}, peak{0};
    MockTransport mock([&](const TransportRequest& r) {
        const int now = ++in_flight;
        int p = peak.load();
        while (now > p && !peak.compare_exchange_weak(p, now)) {}
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
        --in_flight;
        return TransportResponse{200, "re: " + r.statement};
    });
    LlmClient client(dir.path(), &mock, kFastRetry, 3);
    std::vector<GenerationRequest> batch;
    for (int i = 0; i < 40; ++i) batch.push_back(req(TemplateName::SpEntail, "s" + std::to_string(i)));
    const auto out = client.generate_all(batch);
    ASSERT_EQ(out.size(), batch.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        EXPECT_EQ(std::get<Generation>(out[i]).text, "re: s" + std::to_string(i));
    EXPECT_LE(peak.load(), 3);
    EXPECT_EQ(mock.calls(), 40u);
}

TEST(Client, BatchStopsAfterTransportFailure) {
    TempDir dir("cache");
    MockTransport mock([](const TransportRequest& r) {
        return r.statement == "s2" ? TransportResponse{400, ""} : TransportResponse{200, "ok"};
    });
    LlmClient client(dir.path(), &mock, kFastRetry, 1);
    std::vector<GenerationRequest> batch;
    for (int i = 0; i < 6; ++i) batch.push_back(req(TemplateName::SpEntail, "s" + std::to_string(i)));
    const auto out = client.generate_all(batch);
    EXPECT_TRUE(std::holds_alternative<Generation>(out[0]));
    EXPECT_TRUE(std::holds_alternative<Generation>(out[1]));
    for (std::size_t i = 2; i < out.size(); ++i) {
        ASSERT_TRUE(std::holds_alternative<std::exception_ptr>(out[i]));
        EXPECT_THROW(std::rethrow_exception(std::get<std::exception_ptr>(out[i])), TransportError);
    }
    EXPECT_EQ(mock.calls(), 3u);
}

TEST(Replay, LooksUpByTemplateAndStatement) {
    TempDir dir("replay");
    write_text(dir / "r.json", R"({"sp-entail": {"A.": "B."}, "prompts": {"raw prompt": "C."}})");
    auto t = ReplayTransport::from_file(dir / "r.json");
    TransportRequest r;
    r.template_name = TemplateName::SpEntail;
    r.statement = "A.";
    EXPECT_EQ(t.send(r).body, "B.");
    r.template_name = TemplateName::SpContradict;
    EXPECT_EQ(t.send(r).status, 404);
    r.prompt = "raw prompt";
    EXPECT_EQ(t.send(r).body, "C.");
    write_text(dir / "bad.json", R"({"sp-wrong": {}})");
    EXPECT_THROW(ReplayTransport::from_file(dir / "bad.json"), InputError);
}

TEST(Http, ChatCompletionsRoundTrip) {
    httplib::Server server;
    std::string seen_auth;
    json seen_body;
    server.Post("/v1/chat/completions", [&](const httplib::Request& rq, httplib::Response& rs) {
        seen_auth = rq.get_header_value("Authorization");
        seen_body = json::parse(rq.body);
        const std::string content = "echo: " + seen_body["messages"][0]["content"].get<std::string>();
        rs.set_content(json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump(),
                       "application/json");
    });
    server.Post("/broken", [](const httplib::Request&, httplib::Response& rs) {
        rs.set_content("not json", "text/plain");
    });
    server.Post("/limited", [](const httplib::Request&, httplib::Response& rs) { rs.status = 429; });
    const int port = server.bind_to_any_port("127.0.0.1");
    ASSERT_GT(port, 0);
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    const std::string base = "http://127.0.0.1:" + std::to_string(port);
    HttpChatTransport t(base + "/v1/chat/completions", "sk-test", std::chrono::seconds(5));
    TransportRequest r{"gpt-3.5-turbo", "hello", {}, TemplateName::SpEntail, "hello"};
    const auto resp = t.send(r);
    EXPECT_EQ(resp.status, 200);
    EXPECT_EQ(resp.body, "echo: hello");
    EXPECT_EQ(seen_auth, "Bearer sk-test");
    EXPECT_EQ(seen_body["model"], "gpt-3.5-turbo");
    EXPECT_EQ(seen_body["temperature"], 0.0);
    EXPECT_EQ(seen_body["max_tokens"], 512);

    EXPECT_EQ(HttpChatTransport(base + "/broken", "").send(r).status, 502);
    EXPECT_EQ(HttpChatTransport(base + "/limited", "").send(r).status, 429);

    server.stop();
    th.join();
    // nothing listening any more
    EXPECT_EQ(HttpChatTransport(base + "/v1/chat/completions", "", std::chrono::seconds(2)).send(r).status, 0);
}

TEST(Http, EndpointMustBeAUrl) {
    EXPECT_THROW(HttpChatTransport("localhost/v1", ""), InputError);
}
