#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>

#include "client.hpp"
#include "error.hpp"
#include "http_backend.hpp"
#include "test_util.hpp"

using namespace pws;
using testutil::TempDir;

namespace {

RankedQuery ranked(const std::string& prompt, std::vector<std::string> candidates) {
    RankedQuery q;
    q.payload = Payload::from_text(prompt);
    q.candidates = std::move(candidates);
    return q;
}

}  // namespace

TEST_CASE("mock scores are deterministic and permutation-stable") {
    const Payload p = Payload::from_text("Liverpool wins 7-0! What is the topic?");
    CHECK(mock_score(p, "Sports") == mock_score(p, "Sports"));

    auto backend = std::make_shared<MockBackend>();
    auto r1 = backend->run_batch(std::vector<Query>{ranked("p", {"A", "B", "C"})});
    auto r2 = backend->run_batch(std::vector<Query>{ranked("p", {"C", "A", "B"})});
    const auto& a = std::get<RankedResponse>(r1[0]);
    const auto& b = std::get<RankedResponse>(r2[0]);
    CHECK(a.scores == b.scores);  // same per-candidate map
    CHECK(a.prediction == b.prediction);
}

TEST_CASE("single candidate scores 1.0 after softmax") {
    auto backend = std::make_shared<MockBackend>();
    auto rs = backend->run_batch(std::vector<Query>{ranked("p", {"only"})});
    const auto& r = std::get<RankedResponse>(rs[0]);
    CHECK(r.scores.at("only") == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.prediction == "only");
}

TEST_CASE("ranked responses are normalized with order tie-break") {
    auto backend = std::make_shared<MockBackend>();
    Client client(backend);
    auto rs = client.run(std::vector<Query>{ranked("headline", {"Sports", "Politics", "Tech"})});
    const auto& r = std::get<RankedResponse>(rs[0]);
    double sum = 0;
    for (const auto& [k, v] : r.scores) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    validate(rs[0]);
}

TEST_CASE("duplicate queries in one call invoke the backend once") {
    auto backend = std::make_shared<MockBackend>();
    auto cache = std::make_shared<ResponseCache>();
    Client client(backend, cache);
    Query q = ranked("same", {"A", "B"});
    auto rs = client.run(std::vector<Query>{q, q});
    CHECK(backend->queries_run() == 1);
    CHECK(canonical_response(rs[0]) == canonical_response(rs[1]));
}

TEST_CASE("persistent cache yields bit-identical responses across sessions") {
    TempDir tmp;
    const auto cache_path = tmp.file("responses.cache");
    Query q = ranked("prompt", {"A", "B"});
    std::string first, second;
    {
        Client client(std::make_shared<MockBackend>(),
                      std::make_shared<ResponseCache>(cache_path));
        first = canonical_response(client.run_one(q));
    }
    {
        auto backend = std::make_shared<MockBackend>();
        Client client(backend, std::make_shared<ResponseCache>(cache_path));
        second = canonical_response(client.run_one(q));
        CHECK(backend->queries_run() == 0);  // served from cache
        CHECK(client.stats().cache_hits == 1);
    }
    CHECK(first == second);
}

TEST_CASE("cache transparency: cached equals uncached output") {
    std::vector<Query> queries;
    for (int i = 0; i < 20; ++i) {
        if (i % 3 == 0) {
            CompletionQuery c;
            c.prompt = "complete " + std::to_string(i % 5);
            queries.emplace_back(std::move(c));
        } else {
            queries.push_back(ranked("payload " + std::to_string(i % 4), {"X", "Y", "Z"}));
        }
    }
    Client plain(std::make_shared<MockBackend>());
    Client cached(std::make_shared<MockBackend>(), std::make_shared<ResponseCache>());
    auto r1 = plain.run(queries);
    auto r2 = cached.run(queries);
    auto r3 = cached.run(queries);  // warm
    REQUIRE(r1.size() == queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i) {
        CHECK(canonical_response(r1[i]) == canonical_response(r2[i]));
        CHECK(canonical_response(r1[i]) == canonical_response(r3[i]));
    }
    CHECK(cached.stats().cache_hits >= queries.size());
}

TEST_CASE("capability mismatch is a per-query error") {
    Capabilities rank_only{false, true, true};
    Client client(std::make_shared<MockBackend>("rank-only", rank_only));
    CompletionQuery c;
    c.prompt = "hi";
    CHECK_THROWS_WITH_AS(client.run(std::vector<Query>{Query{c}}),
                         doctest::Contains("query 0"), Error);
}

TEST_CASE("nondeterministic completions bypass the cache unless opted in") {
    auto backend = std::make_shared<MockBackend>();
    auto cache = std::make_shared<ResponseCache>();
    Client client(backend, cache);
    CompletionQuery c;
    c.prompt = "sample";
    c.gen.temperature = 0.7;
    client.run_one(Query{c});
    client.run_one(Query{c});
    CHECK(backend->queries_run() == 2);
    CHECK(cache->size() == 0);

    ClientOptions opts;
    opts.cache_nondeterministic = true;
    auto backend2 = std::make_shared<MockBackend>();
    Client opted(backend2, std::make_shared<ResponseCache>(), opts);
    opted.run_one(Query{c});
    opted.run_one(Query{c});
    CHECK(backend2->queries_run() == 1);
}

TEST_CASE("cache records survive a truncated tail") {
    TempDir tmp;
    const auto path = tmp.file("c.cache");
    {
        ResponseCache cache(path);
        cache.put(sha256("k1"), "payload-one");
        cache.put(sha256("k2"), "payload-two");
    }
    // simulate a crash mid-append
    {
        std::ofstream out(path, std::ios::binary | std::ios::app);
        const char garbage[] = {0x50, 0x00, 0x00, 0x00, 0x01, 0x02};
        out.write(garbage, sizeof garbage);
    }
    ResponseCache cache(path);
    CHECK(cache.size() == 2);
    CHECK(cache.get(sha256("k1")) == std::string("payload-one"));
    CHECK(cache.get(sha256("k2")) == std::string("payload-two"));
}

TEST_CASE("canonical query serialization is stable and key-scoped by model") {
    Query q = ranked("text", {"A", "B"});
    const std::string canon = canonical_query(q);
    CHECK(canon ==
          R"({"candidates":["A","B"],"payload":{"kind":"text","text":"text"},"type":"ranked"})");
    CHECK(query_cache_key("m1", q).hex() != query_cache_key("m2", q).hex());
    // round-trip
    CHECK(canonical_query(query_from_json(Json::parse(canon))) == canon);

    CompletionQuery c;
    c.prompt = "p";
    const std::string canon_c = canonical_query(Query{c});
    CHECK(canon_c == R"({"gen":{"max_tokens":16,"temperature":0.0},"prompt":"p","type":"completion"})");
    CHECK(canonical_query(query_from_json(Json::parse(canon_c))) == canon_c);
}

TEST_CASE("http completion strips whitespace and honors retries") {
    httplib::Server server;
    std::atomic<int> calls{0};
    server.Post("/v1/completions", [&](const httplib::Request& req, httplib::Response& res) {
        const int n = ++calls;
        auto body = Json::parse(req.body);
        CHECK(body.at("model") == "stub-model");
        CHECK(body.at("prompt") == "Liverpool wins 7-0! Topic?");
        if (n == 1) {
            res.status = 429;
            res.set_content("slow down", "text/plain");
            return;
        }
        res.set_content(R"({"choices":[{"text":" Football"}]})", "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    HttpEndpoint ep;
    ep.url = "http://127.0.0.1:" + std::to_string(port) + "/v1/completions";
    ep.model = "stub-model";
    ep.backoff_initial_ms = 5;

    CompletionQuery q;
    q.prompt = "Liverpool wins 7-0! Topic?";
    auto r = http_complete(ep, q);
    CHECK(r.prediction == "Football");
    CHECK(calls == 2);  // 429 then success

    server.stop();
    t.join();
}

TEST_CASE("http completion fails fast on malformed JSON and 4xx") {
    httplib::Server server;
    std::atomic<int> calls{0};
    server.Post("/bad-json", [&](const httplib::Request&, httplib::Response& res) {
        ++calls;
        res.set_content("{not json", "application/json");
    });
    server.Post("/forbidden", [&](const httplib::Request&, httplib::Response& res) {
        ++calls;
        res.status = 403;
        res.set_content("nope", "text/plain");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    HttpEndpoint ep;
    ep.model = "m";
    ep.backoff_initial_ms = 1;
    CompletionQuery q;
    q.prompt = "x";

    ep.url = "http://127.0.0.1:" + std::to_string(port) + "/bad-json";
    calls = 0;
    CHECK_THROWS_WITH_AS(http_complete(ep, q), doctest::Contains("malformed"), Error);
    CHECK(calls == 1);  // not retried

    ep.url = "http://127.0.0.1:" + std::to_string(port) + "/forbidden";
    calls = 0;
    CHECK_THROWS_WITH_AS(http_complete(ep, q), doctest::Contains("403"), Error);
    CHECK(calls == 1);

    server.stop();
    t.join();
}
