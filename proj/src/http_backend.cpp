#include "http_backend.hpp"

#include <cctype>
#include <chrono>
#include <thread>

#include <httplib.h>

#include "canonical.hpp"
#include "error.hpp"

namespace pws {

namespace {

struct SplitUrl {
    std::string base;  // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw Error(ErrorCode::Config, "endpoint url must include a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

std::string strip(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

bool retryable_status(int status) { return status == 429 || (status >= 500 && status < 600); }

}  // namespace

CompletionResponse http_complete(const HttpEndpoint& endpoint, const CompletionQuery& q) {
    const SplitUrl url = split_url(endpoint.url);

    Json body;
    body["model"] = endpoint.model;
    body["prompt"] = q.prompt;
    body["max_tokens"] = q.gen.max_tokens;
    body["temperature"] = q.gen.temperature;
    if (q.gen.stop) body["stop"] = *q.gen.stop;
    const std::string payload = canonical_dump(body);

    httplib::Headers headers;
    if (!endpoint.api_key.empty())
        headers.emplace("Authorization", "Bearer " + endpoint.api_key);

    std::string last_error;
    int backoff_ms = endpoint.backoff_initial_ms;
    for (int attempt = 0; attempt <= endpoint.retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
            backoff_ms *= 2;
        }
        httplib::Client cli(url.base);
        const auto timeout = std::chrono::duration<double>(endpoint.timeout_seconds);
        cli.set_connection_timeout(timeout);
        cli.set_read_timeout(timeout);
        cli.set_write_timeout(timeout);

        auto res = cli.Post(url.path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;  // retryable
        }
        if (res->status < 200 || res->status >= 300) {
            const std::string excerpt = res->body.substr(0, 200);
            last_error = "status " + std::to_string(res->status) + ": " + excerpt;
            if (retryable_status(res->status)) continue;
            throw Error(ErrorCode::Backend, "http completion failed, " + last_error);
        }
        Json parsed;
        try {
            parsed = Json::parse(res->body);
        } catch (const Json::parse_error& e) {
            // Malformed body on a 2xx is a contract violation, not retryable.
            throw Error(ErrorCode::Parse,
                        std::string("http completion returned malformed JSON: ") + e.what());
        }
        try {
            const Json& choices = parsed.at("choices");
            if (!choices.is_array() || choices.empty())
                throw Error(ErrorCode::Parse, "http completion response has no choices");
            CompletionResponse out;
            out.prediction = strip(choices.at(0).at("text").get<std::string>());
            return out;
        } catch (const Json::exception& e) {
            throw Error(ErrorCode::Parse,
                        std::string("http completion response missing fields: ") + e.what());
        }
    }
    throw TransportError("http completion failed after " + std::to_string(endpoint.retries) +
                         " retries, last " + last_error);
}

HttpBackend::HttpBackend(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {
    if (endpoint_.url.empty()) throw Error(ErrorCode::Config, "http backend needs an endpoint url");
    split_url(endpoint_.url);  // validate early
}

std::string HttpBackend::model_id() const {
    return endpoint_.model.empty() ? "http" : endpoint_.model;
}

std::vector<Response> HttpBackend::run_batch(std::span<const Query> batch) {
    std::vector<Response> out;
    out.reserve(batch.size());
    for (const Query& q : batch) {
        const auto* c = std::get_if<CompletionQuery>(&q);
        if (!c) throw Error(ErrorCode::Capability, "http backend supports completion only");
        out.emplace_back(http_complete(endpoint_, *c));
    }
    return out;
}

}  // namespace pws
