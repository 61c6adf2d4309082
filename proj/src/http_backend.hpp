#pragma once

#include <cstdint>
#include <string>

#include "backend.hpp"

namespace pws {

struct HttpEndpoint {
    std::string url;          // e.g. http://host:port/v1/completions
    std::string model;        // model name sent in the request body
    std::string api_key;      // optional bearer token
    double timeout_seconds = 60.0;
    int retries = 3;
    int backoff_initial_ms = 1000;  // doubled per retry: 1s, 2s, 4s
};

// Single-query adapter for OpenAI-style completion endpoints. Sends
// {model, prompt, max_tokens, temperature, stop} and returns the first
// choice's text with surrounding whitespace stripped.
CompletionResponse http_complete(const HttpEndpoint& endpoint, const CompletionQuery& q);

class HttpBackend : public Backend {
public:
    explicit HttpBackend(HttpEndpoint endpoint);

    std::string model_id() const override;
    Capabilities capabilities() const override { return {true, false, false}; }
    std::vector<Response> run_batch(std::span<const Query> batch) override;

private:
    HttpEndpoint endpoint_;
};

}  // namespace pws
