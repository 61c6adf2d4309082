#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "query.hpp"
#include "response.hpp"

namespace pws {

struct Capabilities {
    bool complete = false;
    bool rank_text = false;
    bool rank_image = false;

    bool supports(const Query& q) const;
    std::vector<std::string> names() const;
    static Capabilities from_names(const std::vector<std::string>& names);
};

enum class Modality { text, image };

// A model execution endpoint. Implementations must reject queries outside
// their capabilities; run_batch receives only pre-validated queries.
class Backend {
public:
    virtual ~Backend() = default;

    virtual std::string model_id() const = 0;
    virtual Capabilities capabilities() const = 0;
    virtual std::vector<Response> run_batch(std::span<const Query> batch) = 0;

    // Deterministic outputs (temperature-0 completions included) may be
    // cached transparently.
    virtual bool deterministic() const { return true; }

    // Token counter, when the model ships a tokenizer. Callers fall back to
    // a whitespace estimate.
    virtual std::optional<std::size_t> token_count(const std::string& text) const {
        (void)text;
        return std::nullopt;
    }
};

// Backends built around separate per-modality encoders (the vision-language
// pattern). Ranked scores are a function of the encoded representations, so
// representations can be cached and reused across queries.
class EncoderBackend : public Backend {
public:
    virtual std::vector<double> encode(Modality modality, const std::string& content) = 0;
    // Raw (log-space) score of one candidate representation against the
    // payload representation.
    virtual double score_raw(const std::vector<double>& payload_repr,
                             const std::vector<double>& candidate_repr) const = 0;

    // Encoder used for a query's payload/candidates; override to interpose
    // a cache.
    using EncodeFn = std::function<std::vector<double>(Modality, const std::string&)>;
    std::vector<Response> run_batch(std::span<const Query> batch) override;
    std::vector<Response> run_batch_with_encoder(std::span<const Query> batch,
                                                 const EncodeFn& encode_fn);
};

// Canonical string form of a ranked payload, used as scoring/encoding input.
std::string payload_content(const Payload& p);

// Deterministic hash-based score in [0,1): first 8 bytes of
// SHA-256(canonical(payload) || 0x1F || candidate) over 2^64.
double mock_score(const Payload& payload, const std::string& candidate);

// Deterministic stand-in model. Ranked scores come from mock_score (scaled
// by 10 through a softmax); completions pick from a lexicon by prompt hash,
// defaulting to a hex digest prefix.
class MockBackend : public Backend {
public:
    explicit MockBackend(std::string model_id = "mock-1",
                         Capabilities caps = {true, true, true},
                         std::vector<std::string> lexicon = {});

    std::string model_id() const override { return model_id_; }
    Capabilities capabilities() const override { return caps_; }
    std::vector<Response> run_batch(std::span<const Query> batch) override;

    std::uint64_t batches_run() const { return batches_; }
    std::uint64_t queries_run() const { return queries_; }

private:
    std::string model_id_;
    Capabilities caps_;
    std::vector<std::string> lexicon_;
    std::atomic<std::uint64_t> batches_{0};
    std::atomic<std::uint64_t> queries_{0};
};

// Deterministic encoder-based stand-in for vision-language ranking. Each
// content string maps to a fixed unit vector; scores are scaled dot products.
class MockEncoderBackend : public EncoderBackend {
public:
    explicit MockEncoderBackend(std::string model_id = "mock-encoder-1");

    std::string model_id() const override { return model_id_; }
    Capabilities capabilities() const override { return {false, true, true}; }

    std::vector<double> encode(Modality modality, const std::string& content) override;
    double score_raw(const std::vector<double>& payload_repr,
                     const std::vector<double>& candidate_repr) const override;

    std::uint64_t encode_calls() const { return encode_calls_; }

private:
    std::string model_id_;
    std::atomic<std::uint64_t> encode_calls_{0};
};

}  // namespace pws
