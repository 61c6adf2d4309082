#include "backend.hpp"

#include <cmath>

#include "error.hpp"

namespace pws {

bool Capabilities::supports(const Query& q) const {
    if (std::holds_alternative<CompletionQuery>(q)) return complete;
    const auto& r = std::get<RankedQuery>(q);
    return r.payload.kind == Payload::Kind::image ? rank_image : rank_text;
}

std::vector<std::string> Capabilities::names() const {
    std::vector<std::string> out;
    if (complete) out.push_back("complete");
    if (rank_text) out.push_back("rank_text");
    if (rank_image) out.push_back("rank_image");
    return out;
}

Capabilities Capabilities::from_names(const std::vector<std::string>& names) {
    Capabilities c;
    for (const auto& n : names) {
        if (n == "complete") c.complete = true;
        else if (n == "rank_text") c.rank_text = true;
        else if (n == "rank_image") c.rank_image = true;
        else throw Error(ErrorCode::Parse, "unknown capability: " + n);
    }
    return c;
}

std::string payload_content(const Payload& p) {
    return canonical_dump(payload_to_json(p));
}

double mock_score(const Payload& payload, const std::string& candidate) {
    std::string material = payload_content(payload);
    material.push_back('\x1f');
    material += candidate;
    return static_cast<double>(sha256(material).prefix_u64()) * 0x1.0p-64;
}

MockBackend::MockBackend(std::string model_id, Capabilities caps,
                         std::vector<std::string> lexicon)
    : model_id_(std::move(model_id)), caps_(caps), lexicon_(std::move(lexicon)) {}

std::vector<Response> MockBackend::run_batch(std::span<const Query> batch) {
    batches_ += 1;
    queries_ += batch.size();
    std::vector<Response> out;
    out.reserve(batch.size());
    for (const Query& q : batch) {
        if (const auto* c = std::get_if<CompletionQuery>(&q)) {
            CompletionResponse r;
            const Digest d = sha256("mock-complete\x1f" + c->prompt);
            if (lexicon_.empty()) {
                r.prediction = d.hex().substr(0, 8);
            } else {
                r.prediction = lexicon_[static_cast<std::size_t>(d.prefix_u64() % lexicon_.size())];
            }
            out.emplace_back(std::move(r));
        } else {
            const auto& rq = std::get<RankedQuery>(q);
            std::vector<double> raw;
            raw.reserve(rq.candidates.size());
            for (const auto& cand : rq.candidates)
                raw.push_back(mock_score(rq.payload, cand) * 10.0);
            out.emplace_back(make_ranked_response(rq.candidates, raw));
        }
    }
    return out;
}

std::vector<Response> EncoderBackend::run_batch(std::span<const Query> batch) {
    return run_batch_with_encoder(batch,
                                  [this](Modality m, const std::string& content) {
                                      return encode(m, content);
                                  });
}

std::vector<Response> EncoderBackend::run_batch_with_encoder(std::span<const Query> batch,
                                                             const EncodeFn& encode_fn) {
    std::vector<Response> out;
    out.reserve(batch.size());
    for (const Query& q : batch) {
        const auto* rq = std::get_if<RankedQuery>(&q);
        if (!rq)
            throw Error(ErrorCode::Capability,
                        model_id() + " supports ranked queries only");
        const Modality payload_modality =
            rq->payload.kind == Payload::Kind::image ? Modality::image : Modality::text;
        const std::vector<double> payload_repr =
            encode_fn(payload_modality, payload_content(rq->payload));
        std::vector<double> raw;
        raw.reserve(rq->candidates.size());
        for (const auto& cand : rq->candidates)
            raw.push_back(score_raw(payload_repr, encode_fn(Modality::text, cand)));
        out.emplace_back(make_ranked_response(rq->candidates, raw));
    }
    return out;
}

MockEncoderBackend::MockEncoderBackend(std::string model_id)
    : model_id_(std::move(model_id)) {}

std::vector<double> MockEncoderBackend::encode(Modality modality, const std::string& content) {
    encode_calls_ += 1;
    const char* tag = modality == Modality::image ? "img" : "txt";
    const Digest d = sha256(std::string(tag) + "\x1f" + content);
    std::vector<double> v(8);
    double norm = 0.0;
    for (std::size_t i = 0; i < 8; ++i) {
        std::uint32_t word = 0;
        for (std::size_t b = 0; b < 4; ++b)
            word = (word << 8) | d.bytes[i * 4 + b];
        v[i] = static_cast<double>(word) * 0x1.0p-31 - 1.0;  // [-1,1)
        norm += v[i] * v[i];
    }
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    return v;
}

double MockEncoderBackend::score_raw(const std::vector<double>& payload_repr,
                                     const std::vector<double>& candidate_repr) const {
    double dot = 0.0;
    for (std::size_t i = 0; i < payload_repr.size() && i < candidate_repr.size(); ++i)
        dot += payload_repr[i] * candidate_repr[i];
    return dot * 5.0;
}

}  // namespace pws
