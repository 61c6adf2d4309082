#include "query.hpp"

#include <unordered_set>

#include "error.hpp"

namespace pws {

Payload Payload::from_text(std::string t) {
    Payload p;
    p.kind = Kind::text;
    p.text = std::move(t);
    return p;
}

Payload Payload::from_image_file(const std::string& path) {
    if (path.empty()) throw Error(ErrorCode::InvalidArgument, "empty image path");
    Payload p;
    p.kind = Kind::image;
    p.image_path = path;
    p.image_sha256 = sha256_file(path).hex();
    return p;
}

void validate(const Query& q) {
    if (const auto* c = std::get_if<CompletionQuery>(&q)) {
        if (c->prompt.empty())
            throw Error(ErrorCode::InvalidArgument, "completion query has empty prompt");
        if (c->gen.temperature < 0.0)
            throw Error(ErrorCode::InvalidArgument, "temperature must be >= 0");
        return;
    }
    const auto& r = std::get<RankedQuery>(q);
    if (r.candidates.empty())
        throw Error(ErrorCode::InvalidArgument, "ranked query has no candidates");
    std::unordered_set<std::string> seen;
    for (const auto& c : r.candidates)
        if (!seen.insert(c).second)
            throw Error(ErrorCode::InvalidArgument, "duplicate candidate: \"" + c + "\"");
    if (r.payload.kind == Payload::Kind::text && r.payload.text.empty())
        throw Error(ErrorCode::InvalidArgument, "ranked query has empty prompt");
    if (r.payload.kind == Payload::Kind::image && r.payload.image_sha256.empty())
        throw Error(ErrorCode::InvalidArgument, "ranked query has no image digest");
}

Json payload_to_json(const Payload& p) {
    Json j;
    if (p.kind == Payload::Kind::text) {
        j["kind"] = "text";
        j["text"] = p.text;
    } else {
        j["kind"] = "image";
        j["sha256"] = p.image_sha256;
    }
    return j;
}

static Payload payload_from_json(const Json& j) {
    Payload p;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "text") {
        p.kind = Payload::Kind::text;
        p.text = j.at("text").get<std::string>();
    } else if (kind == "image") {
        p.kind = Payload::Kind::image;
        p.image_sha256 = j.at("sha256").get<std::string>();
    } else {
        throw Error(ErrorCode::Parse, "unknown payload kind: " + kind);
    }
    return p;
}

Json query_to_json(const Query& q) {
    Json j;
    if (const auto* c = std::get_if<CompletionQuery>(&q)) {
        j["type"] = "completion";
        j["prompt"] = c->prompt;
        Json gen;
        gen["max_tokens"] = c->gen.max_tokens;
        gen["temperature"] = c->gen.temperature;
        if (c->gen.stop) gen["stop"] = *c->gen.stop;
        j["gen"] = std::move(gen);
    } else {
        const auto& r = std::get<RankedQuery>(q);
        j["type"] = "ranked";
        j["payload"] = payload_to_json(r.payload);
        j["candidates"] = r.candidates;
    }
    return j;
}

Query query_from_json(const Json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "completion") {
        CompletionQuery c;
        c.prompt = j.at("prompt").get<std::string>();
        const Json& gen = j.at("gen");
        c.gen.max_tokens = gen.at("max_tokens").get<std::uint32_t>();
        c.gen.temperature = gen.at("temperature").get<double>();
        if (gen.contains("stop")) c.gen.stop = gen.at("stop").get<std::string>();
        return c;
    }
    if (type == "ranked") {
        RankedQuery r;
        r.payload = payload_from_json(j.at("payload"));
        r.candidates = j.at("candidates").get<std::vector<std::string>>();
        return r;
    }
    throw Error(ErrorCode::Parse, "unknown query type: " + type);
}

Digest query_cache_key(const std::string& model_id, const Query& q) {
    std::string material = model_id;
    material.push_back('\x1f');
    material += canonical_query(q);
    return sha256(material);
}

}  // namespace pws
