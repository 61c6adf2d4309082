#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "canonical.hpp"
#include "sha256.hpp"

namespace pws {

struct GenParams {
    std::uint32_t max_tokens = 16;
    double temperature = 0.0;
    std::optional<std::string> stop;

    bool operator==(const GenParams&) const = default;
};

// Free-form generation request.
struct CompletionQuery {
    std::string prompt;
    GenParams gen;

    bool operator==(const CompletionQuery&) const = default;
};

// What a ranked query scores against: either a text prompt or an image,
// addressed by the digest of its bytes so keys stay content-stable.
struct Payload {
    enum class Kind { text, image } kind = Kind::text;
    std::string text;         // prompt text (text payloads)
    std::string image_sha256; // lowercase hex (image payloads)
    std::string image_path;   // local path, not part of the canonical form

    static Payload from_text(std::string t);
    static Payload from_image_file(const std::string& path);

    bool operator==(const Payload& o) const {
        return kind == o.kind && text == o.text && image_sha256 == o.image_sha256;
    }
};

// Candidate-scoring request. Candidate order is preserved end-to-end.
struct RankedQuery {
    Payload payload;
    std::vector<std::string> candidates;

    bool operator==(const RankedQuery&) const = default;
};

using Query = std::variant<CompletionQuery, RankedQuery>;

// Validates invariants (nonempty prompt; nonempty, distinct candidates).
void validate(const Query& q);

Json payload_to_json(const Payload& p);
Json query_to_json(const Query& q);
Query query_from_json(const Json& j);

inline std::string canonical_query(const Query& q) { return canonical_dump(query_to_json(q)); }

// Cache key: SHA-256(model_id || 0x1F || canonical query serialization).
Digest query_cache_key(const std::string& model_id, const Query& q);

}  // namespace pws
