#pragma once

#include <string>

#include <json.hpp>

namespace pws {

// nlohmann::json with the default (std::map) object backend keeps keys in
// lexicographic order, so a compact dump is already canonical: sorted keys,
// no insignificant whitespace, shortest-round-trip floats.
using Json = nlohmann::json;

inline std::string canonical_dump(const Json& j) { return j.dump(); }

}  // namespace pws
