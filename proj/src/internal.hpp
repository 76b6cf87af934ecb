#pragma once

// Shared between translation units; not installed.

#include "sigtrace/ids.hpp"
#include "sigtrace/value.hpp"

#include <json.hpp>

namespace sigtrace::detail {

// Thrown from Replica::emit when a partial replay reaches its stop record.
// Deliberately not a std::exception so generic handlers let it pass.
struct ReplayHalt { };

using Json = nlohmann::json;

// Values in JSON: null/bool/int/string/list map directly; floats become
// {"f":"<16 hex digits of the bit pattern>"} and maps {"m":{...}}.
Json value_to_json(const Value& v);
Value value_from_json(const Json& j); // throws Error(MalformedTrace)

std::string dump(const Json& j);

} // namespace sigtrace::detail
