#include "internal.hpp"

#include "sigtrace/error.hpp"

#include <bit>
#include <charconv>

namespace sigtrace::detail {

namespace {

std::string bits_hex(double d)
{
    static constexpr char digits[] = "0123456789abcdef";
    auto bits = std::bit_cast<std::uint64_t>(d);
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[bits & 0xf];
        bits >>= 4;
    }
    return out;
}

double hex_bits(const std::string& s)
{
    std::uint64_t bits = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), bits, 16);
    if (s.size() != 16 || ec != std::errc {} || ptr != s.data() + s.size())
        throw Error(ErrorCode::MalformedTrace, "invalid float bit pattern '" + s + "'");
    for (char c : s)
        if (c >= 'A' && c <= 'F')
            throw Error(ErrorCode::MalformedTrace, "float bit pattern must be lowercase hex");
    return std::bit_cast<double>(bits);
}

} // namespace

Json value_to_json(const Value& v)
{
    switch (v.kind()) {
    case Value::Kind::Null: return Json(nullptr);
    case Value::Kind::Bool: return Json(v.as_bool());
    case Value::Kind::Int: return Json(v.as_int());
    case Value::Kind::Float: return Json {{"f", bits_hex(v.as_float())}};
    case Value::Kind::String: return Json(v.as_string());
    case Value::Kind::List: {
        Json arr = Json::array();
        for (const auto& item : v.as_list())
            arr.push_back(value_to_json(item));
        return arr;
    }
    case Value::Kind::Map: {
        Json obj = Json::object();
        for (const auto& [k, item] : v.as_map())
            obj[k] = value_to_json(item);
        return Json {{"m", std::move(obj)}};
    }
    }
    return Json(nullptr);
}

Value value_from_json(const Json& j)
{
    switch (j.type()) {
    case Json::value_t::null: return Value();
    case Json::value_t::boolean: return Value(j.get<bool>());
    case Json::value_t::number_integer: return Value(j.get<std::int64_t>());
    case Json::value_t::number_unsigned: {
        auto u = j.get<std::uint64_t>();
        if (u > static_cast<std::uint64_t>(INT64_MAX))
            throw Error(ErrorCode::MalformedTrace, "integer out of 64-bit signed range");
        return Value(static_cast<std::int64_t>(u));
    }
    case Json::value_t::string: return Value(j.get<std::string>());
    case Json::value_t::array: {
        Value::List items;
        items.reserve(j.size());
        for (const auto& item : j)
            items.push_back(value_from_json(item));
        return Value(std::move(items));
    }
    case Json::value_t::object: {
        if (j.size() == 1 && j.contains("f") && j["f"].is_string())
            return Value(hex_bits(j["f"].get<std::string>()));
        if (j.size() == 1 && j.contains("m") && j["m"].is_object()) {
            Value::Map items;
            for (const auto& [k, item] : j["m"].items())
                items.emplace(k, value_from_json(item));
            return Value(std::move(items));
        }
        throw Error(ErrorCode::MalformedTrace, "object value must be {\"f\":...} or {\"m\":...}");
    }
    default: throw Error(ErrorCode::MalformedTrace, "unsupported JSON value (bare floats are not allowed)");
    }
}

std::string dump(const Json& j)
{
    try {
        return j.dump();
    } catch (const nlohmann::json::type_error& e) {
        throw Error(ErrorCode::TypeMismatch, std::string("cannot serialize: ") + e.what());
    }
}

} // namespace sigtrace::detail
