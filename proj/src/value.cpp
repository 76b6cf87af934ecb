#include "sigtrace/value.hpp"

#include "sigtrace/error.hpp"

#include <bit>
#include <charconv>
#include <cstdio>

namespace sigtrace {

namespace {

[[noreturn]] void mismatch(Value::Kind want, Value::Kind got)
{
    throw Error(ErrorCode::TypeMismatch,
        "expected " + std::string(to_string(want)) + ", found " + std::string(to_string(got)));
}

void append_display(std::string& out, const Value& v)
{
    switch (v.kind()) {
    case Value::Kind::Null: out += "null"; break;
    case Value::Kind::Bool: out += v.as_bool() ? "true" : "false"; break;
    case Value::Kind::Int: out += std::to_string(v.as_int()); break;
    case Value::Kind::Float: {
        char buf[64];
        auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v.as_float());
        std::string s(buf, end);
        if (s.find_first_of(".einn") == std::string::npos)
            s += ".0";
        out += s;
        break;
    }
    case Value::Kind::String:
        out += '"';
        out += v.as_string();
        out += '"';
        break;
    case Value::Kind::List: {
        out += '[';
        bool first = true;
        for (const auto& item : v.as_list()) {
            if (!first)
                out += ", ";
            first = false;
            append_display(out, item);
        }
        out += ']';
        break;
    }
    case Value::Kind::Map: {
        out += '{';
        bool first = true;
        for (const auto& [k, item] : v.as_map()) {
            if (!first)
                out += ", ";
            first = false;
            out += k;
            out += ": ";
            append_display(out, item);
        }
        out += '}';
        break;
    }
    }
}

} // namespace

std::string_view to_string(Value::Kind kind) noexcept
{
    switch (kind) {
    case Value::Kind::Null: return "null";
    case Value::Kind::Bool: return "bool";
    case Value::Kind::Int: return "int";
    case Value::Kind::Float: return "float";
    case Value::Kind::String: return "string";
    case Value::Kind::List: return "list";
    case Value::Kind::Map: return "map";
    }
    return "?";
}

bool Value::as_bool() const
{
    if (!is_bool())
        mismatch(Kind::Bool, kind());
    return std::get<bool>(data_);
}

std::int64_t Value::as_int() const
{
    if (!is_int())
        mismatch(Kind::Int, kind());
    return std::get<std::int64_t>(data_);
}

double Value::as_float() const
{
    if (!is_float())
        mismatch(Kind::Float, kind());
    return std::get<double>(data_);
}

double Value::as_number() const
{
    if (is_int())
        return static_cast<double>(std::get<std::int64_t>(data_));
    return as_float();
}

const std::string& Value::as_string() const
{
    if (!is_string())
        mismatch(Kind::String, kind());
    return std::get<std::string>(data_);
}

const Value::List& Value::as_list() const
{
    if (!is_list())
        mismatch(Kind::List, kind());
    return std::get<List>(data_);
}

const Value::Map& Value::as_map() const
{
    if (!is_map())
        mismatch(Kind::Map, kind());
    return std::get<Map>(data_);
}

bool operator==(const Value& a, const Value& b) noexcept
{
    if (a.data_.index() != b.data_.index())
        return false;
    if (a.is_float())
        return std::bit_cast<std::uint64_t>(std::get<double>(a.data_))
            == std::bit_cast<std::uint64_t>(std::get<double>(b.data_));
    if (a.is_list())
        return std::get<Value::List>(a.data_) == std::get<Value::List>(b.data_);
    if (a.is_map())
        return std::get<Value::Map>(a.data_) == std::get<Value::Map>(b.data_);
    return a.data_ == b.data_;
}

std::string Value::to_display() const
{
    std::string out;
    append_display(out, *this);
    return out;
}

} // namespace sigtrace
