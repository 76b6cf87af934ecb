#pragma once

#include <cstdint>
#include <initializer_list>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace sigtrace {

/// Tagged state value stored in signals and histories.
///
/// Equality is deep and deterministic. Floats compare by their 64-bit
/// pattern, so NaN equals an identically-encoded NaN and 0.0 differs
/// from -0.0. Maps are ordered by key, which keeps every serialization
/// canonical.
class Value {
public:
    enum class Kind : std::uint8_t { Null = 0, Bool = 1, Int = 2, Float = 3, String = 4, List = 5, Map = 6 };

    using List = std::vector<Value>;
    using Map = std::map<std::string, Value, std::less<>>;

    Value() = default;
    Value(std::nullptr_t) { }
    Value(bool b) : data_(b) { }
    Value(int i) : data_(static_cast<std::int64_t>(i)) { }
    Value(std::int64_t i) : data_(i) { }
    Value(double d) : data_(d) { }
    Value(const char* s) : data_(std::string(s)) { }
    Value(std::string s) : data_(std::move(s)) { }
    Value(std::string_view s) : data_(std::string(s)) { }
    Value(List l) : data_(std::move(l)) { }
    Value(Map m) : data_(std::move(m)) { }

    static Value list(std::initializer_list<Value> items) { return Value(List(items)); }
    static Value map(std::initializer_list<std::pair<const std::string, Value>> items) { return Value(Map(items)); }

    Kind kind() const noexcept { return static_cast<Kind>(data_.index()); }
    bool is_null() const noexcept { return kind() == Kind::Null; }
    bool is_bool() const noexcept { return kind() == Kind::Bool; }
    bool is_int() const noexcept { return kind() == Kind::Int; }
    bool is_float() const noexcept { return kind() == Kind::Float; }
    bool is_number() const noexcept { return is_int() || is_float(); }
    bool is_string() const noexcept { return kind() == Kind::String; }
    bool is_list() const noexcept { return kind() == Kind::List; }
    bool is_map() const noexcept { return kind() == Kind::Map; }

    // Accessors throw Error(TypeMismatch) on the wrong kind.
    bool as_bool() const;
    std::int64_t as_int() const;
    double as_float() const;
    double as_number() const;
    const std::string& as_string() const;
    const List& as_list() const;
    const Map& as_map() const;

    friend bool operator==(const Value& a, const Value& b) noexcept;

    /// Short human-readable rendering used by the CLI and diagnostics.
    std::string to_display() const;

private:
    std::variant<std::monostate, bool, std::int64_t, double, std::string, List, Map> data_;
};

std::string_view to_string(Value::Kind kind) noexcept;

} // namespace sigtrace
