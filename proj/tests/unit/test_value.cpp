#include "helpers.hpp"

#include "sigtrace/functions.hpp"
#include "sigtrace/ids.hpp"

#include <cmath>
#include <limits>

using namespace sigtrace;
using testing::code_of;

TEST_CASE("deep equality across kinds")
{
    CHECK(Value() == Value(nullptr));
    CHECK(Value(1) == Value(std::int64_t {1}));
    CHECK_FALSE(Value(1) == Value(1.0));
    CHECK_FALSE(Value(true) == Value(1));
    CHECK(Value::list({1, "a", Value::map({{"k", 2.5}})}) == Value::list({1, "a", Value::map({{"k", 2.5}})}));
    CHECK_FALSE(Value::list({1, 2}) == Value::list({2, 1}));
    CHECK(Value::map({{"b", 1}, {"a", 2}}) == Value::map({{"a", 2}, {"b", 1}}));
}

TEST_CASE("floats compare by bit pattern")
{
    double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK(Value(nan) == Value(nan));
    CHECK_FALSE(Value(0.0) == Value(-0.0));
    CHECK(Value(0.1 + 0.2) == Value(0.1 + 0.2));
    CHECK_FALSE(Value(0.1 + 0.2) == Value(0.3));
}

TEST_CASE("accessors enforce kinds")
{
    Value v("text");
    CHECK(v.as_string() == "text");
    CHECK_CODE(v.as_int(), TypeMismatch);
    CHECK_CODE(Value(1).as_list(), TypeMismatch);
    CHECK(Value(3).as_number() == 3.0);
    CHECK(Value(2.5).as_number() == 2.5);
    CHECK_CODE(Value("x").as_number(), TypeMismatch);
}

TEST_CASE("display form")
{
    CHECK(Value().to_display() == "null");
    CHECK(Value(true).to_display() == "true");
    CHECK(Value(-4).to_display() == "-4");
    CHECK(Value(2.0).to_display() == "2.0");
    CHECK(Value(0.1).to_display() == "0.1");
    CHECK(Value("hi").to_display() == "\"hi\"");
    CHECK(Value::list({1, 2}).to_display() == "[1, 2]");
    CHECK(Value::map({{"py", 0}, {"px", 1}}).to_display() == "{px: 1, py: 0}");
}

TEST_CASE("builtin compute functions")
{
    auto reg = FunctionRegistry::with_builtins();
    auto call = [&](const char* name, std::vector<Value> args) { return reg.get(name)(args); };
    CHECK(call("sum", {2, 3}) == Value(5));
    CHECK(call("sum", {2, 0.5}) == Value(2.5));
    CHECK(call("sum", {2, "x", true}) == Value(2));
    CHECK(call("sum", {}) == Value(0));
    CHECK(call("concat", {"a", 1, "b"}) == Value("a1b"));
    CHECK(call("count", {Value::list({1, 2, 3})}) == Value(3));
    CHECK(call("count", {Value(), 5}) == Value(1));
    CHECK(call("max", {1, 7.5, 3}) == Value(7.5));
    CHECK(call("max", {"a"}) == Value());
    CHECK(call("first", {"a", "b"}) == Value("a"));
    CHECK(call("first", {}) == Value());
    CHECK_CODE(reg.get("nope"), MissingComputeFunction);
    reg.add("twice", [](std::span<const Value> a) { return Value(a[0].as_int() * 2); });
    CHECK(reg.contains("twice"));
    CHECK(call("twice", {4}) == Value(8));
}

TEST_CASE("identifier parsing is strict")
{
    CHECK(VersionStamp::parse("12@3") == VersionStamp {12, 3});
    CHECK(VersionStamp {12, 3}.str() == "12@3");
    CHECK(ActionId::parse("a2.7") == ActionId {2, 7});
    CHECK(CheckpointId::parse("c1.4").str() == "c1.4");
    CHECK(PathId::parse("p1.1") == PathId {1, 1});
    CHECK(BranchId::parse("main") == BranchId::main());
    CHECK(BranchId::parse("b3") == BranchId {3});
    CHECK(TxnId::parse("5@2") == TxnId {2, 5});
    for (const char* bad : {"", "12", "@3", "12@", "1 2@3", "12@3x", "-1@2", "012@3", "99999999999999999999@1"})
        CHECK_CODE(VersionStamp::parse(bad), MalformedTrace);
    CHECK_CODE(ActionId::parse("c1.1"), MalformedTrace);
    CHECK_CODE(BranchId::parse("b"), MalformedTrace);
    CHECK(VersionStamp {3, 1} < VersionStamp {3, 2});
    CHECK(VersionStamp {3, 9} < VersionStamp {4, 1});
}
