#include "helpers.hpp"

#include <cmath>

using namespace sigtrace;

namespace {

Transaction drag_txn()
{
    Transaction t;
    t.id = TxnId {2, 4};
    t.lamport = 40;
    t.deps = {{1, 3}, {3, 7}};
    t.action.id = ActionId {2, 9};
    t.action.label = "drag";
    t.action.kind = "transform";
    t.action.started_at = -5;
    t.action.ended_at = 1700000000123;
    t.action.opened = VersionStamp {30, 2};
    t.action.closed = VersionStamp {40, 2};
    ActionDescriptor child;
    child.id = ActionId {2, 10};
    child.label = "snap";
    child.kind = "transform";
    child.implicit = true;
    child.reverts = ActionId {2, 1};
    child.opened = VersionStamp {33, 2};
    child.closed = VersionStamp {35, 2};
    t.action.children.push_back(child);
    const Value values[] = {Value(1), Value(-2.5), Value::map({{"px", 3}, {"tags", Value::list({"a", true, nullptr})}})};
    std::uint64_t l = 31;
    for (const auto& v : values)
        t.ops.push_back(Op {VersionStamp {l++, 2}, t.action.id, 1000 + static_cast<WallTime>(l), op::SetValue {SignalId {"pos"}, v}});
    return t;
}

Transaction every_op_txn()
{
    auto t = drag_txn();
    auto at = [&](std::uint64_t l, auto body) { return Op {VersionStamp {l, 2}, t.action.id, 7, body}; };
    t.ops = {
        at(31, op::DeclareSource {SignalId {"x"}, Value("init")}),
        at(32, op::DeclareDerived {SignalId {"d"}, {SignalId {"x"}, SignalId {"y"}}, "concat"}),
        at(33, op::DeclareCheckpoint {CheckpointId {2, 1}, "v1", {{SignalId {"x"}, VersionStamp {31, 2}}}}),
        at(34, op::CreatePath {PathId {2, 1}, "tour"}),
        at(35, op::AppendStep {PathId {2, 1}, CheckpointId {2, 1}}),
    };
    return t;
}

} // namespace

TEST_CASE("transactions round-trip")
{
    for (const auto& t : {drag_txn(), every_op_txn(), Transaction {TxnId {1, 1}, 1, {}, {}, {}}}) {
        auto bytes = encode(t);
        CHECK(bytes.front() == kTransactionFormatVersion);
        CHECK(decode(bytes) == t);
    }
}

TEST_CASE("encoding is canonical")
{
    auto a = encode(drag_txn());
    auto b = encode(drag_txn());
    CHECK(a == b);
    CHECK(encode(decode(a)) == a);
    auto t = drag_txn();
    t.ops[0].wall_time += 1;
    CHECK(encode(t) != a);
}

TEST_CASE("float bits survive")
{
    auto t = drag_txn();
    std::get<op::SetValue>(t.ops[0].body).value = Value(-0.0);
    auto back = decode(encode(t));
    auto v = std::get<op::SetValue>(back.ops[0].body).value;
    CHECK(std::signbit(v.as_float()));
}

TEST_CASE("truncated bytes are rejected")
{
    auto bytes = encode(drag_txn());
    for (std::size_t n = 0; n < bytes.size(); ++n) {
        std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(n));
        CHECK_CODE(decode(cut), MalformedTransaction);
    }
}

TEST_CASE("trailing bytes, bad tags and versions are rejected")
{
    auto bytes = encode(drag_txn());
    auto extra = bytes;
    extra.push_back(0);
    CHECK_CODE(decode(extra), MalformedTransaction);
    auto version = bytes;
    version[0] = 99;
    CHECK_CODE(decode(version), MalformedTransaction);

    // Value tag of the first set op sits right after its signal name.
    auto t = drag_txn();
    t.ops.resize(1);
    std::get<op::SetValue>(t.ops[0].body).value = Value(nullptr);
    auto one = encode(t);
    one.back() = 0x7f;
    CHECK_CODE(decode(one), MalformedTransaction);
}

TEST_CASE("hex helpers")
{
    std::vector<std::uint8_t> b {0x00, 0xab, 0x10};
    CHECK(to_hex(b) == "00ab10");
    CHECK(from_hex("00ab10") == b);
    CHECK_CODE(from_hex("abc"), MalformedTransaction);
    CHECK_CODE(from_hex("zz"), MalformedTransaction);
}
