#include "helpers.hpp"

#include "sigtrace/workloads.hpp"

#include <filesystem>
#include <set>
#include <sstream>

using namespace sigtrace;

namespace {

std::vector<std::string> lines_of(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);)
        out.push_back(l);
    return out;
}

std::string join(const std::vector<std::string>& lines)
{
    std::string out;
    for (const auto& l : lines)
        out += l + "\n";
    return out;
}

template <class F> std::pair<ErrorCode, std::size_t> trace_error(F&& f)
{
    try {
        f();
    } catch (const TraceError& e) {
        return {e.code(), e.line()};
    }
    FAIL("expected a TraceError");
    return {ErrorCode::IoFailure, 0};
}

Replica sample()
{
    auto r = testing::local();
    auto x = r.create_source(1, "x");
    auto f = r.create_source(0.1, "f");
    auto s = r.create_derived({x, f}, "sum", "s");
    auto a = r.begin_action("drag", "transform");
    r.batch([&] {
        r.set(x, 2);
        r.set(f, Value::map({{"k", Value::list({1, "two", nullptr, false})}}));
    });
    r.end_action(a);
    (void)s;
    auto v = r.checkpoint("v1");
    auto p = r.create_path("tour");
    r.append_step(p, v);
    r.branch_from(v, "alt");
    r.set(x, 3);
    r.checkout(BranchId::main());
    r.undo();
    return r;
}

} // namespace

TEST_CASE("header line comes first")
{
    auto r = sample();
    auto lines = lines_of(r.trace_text());
    REQUIRE_FALSE(lines.empty());
    CHECK(lines[0].starts_with("{\"chk\":"));
    CHECK(lines[0].find("\"type\":\"header\"") != std::string::npos);
    CHECK(lines[0].find("\"version\":1") != std::string::npos);
    CHECK(lines.size() == r.events().size() + 1);
}

TEST_CASE("trace round-trips structurally and byte for byte")
{
    auto r = sample();
    auto text = r.trace_text();
    auto t = parse_trace(text);
    CHECK(t.header == r.trace_header());
    CHECK(t.events == r.events());
    CHECK(serialize_trace(t.header, t.events) == text);
    CHECK_FALSE(first_integrity_failure(text).has_value());
}

TEST_CASE("a 100-event session rewrites identically")
{
    auto r = workloads::demo_session(3, 12);
    REQUIRE(r.events().size() >= 100);
    auto text = r.trace_text();
    auto again = parse_trace(text);
    CHECK(serialize_trace(again.header, again.events) == text);
}

TEST_CASE("every record type is exercised")
{
    auto a = testing::shared(1);
    auto b = testing::shared(2);
    auto x = a.create_source(0, "x");
    for (const auto& t : a.take_outbox())
        b.apply_remote(t);
    std::set<std::string> types;
    for (const auto* r : {&a, &b})
        for (const auto& ev : r->events())
            types.insert(std::string(type_name(ev)));
    for (const auto& ev : sample().events())
        types.insert(std::string(type_name(ev)));
    (void)x;
    CHECK(types
        == std::set<std::string> {"declare_source", "declare_derived", "entry", "action_begin", "action_end",
            "checkpoint", "branch", "path", "txn_commit", "txn_deliver"});
}

TEST_CASE("file round-trip")
{
    auto dir = std::filesystem::temp_directory_path() / "sigtrace_trace_test";
    std::filesystem::create_directories(dir);
    auto path = dir / "s.trace";
    auto r = sample();
    write_trace(path, r.trace_header(), r.events());
    auto back = read_trace(path);
    CHECK(back.events == r.events());
    CHECK(read_file(path) == r.trace_text());
    CHECK_CODE(read_trace(dir / "missing.trace"), IoFailure);
    CHECK_CODE(write_file(dir / "no" / "such" / "dir" / "f", "x"), IoFailure);
    std::filesystem::remove_all(dir);
}

TEST_CASE("missing header is reported at line 1")
{
    auto lines = lines_of(sample().trace_text());
    lines.erase(lines.begin());
    auto [code, line] = trace_error([&] { parse_trace(join(lines)); });
    CHECK(code == ErrorCode::MalformedTrace);
    CHECK(line == 1);
    auto [c2, l2] = trace_error([&] { parse_trace(""); });
    CHECK(c2 == ErrorCode::MalformedTrace);
    CHECK(l2 == 1);
}

TEST_CASE("future versions are unsupported")
{
    auto text = sample().trace_text();
    auto pos = text.find("\"version\":1");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 11, "\"version\":2");
    auto [code, line] = trace_error([&] { parse_trace(text); });
    CHECK(code == ErrorCode::UnsupportedVersion);
    CHECK(line == 1);
}

TEST_CASE("structural errors name their line")
{
    auto lines = lines_of(sample().trace_text());
    auto broken = [&](std::size_t at, const std::string& from, const std::string& to) {
        auto copy = lines;
        auto pos = copy[at].find(from);
        REQUIRE(pos != std::string::npos);
        copy[at].replace(pos, from.size(), to);
        return trace_error([&] { parse_trace(join(copy)); });
    };
    auto [c1, l1] = broken(2, "\"type\":\"", "\"type\":\"bogus_");
    CHECK(c1 == ErrorCode::MalformedTrace);
    CHECK(l1 == 3);
    auto [c2, l2] = broken(3, "\"stamp\":\"", "\"stamp\":\"x");
    CHECK(c2 == ErrorCode::MalformedTrace);
    CHECK(l2 == 4);
    auto [c3, l3] = broken(4, "{", "{\"extra\":1,");
    CHECK(c3 == ErrorCode::MalformedTrace);
    CHECK(l3 == 5);
    auto [c4, l4] = broken(1, "}", "");
    CHECK(c4 == ErrorCode::MalformedTrace);
    CHECK(l4 == 2);
}

TEST_CASE("bare floats are rejected")
{
    auto lines = lines_of(sample().trace_text());
    bool found = false;
    for (auto& l : lines) {
        auto pos = l.find("{\"f\":\"");
        if (pos == std::string::npos)
            continue;
        auto end = l.find('}', pos);
        l.replace(pos, end - pos + 1, "0.5");
        found = true;
        break;
    }
    REQUIRE(found);
    CHECK_CODE(parse_trace(join(lines)), MalformedTrace);
}

TEST_CASE("digest chain catches edits")
{
    auto text = sample().trace_text();
    auto lines = lines_of(text);
    auto edited = lines;
    auto pos = edited[3].find("\"wall_time\":");
    REQUIRE(pos != std::string::npos);
    edited[3].insert(pos + 12, "9");
    CHECK(first_integrity_failure(join(edited)) == 4);

    auto dropped = lines;
    dropped.erase(dropped.begin() + 5);
    CHECK(first_integrity_failure(join(dropped)) == 6);

    auto swapped = lines;
    std::swap(swapped[2], swapped[3]);
    CHECK(first_integrity_failure(join(swapped)) == 3);
}

TEST_CASE("serialize_event is stable and key-sorted")
{
    record::Entry e;
    e.signal = SignalId {"x"};
    e.stamp = VersionStamp {3, 1};
    e.value = 2.5;
    e.action = ActionId {1, 1};
    e.wall_time = 12;
    auto s = serialize_event(TraceEvent {e});
    CHECK(s == serialize_event(TraceEvent {e}));
    CHECK(s.starts_with("{\"action\":\"a1.1\""));
    CHECK(s.find("\"value\":{\"f\":\"4004000000000000\"}") != std::string::npos);
    CHECK(stamp_of(TraceEvent {e}) == VersionStamp {3, 1});
    CHECK(wall_time_of(TraceEvent {e}) == 12);
}
