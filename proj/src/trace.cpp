#include "sigtrace/trace.hpp"

#include "internal.hpp"
#include "sigtrace/error.hpp"
#include "sigtrace/transaction.hpp"

#include <fstream>
#include <sstream>

namespace sigtrace {

using detail::Json;

std::string_view type_name(const TraceEvent& ev) noexcept
{
    static constexpr std::string_view names[] = {"declare_source", "declare_derived", "entry", "action_begin",
        "action_end", "checkpoint", "branch", "path", "txn_commit", "txn_deliver"};
    return names[ev.index()];
}

std::optional<VersionStamp> stamp_of(const TraceEvent& ev) noexcept
{
    return std::visit(
        [](const auto& r) -> std::optional<VersionStamp> {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, record::Branch> || std::is_same_v<T, record::TxnDeliver>)
                return std::nullopt;
            else if constexpr (std::is_same_v<T, record::TxnCommit>)
                return VersionStamp {r.lamport, r.txn.replica};
            else
                return r.stamp;
        },
        ev);
}

WallTime wall_time_of(const TraceEvent& ev) noexcept
{
    return std::visit([](const auto& r) { return r.wall_time; }, ev);
}

std::string_view to_string(record::DeliverResult r) noexcept
{
    switch (r) {
    case record::DeliverResult::Applied: return "applied";
    case record::DeliverResult::Buffered: return "buffered";
    case record::DeliverResult::Duplicate: return "duplicate";
    }
    return "?";
}

namespace {

std::string_view batch_name(BatchMark m)
{
    switch (m) {
    case BatchMark::None: return "none";
    case BatchMark::Open: return "open";
    case BatchMark::Close: return "close";
    }
    return "none";
}

template <class T> Json opt_str(const std::optional<T>& v)
{
    return v ? Json(v->str()) : Json(nullptr);
}

Json frontier_json(const Frontier& f)
{
    Json obj = Json::object();
    for (const auto& [sig, stamp] : f)
        obj[sig.name] = stamp.str();
    return obj;
}

Json to_json(const TraceEvent& ev)
{
    Json j = std::visit(
        [](const auto& r) -> Json {
            using T = std::decay_t<decltype(r)>;
            Json o = Json::object();
            if constexpr (std::is_same_v<T, record::DeclareSource>) {
                o["signal"] = r.signal.name;
                o["stamp"] = r.stamp.str();
                o["value"] = detail::value_to_json(r.value);
                o["action"] = r.action.str();
                o["implicit"] = r.implicit;
                o["batch"] = batch_name(r.batch);
            } else if constexpr (std::is_same_v<T, record::DeclareDerived>) {
                o["signal"] = r.signal.name;
                o["stamp"] = r.stamp.str();
                Json deps = Json::array();
                for (const auto& d : r.deps)
                    deps.push_back(d.name);
                o["deps"] = std::move(deps);
                o["function"] = r.function;
                o["action"] = r.action.str();
                o["implicit"] = r.implicit;
            } else if constexpr (std::is_same_v<T, record::Entry>) {
                o["signal"] = r.signal.name;
                o["stamp"] = r.stamp.str();
                o["value"] = detail::value_to_json(r.value);
                o["action"] = r.action.str();
                o["implicit"] = r.implicit;
                o["origin"] = to_string(r.origin);
                o["branch"] = r.branch.str();
                o["batch"] = batch_name(r.batch);
            } else if constexpr (std::is_same_v<T, record::ActionBegin>) {
                o["action"] = r.action.str();
                o["label"] = r.label;
                o["kind"] = r.kind;
                o["parent"] = opt_str(r.parent);
                o["reverts"] = opt_str(r.reverts);
                o["stamp"] = r.stamp.str();
            } else if constexpr (std::is_same_v<T, record::ActionEnd>) {
                o["action"] = r.action.str();
                o["label"] = r.label;
                o["kind"] = r.kind;
                o["parent"] = opt_str(r.parent);
                o["reverts"] = opt_str(r.reverts);
                o["implicit"] = r.implicit;
                o["origin"] = r.origin;
                o["opened"] = r.opened.str();
                o["stamp"] = r.stamp.str();
                o["started_at"] = r.started_at;
                o["entries"] = r.entries;
            } else if constexpr (std::is_same_v<T, record::Checkpoint>) {
                o["checkpoint"] = r.checkpoint.str();
                o["label"] = r.label;
                o["branch"] = r.branch.str();
                o["stamp"] = r.stamp.str();
                o["frontier"] = frontier_json(r.frontier);
                o["action"] = r.action.str();
                o["implicit"] = r.implicit;
            } else if constexpr (std::is_same_v<T, record::Branch>) {
                o["op"] = r.op == record::Branch::Kind::Fork ? "fork" : "checkout";
                o["branch"] = r.branch.str();
                o["label"] = r.label;
                o["parent"] = opt_str(r.parent);
                o["checkpoint"] = opt_str(r.checkpoint);
            } else if constexpr (std::is_same_v<T, record::Path>) {
                o["op"] = r.op == record::Path::Kind::Create ? "create" : "step";
                o["path"] = r.path.str();
                o["label"] = r.label;
                o["checkpoint"] = opt_str(r.checkpoint);
                o["stamp"] = r.stamp.str();
                o["action"] = r.action.str();
                o["implicit"] = r.implicit;
                o["batch"] = batch_name(r.batch);
            } else if constexpr (std::is_same_v<T, record::TxnCommit>) {
                o["txn"] = r.txn.str();
                o["lamport"] = r.lamport;
                o["label"] = r.label;
                o["ops"] = r.ops;
                o["bytes"] = to_hex(r.bytes);
            } else if constexpr (std::is_same_v<T, record::TxnDeliver>) {
                o["txn"] = r.txn.str();
                o["result"] = to_string(r.result);
                o["bytes"] = to_hex(r.bytes);
            }
            o["wall_time"] = r.wall_time;
            return o;
        },
        ev);
    j["type"] = type_name(ev);
    return j;
}

// Strict field reader: every field must be present with the right JSON
// type, and no unread field may remain.
class Fields {
public:
    explicit Fields(const Json& obj) : obj_(obj) { }

    const Json& raw(const char* key)
    {
        auto it = obj_.find(key);
        if (it == obj_.end())
            throw Error(ErrorCode::MalformedTrace, std::string("missing field '") + key + "'");
        ++used_;
        return *it;
    }

    std::string str(const char* key)
    {
        const auto& v = raw(key);
        if (!v.is_string())
            throw Error(ErrorCode::MalformedTrace, std::string("field '") + key + "' must be a string");
        return v.get<std::string>();
    }

    std::int64_t i64(const char* key)
    {
        const auto& v = raw(key);
        if (!v.is_number_integer())
            throw Error(ErrorCode::MalformedTrace, std::string("field '") + key + "' must be an integer");
        if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX))
            throw Error(ErrorCode::MalformedTrace, std::string("field '") + key + "' out of range");
        return v.get<std::int64_t>();
    }

    std::uint64_t u64(const char* key)
    {
        const auto& v = raw(key);
        if (!v.is_number_unsigned())
            throw Error(ErrorCode::MalformedTrace, std::string("field '") + key + "' must be a non-negative integer");
        return v.get<std::uint64_t>();
    }

    bool boolean(const char* key)
    {
        const auto& v = raw(key);
        if (!v.is_boolean())
            throw Error(ErrorCode::MalformedTrace, std::string("field '") + key + "' must be a boolean");
        return v.get<bool>();
    }

    template <class T> T id(const char* key) { return T::parse(str(key)); }

    template <class T> std::optional<T> opt_id(const char* key)
    {
        const auto& v = raw(key);
        if (v.is_null())
            return std::nullopt;
        if (!v.is_string())
            throw Error(ErrorCode::MalformedTrace, std::string("field '") + key + "' must be a string or null");
        return T::parse(v.get<std::string>());
    }

    Value value(const char* key) { return detail::value_from_json(raw(key)); }

    BatchMark batch(const char* key)
    {
        auto s = str(key);
        if (s == "none")
            return BatchMark::None;
        if (s == "open")
            return BatchMark::Open;
        if (s == "close")
            return BatchMark::Close;
        throw Error(ErrorCode::MalformedTrace, "unknown batch mark '" + s + "'");
    }

    std::vector<std::uint8_t> bytes(const char* key)
    {
        try {
            return from_hex(str(key));
        } catch (const Error& e) {
            throw Error(ErrorCode::MalformedTrace, e.detail());
        }
    }

    Frontier frontier(const char* key)
    {
        const auto& v = raw(key);
        if (!v.is_object())
            throw Error(ErrorCode::MalformedTrace, std::string("field '") + key + "' must be an object");
        Frontier f;
        for (const auto& [sig, stamp] : v.items()) {
            if (!stamp.is_string())
                throw Error(ErrorCode::MalformedTrace, "frontier stamps must be strings");
            f.emplace(SignalId {sig}, VersionStamp::parse(stamp.get<std::string>()));
        }
        return f;
    }

    void finish() const
    {
        if (used_ != obj_.size())
            throw Error(ErrorCode::MalformedTrace, "unexpected extra fields in record");
    }

private:
    const Json& obj_;
    std::size_t used_ = 0;
};

TraceEvent from_json(const Json& j)
{
    Fields f(j);
    auto type = f.str("type");
    auto wall = [&] { return f.i64("wall_time"); };
    TraceEvent ev;
    if (type == "declare_source") {
        record::DeclareSource r;
        r.signal = SignalId {f.str("signal")};
        r.stamp = f.id<VersionStamp>("stamp");
        r.value = f.value("value");
        r.action = f.id<ActionId>("action");
        r.implicit = f.boolean("implicit");
        r.batch = f.batch("batch");
        r.wall_time = wall();
        ev = std::move(r);
    } else if (type == "declare_derived") {
        record::DeclareDerived r;
        r.signal = SignalId {f.str("signal")};
        r.stamp = f.id<VersionStamp>("stamp");
        const auto& deps = f.raw("deps");
        if (!deps.is_array())
            throw Error(ErrorCode::MalformedTrace, "field 'deps' must be an array");
        for (const auto& d : deps) {
            if (!d.is_string())
                throw Error(ErrorCode::MalformedTrace, "deps must be strings");
            r.deps.push_back(SignalId {d.get<std::string>()});
        }
        r.function = f.str("function");
        r.action = f.id<ActionId>("action");
        r.implicit = f.boolean("implicit");
        r.wall_time = wall();
        ev = std::move(r);
    } else if (type == "entry") {
        record::Entry r;
        r.signal = SignalId {f.str("signal")};
        r.stamp = f.id<VersionStamp>("stamp");
        r.value = f.value("value");
        r.action = f.id<ActionId>("action");
        r.implicit = f.boolean("implicit");
        auto origin = f.str("origin");
        if (origin == "source")
            r.origin = Origin::Source;
        else if (origin == "derived")
            r.origin = Origin::Derived;
        else
            throw Error(ErrorCode::MalformedTrace, "unknown origin '" + origin + "'");
        r.branch = f.id<BranchId>("branch");
        r.batch = f.batch("batch");
        r.wall_time = wall();
        ev = std::move(r);
    } else if (type == "action_begin") {
        record::ActionBegin r;
        r.action = f.id<ActionId>("action");
        r.label = f.str("label");
        r.kind = f.str("kind");
        r.parent = f.opt_id<ActionId>("parent");
        r.reverts = f.opt_id<ActionId>("reverts");
        r.stamp = f.id<VersionStamp>("stamp");
        r.wall_time = wall();
        ev = std::move(r);
    } else if (type == "action_end") {
        record::ActionEnd r;
        r.action = f.id<ActionId>("action");
        r.label = f.str("label");
        r.kind = f.str("kind");
        r.parent = f.opt_id<ActionId>("parent");
        r.reverts = f.opt_id<ActionId>("reverts");
        r.implicit = f.boolean("implicit");
        auto origin = f.u64("origin");
        if (origin > UINT32_MAX)
            throw Error(ErrorCode::MalformedTrace, "origin replica out of range");
        r.origin = static_cast<ReplicaId>(origin);
        r.opened = f.id<VersionStamp>("opened");
        r.stamp = f.id<VersionStamp>("stamp");
        r.started_at = f.i64("started_at");
        r.entries = f.u64("entries");
        r.wall_time = wall();
        ev = std::move(r);
    } else if (type == "checkpoint") {
        record::Checkpoint r;
        r.checkpoint = f.id<CheckpointId>("checkpoint");
        r.label = f.str("label");
        r.branch = f.id<BranchId>("branch");
        r.stamp = f.id<VersionStamp>("stamp");
        r.frontier = f.frontier("frontier");
        r.action = f.id<ActionId>("action");
        r.implicit = f.boolean("implicit");
        r.wall_time = wall();
        ev = std::move(r);
    } else if (type == "branch") {
        record::Branch r;
        auto op = f.str("op");
        if (op == "fork")
            r.op = record::Branch::Kind::Fork;
        else if (op == "checkout")
            r.op = record::Branch::Kind::Checkout;
        else
            throw Error(ErrorCode::MalformedTrace, "unknown branch op '" + op + "'");
        r.branch = f.id<BranchId>("branch");
        r.label = f.str("label");
        r.parent = f.opt_id<BranchId>("parent");
        r.checkpoint = f.opt_id<CheckpointId>("checkpoint");
        r.wall_time = wall();
        ev = std::move(r);
    } else if (type == "path") {
        record::Path r;
        auto op = f.str("op");
        if (op == "create")
            r.op = record::Path::Kind::Create;
        else if (op == "step")
            r.op = record::Path::Kind::Step;
        else
            throw Error(ErrorCode::MalformedTrace, "unknown path op '" + op + "'");
        r.path = f.id<PathId>("path");
        r.label = f.str("label");
        r.checkpoint = f.opt_id<CheckpointId>("checkpoint");
        r.stamp = f.id<VersionStamp>("stamp");
        r.action = f.id<ActionId>("action");
        r.implicit = f.boolean("implicit");
        r.batch = f.batch("batch");
        r.wall_time = wall();
        ev = std::move(r);
    } else if (type == "txn_commit") {
        record::TxnCommit r;
        r.txn = f.id<TxnId>("txn");
        r.lamport = f.u64("lamport");
        r.label = f.str("label");
        r.ops = f.u64("ops");
        r.bytes = f.bytes("bytes");
        r.wall_time = wall();
        ev = std::move(r);
    } else if (type == "txn_deliver") {
        record::TxnDeliver r;
        r.txn = f.id<TxnId>("txn");
        auto res = f.str("result");
        if (res == "applied")
            r.result = record::DeliverResult::Applied;
        else if (res == "buffered")
            r.result = record::DeliverResult::Buffered;
        else if (res == "duplicate")
            r.result = record::DeliverResult::Duplicate;
        else
            throw Error(ErrorCode::MalformedTrace, "unknown delivery result '" + res + "'");
        r.bytes = f.bytes("bytes");
        r.wall_time = wall();
        ev = std::move(r);
    } else {
        throw Error(ErrorCode::MalformedTrace, "unknown record type '" + type + "'");
    }
    f.finish();
    return ev;
}

Json header_json(const TraceHeader& h)
{
    return Json {{"type", "header"}, {"format", kTraceFormatName}, {"version", h.version}, {"replica", h.replica},
        {"shared", h.shared}};
}

std::string digest(std::string_view prev, std::string_view line)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](std::string_view s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
    };
    mix(prev);
    mix(line);
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[h & 0xf];
        h >>= 4;
    }
    return out;
}

void append_line(std::string& out, std::string& prev, Json obj)
{
    auto chk = digest(prev, detail::dump(obj));
    obj["chk"] = chk;
    out += detail::dump(obj);
    out += '\n';
    prev = std::move(chk);
}

std::vector<std::string_view> split_lines(std::string_view text)
{
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            lines.push_back(text.substr(pos));
            break;
        }
        lines.push_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return lines;
}

Json parse_line(std::string_view line, std::size_t number)
{
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded())
        throw TraceError(ErrorCode::MalformedTrace, number, "not a JSON record");
    if (!j.is_object())
        throw TraceError(ErrorCode::MalformedTrace, number, "record must be a JSON object");
    return j;
}

} // namespace

std::string serialize_event(const TraceEvent& ev)
{
    return detail::dump(to_json(ev));
}

std::string serialize_trace(const TraceHeader& header, std::span<const TraceEvent> events)
{
    std::string out;
    std::string prev;
    append_line(out, prev, header_json(header));
    for (const auto& ev : events)
        append_line(out, prev, to_json(ev));
    return out;
}

Trace parse_trace(std::string_view text)
{
    auto lines = split_lines(text);
    if (lines.empty())
        throw TraceError(ErrorCode::MalformedTrace, 1, "empty trace: missing header");
    Trace trace;
    {
        auto j = parse_line(lines[0], 1);
        if (!j.contains("type") || j["type"] != "header")
            throw TraceError(ErrorCode::MalformedTrace, 1, "first record must be the header");
        try {
            Fields f(j);
            f.str("type");
            if (f.str("format") != kTraceFormatName)
                throw Error(ErrorCode::MalformedTrace, "unknown format name");
            auto version = f.u64("version");
            if (version > kTraceFormatVersion)
                throw TraceError(ErrorCode::UnsupportedVersion, 1,
                    "trace version " + std::to_string(version) + " is newer than supported version "
                        + std::to_string(kTraceFormatVersion));
            if (version == 0)
                throw Error(ErrorCode::MalformedTrace, "trace version 0 is invalid");
            auto replica = f.u64("replica");
            if (replica > UINT32_MAX)
                throw Error(ErrorCode::MalformedTrace, "replica id out of range");
            trace.header.version = static_cast<std::uint32_t>(version);
            trace.header.replica = static_cast<ReplicaId>(replica);
            trace.header.shared = f.boolean("shared");
            f.str("chk");
            f.finish();
        } catch (const TraceError&) {
            throw;
        } catch (const Error& e) {
            throw TraceError(e.code(), 1, e.detail());
        }
    }
    for (std::size_t i = 1; i < lines.size(); ++i) {
        auto j = parse_line(lines[i], i + 1);
        try {
            auto chk = j.find("chk");
            if (chk == j.end() || !chk->is_string())
                throw Error(ErrorCode::MalformedTrace, "missing field 'chk'");
            j.erase("chk");
            trace.events.push_back(from_json(j));
        } catch (const Error& e) {
            throw TraceError(e.code(), i + 1, e.detail());
        }
    }
    return trace;
}

std::optional<std::size_t> first_integrity_failure(std::string_view text)
{
    auto lines = split_lines(text);
    std::string prev;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        Json j = Json::parse(lines[i], nullptr, false);
        if (j.is_discarded() || !j.is_object())
            return i + 1;
        auto it = j.find("chk");
        if (it == j.end() || !it->is_string())
            return i + 1;
        auto claimed = it->get<std::string>();
        j.erase("chk");
        auto expected = digest(prev, detail::dump(j));
        if (claimed != expected)
            return i + 1;
        prev = std::move(expected);
    }
    return std::nullopt;
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad())
        throw Error(ErrorCode::IoFailure, "read error on '" + path.string() + "'");
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorCode::IoFailure, "cannot open '" + path.string() + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out)
        throw Error(ErrorCode::IoFailure, "write error on '" + path.string() + "'");
}

void write_trace(const std::filesystem::path& path, const TraceHeader& header, std::span<const TraceEvent> events)
{
    write_file(path, serialize_trace(header, events));
}

Trace read_trace(const std::filesystem::path& path)
{
    return parse_trace(read_file(path));
}

} // namespace sigtrace
