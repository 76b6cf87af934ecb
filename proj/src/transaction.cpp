#include "sigtrace/transaction.hpp"

#include "sigtrace/error.hpp"

#include <bit>
#include <cstring>

namespace sigtrace {

namespace {

constexpr int kMaxDepth = 64;

enum class OpTag : std::uint8_t {
    DeclareSource = 1,
    DeclareDerived = 2,
    SetValue = 3,
    DeclareCheckpoint = 4,
    CreatePath = 5,
    AppendStep = 6,
};

class Writer {
public:
    void u8(std::uint8_t b) { out_.push_back(b); }

    void varint(std::uint64_t v)
    {
        while (v >= 0x80) {
            out_.push_back(static_cast<std::uint8_t>(v | 0x80));
            v >>= 7;
        }
        out_.push_back(static_cast<std::uint8_t>(v));
    }

    void zigzag(std::int64_t v) { varint((static_cast<std::uint64_t>(v) << 1) ^ static_cast<std::uint64_t>(v >> 63)); }

    void str(const std::string& s)
    {
        varint(s.size());
        out_.insert(out_.end(), s.begin(), s.end());
    }

    void stamp(VersionStamp s)
    {
        varint(s.lamport);
        varint(s.replica);
    }

    template <typename Id> void id(const Id& i)
    {
        varint(i.replica);
        varint(i.counter);
    }

    void value(const Value& v)
    {
        u8(static_cast<std::uint8_t>(v.kind()));
        switch (v.kind()) {
        case Value::Kind::Null: break;
        case Value::Kind::Bool: u8(v.as_bool() ? 1 : 0); break;
        case Value::Kind::Int: zigzag(v.as_int()); break;
        case Value::Kind::Float: {
            auto bits = std::bit_cast<std::uint64_t>(v.as_float());
            for (int i = 0; i < 8; ++i)
                u8(static_cast<std::uint8_t>(bits >> (8 * i)));
            break;
        }
        case Value::Kind::String: str(v.as_string()); break;
        case Value::Kind::List:
            varint(v.as_list().size());
            for (const auto& item : v.as_list())
                value(item);
            break;
        case Value::Kind::Map:
            varint(v.as_map().size());
            for (const auto& [k, item] : v.as_map()) {
                str(k);
                value(item);
            }
            break;
        }
    }

    void descriptor(const ActionDescriptor& d)
    {
        id(d.id);
        str(d.label);
        str(d.kind);
        u8(static_cast<std::uint8_t>((d.implicit ? 1 : 0) | (d.reverts ? 2 : 0)));
        if (d.reverts)
            id(*d.reverts);
        zigzag(d.started_at);
        zigzag(d.ended_at);
        stamp(d.opened);
        stamp(d.closed);
        varint(d.children.size());
        for (const auto& c : d.children)
            descriptor(c);
    }

    void frontier(const Frontier& f)
    {
        varint(f.size());
        for (const auto& [s, st] : f) {
            str(s.name);
            stamp(st);
        }
    }

    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) { }

    [[noreturn]] void fail(const std::string& what) const
    {
        throw Error(ErrorCode::MalformedTransaction, what + " at byte " + std::to_string(pos_));
    }

    bool done() const { return pos_ == in_.size(); }

    std::uint8_t u8()
    {
        if (pos_ >= in_.size())
            fail("unexpected end of input");
        return in_[pos_++];
    }

    std::uint64_t varint()
    {
        std::uint64_t v = 0;
        for (int shift = 0; shift < 64; shift += 7) {
            auto b = u8();
            if (shift == 63 && (b & 0x7e))
                fail("varint overflow");
            v |= static_cast<std::uint64_t>(b & 0x7f) << shift;
            if (!(b & 0x80)) {
                // canonical form: no redundant trailing zero groups
                if (b == 0 && shift > 0)
                    fail("non-canonical varint");
                return v;
            }
        }
        fail("varint too long");
    }

    std::uint32_t u32()
    {
        auto v = varint();
        if (v > 0xffffffffu)
            fail("replica id out of range");
        return static_cast<std::uint32_t>(v);
    }

    std::int64_t zigzag()
    {
        auto v = varint();
        return static_cast<std::int64_t>(v >> 1) ^ -static_cast<std::int64_t>(v & 1);
    }

    std::size_t count()
    {
        auto n = varint();
        // every element takes at least one byte
        if (n > in_.size() - pos_)
            fail("count exceeds remaining input");
        return static_cast<std::size_t>(n);
    }

    std::string str()
    {
        auto n = count();
        std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    VersionStamp stamp()
    {
        VersionStamp s;
        s.lamport = varint();
        s.replica = u32();
        return s;
    }

    template <typename Id> Id id()
    {
        Id i;
        i.replica = u32();
        i.counter = varint();
        return i;
    }

    Value value(int depth = 0)
    {
        if (depth > kMaxDepth)
            fail("value nesting too deep");
        auto tag = u8();
        switch (static_cast<Value::Kind>(tag)) {
        case Value::Kind::Null: return Value();
        case Value::Kind::Bool: {
            auto b = u8();
            if (b > 1)
                fail("invalid bool");
            return Value(b == 1);
        }
        case Value::Kind::Int: return Value(zigzag());
        case Value::Kind::Float: {
            std::uint64_t bits = 0;
            for (int i = 0; i < 8; ++i)
                bits |= static_cast<std::uint64_t>(u8()) << (8 * i);
            return Value(std::bit_cast<double>(bits));
        }
        case Value::Kind::String: return Value(str());
        case Value::Kind::List: {
            auto n = count();
            Value::List items;
            items.reserve(n);
            for (std::size_t i = 0; i < n; ++i)
                items.push_back(value(depth + 1));
            return Value(std::move(items));
        }
        case Value::Kind::Map: {
            auto n = count();
            Value::Map items;
            std::string prev;
            for (std::size_t i = 0; i < n; ++i) {
                auto k = str();
                if (i > 0 && !(prev < k))
                    fail("map keys not strictly ascending");
                prev = k;
                items.emplace_hint(items.end(), std::move(k), value(depth + 1));
            }
            return Value(std::move(items));
        }
        }
        fail("unknown value tag " + std::to_string(tag));
    }

    ActionDescriptor descriptor(int depth = 0)
    {
        if (depth > kMaxDepth)
            fail("action nesting too deep");
        ActionDescriptor d;
        d.id = id<ActionId>();
        d.label = str();
        d.kind = str();
        auto flags = u8();
        if (flags & ~3u)
            fail("unknown descriptor flags");
        d.implicit = flags & 1;
        if (flags & 2)
            d.reverts = id<ActionId>();
        d.started_at = zigzag();
        d.ended_at = zigzag();
        d.opened = stamp();
        d.closed = stamp();
        auto n = count();
        for (std::size_t i = 0; i < n; ++i)
            d.children.push_back(descriptor(depth + 1));
        return d;
    }

    Frontier frontier()
    {
        Frontier f;
        auto n = count();
        for (std::size_t i = 0; i < n; ++i) {
            SignalId s {str()};
            if (!f.empty() && !(f.rbegin()->first < s))
                fail("frontier keys not strictly ascending");
            f.emplace_hint(f.end(), std::move(s), stamp());
        }
        return f;
    }

private:
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

} // namespace

std::vector<std::uint8_t> encode(const Transaction& txn)
{
    Writer w;
    w.u8(kTransactionFormatVersion);
    w.varint(txn.id.replica);
    w.varint(txn.id.seq);
    w.varint(txn.lamport);
    w.varint(txn.deps.size());
    for (const auto& [r, n] : txn.deps) {
        w.varint(r);
        w.varint(n);
    }
    w.descriptor(txn.action);
    w.varint(txn.ops.size());
    for (const auto& o : txn.ops) {
        std::visit(
            [&](const auto& body) {
                using T = std::decay_t<decltype(body)>;
                if constexpr (std::is_same_v<T, op::DeclareSource>)
                    w.u8(static_cast<std::uint8_t>(OpTag::DeclareSource));
                else if constexpr (std::is_same_v<T, op::DeclareDerived>)
                    w.u8(static_cast<std::uint8_t>(OpTag::DeclareDerived));
                else if constexpr (std::is_same_v<T, op::SetValue>)
                    w.u8(static_cast<std::uint8_t>(OpTag::SetValue));
                else if constexpr (std::is_same_v<T, op::DeclareCheckpoint>)
                    w.u8(static_cast<std::uint8_t>(OpTag::DeclareCheckpoint));
                else if constexpr (std::is_same_v<T, op::CreatePath>)
                    w.u8(static_cast<std::uint8_t>(OpTag::CreatePath));
                else
                    w.u8(static_cast<std::uint8_t>(OpTag::AppendStep));
                w.stamp(o.stamp);
                w.id(o.action);
                w.zigzag(o.wall_time);
                if constexpr (std::is_same_v<T, op::DeclareSource>) {
                    w.str(body.signal.name);
                    w.value(body.initial);
                } else if constexpr (std::is_same_v<T, op::DeclareDerived>) {
                    w.str(body.signal.name);
                    w.varint(body.deps.size());
                    for (const auto& d : body.deps)
                        w.str(d.name);
                    w.str(body.function);
                } else if constexpr (std::is_same_v<T, op::SetValue>) {
                    w.str(body.signal.name);
                    w.value(body.value);
                } else if constexpr (std::is_same_v<T, op::DeclareCheckpoint>) {
                    w.id(body.id);
                    w.str(body.label);
                    w.frontier(body.frontier);
                } else if constexpr (std::is_same_v<T, op::CreatePath>) {
                    w.id(body.id);
                    w.str(body.label);
                } else {
                    w.id(body.path);
                    w.id(body.checkpoint);
                }
            },
            o.body);
    }
    return w.take();
}

Transaction decode(std::span<const std::uint8_t> bytes)
{
    Reader r(bytes);
    auto version = r.u8();
    if (version != kTransactionFormatVersion)
        r.fail("unsupported transaction format version " + std::to_string(version));
    Transaction t;
    t.id.replica = r.u32();
    t.id.seq = r.varint();
    t.lamport = r.varint();
    auto ndeps = r.count();
    for (std::size_t i = 0; i < ndeps; ++i) {
        auto rep = r.u32();
        auto seq = r.varint();
        if (!t.deps.empty() && t.deps.rbegin()->first >= rep)
            r.fail("dependency replicas not strictly ascending");
        t.deps.emplace_hint(t.deps.end(), rep, seq);
    }
    t.action = r.descriptor();
    auto nops = r.count();
    t.ops.reserve(nops);
    for (std::size_t i = 0; i < nops; ++i) {
        Op o;
        auto tag = static_cast<OpTag>(r.u8());
        o.stamp = r.stamp();
        o.action = r.id<ActionId>();
        o.wall_time = r.zigzag();
        switch (tag) {
        case OpTag::DeclareSource: {
            op::DeclareSource b;
            b.signal.name = r.str();
            b.initial = r.value();
            o.body = std::move(b);
            break;
        }
        case OpTag::DeclareDerived: {
            op::DeclareDerived b;
            b.signal.name = r.str();
            auto n = r.count();
            for (std::size_t k = 0; k < n; ++k)
                b.deps.push_back(SignalId {r.str()});
            b.function = r.str();
            o.body = std::move(b);
            break;
        }
        case OpTag::SetValue: {
            op::SetValue b;
            b.signal.name = r.str();
            b.value = r.value();
            o.body = std::move(b);
            break;
        }
        case OpTag::DeclareCheckpoint: {
            op::DeclareCheckpoint b;
            b.id = r.id<CheckpointId>();
            b.label = r.str();
            b.frontier = r.frontier();
            o.body = std::move(b);
            break;
        }
        case OpTag::CreatePath: {
            op::CreatePath b;
            b.id = r.id<PathId>();
            b.label = r.str();
            o.body = std::move(b);
            break;
        }
        case OpTag::AppendStep: {
            op::AppendStep b;
            b.path = r.id<PathId>();
            b.checkpoint = r.id<CheckpointId>();
            o.body = std::move(b);
            break;
        }
        default: r.fail("unknown op tag");
        }
        t.ops.push_back(std::move(o));
    }
    if (!r.done())
        r.fail("trailing bytes");
    return t;
}

std::string to_hex(std::span<const std::uint8_t> bytes)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out += digits[b >> 4];
        out += digits[b & 0xf];
    }
    return out;
}

std::vector<std::uint8_t> from_hex(std::string_view hex)
{
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9')
            return c - '0';
        if (c >= 'a' && c <= 'f')
            return c - 'a' + 10;
        return -1;
    };
    if (hex.size() % 2 != 0)
        throw Error(ErrorCode::MalformedTransaction, "odd-length hex");
    std::vector<std::uint8_t> out;
    out.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2) {
        int hi = nibble(hex[i]), lo = nibble(hex[i + 1]);
        if (hi < 0 || lo < 0)
            throw Error(ErrorCode::MalformedTransaction, "invalid hex digit");
        out.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
    }
    return out;
}

} // namespace sigtrace
