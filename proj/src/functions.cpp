#include "sigtrace/functions.hpp"

#include "sigtrace/error.hpp"

namespace sigtrace {

FunctionRegistry FunctionRegistry::with_builtins()
{
    FunctionRegistry r;
    r.add("sum", builtin::sum);
    r.add("concat", builtin::concat);
    r.add("count", builtin::count);
    r.add("max", builtin::max);
    r.add("first", builtin::first);
    return r;
}

void FunctionRegistry::add(std::string name, ComputeFn fn) { fns_[std::move(name)] = std::move(fn); }

bool FunctionRegistry::contains(const std::string& name) const { return fns_.contains(name); }

const ComputeFn& FunctionRegistry::get(const std::string& name) const
{
    auto it = fns_.find(name);
    if (it == fns_.end())
        throw Error(ErrorCode::MissingComputeFunction, "no compute function named '" + name + "'");
    return it->second;
}

std::vector<std::string> FunctionRegistry::names() const
{
    std::vector<std::string> out;
    for (const auto& [name, _] : fns_)
        out.push_back(name);
    return out;
}

namespace builtin {

Value sum(std::span<const Value> deps)
{
    bool floating = false;
    std::int64_t isum = 0;
    double fsum = 0.0;
    for (const auto& v : deps) {
        if (v.is_float()) {
            if (!floating) {
                floating = true;
                fsum = static_cast<double>(isum);
            }
            fsum += v.as_float();
        } else if (v.is_int()) {
            // unsigned add wraps instead of overflowing
            isum = static_cast<std::int64_t>(static_cast<std::uint64_t>(isum) + static_cast<std::uint64_t>(v.as_int()));
            fsum += static_cast<double>(v.as_int());
        }
    }
    if (floating)
        return Value(fsum);
    return Value(isum);
}

Value concat(std::span<const Value> deps)
{
    std::string out;
    for (const auto& v : deps)
        out += v.is_string() ? v.as_string() : v.to_display();
    return Value(std::move(out));
}

Value count(std::span<const Value> deps)
{
    std::int64_t n = 0;
    for (const auto& v : deps) {
        if (v.is_list())
            n += static_cast<std::int64_t>(v.as_list().size());
        else if (v.is_map())
            n += static_cast<std::int64_t>(v.as_map().size());
        else if (!v.is_null())
            ++n;
    }
    return Value(n);
}

Value max(std::span<const Value> deps)
{
    const Value* best = nullptr;
    for (const auto& v : deps) {
        if (!v.is_number())
            continue;
        if (!best || v.as_number() > best->as_number())
            best = &v;
    }
    return best ? *best : Value();
}

Value first(std::span<const Value> deps) { return deps.empty() ? Value() : deps.front(); }

} // namespace builtin

} // namespace sigtrace
