#pragma once

#include "sigtrace/value.hpp"

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace sigtrace {

/// Pure function from dependency values (in declared order) to a value.
using ComputeFn = std::function<Value(std::span<const Value>)>;

/// Named compute functions. Derived signals reference their function by
/// name so replay and remote replicas can rebuild the same wiring.
class FunctionRegistry {
public:
    /// Registry preloaded with the built-in functions: sum, concat,
    /// count, max, first.
    static FunctionRegistry with_builtins();

    void add(std::string name, ComputeFn fn);
    bool contains(const std::string& name) const;

    /// Throws Error(MissingComputeFunction) when absent.
    const ComputeFn& get(const std::string& name) const;

    std::vector<std::string> names() const;

private:
    std::map<std::string, ComputeFn, std::less<>> fns_;
};

namespace builtin {

// Integer sum; becomes a float sum as soon as any dependency is a float.
// Non-numeric values are skipped. Built-ins are total so remote
// propagation never fails halfway through a transaction.
Value sum(std::span<const Value> deps);

// Concatenation of string dependencies; other kinds use their display form.
Value concat(std::span<const Value> deps);

// Lists and maps contribute their size, null contributes nothing,
// every other value counts once.
Value count(std::span<const Value> deps);

// Largest numeric dependency, or null when there is none.
Value max(std::span<const Value> deps);
Value first(std::span<const Value> deps);

} // namespace builtin

} // namespace sigtrace
