#pragma once

#include "sigtrace/ids.hpp"
#include "sigtrace/value.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

namespace sigtrace {

enum class SignalKind : std::uint8_t { Source, Derived };

std::string_view to_string(SignalKind kind) noexcept;

struct SignalNode {
    SignalId id;
    SignalKind kind = SignalKind::Source;
    std::vector<SignalId> deps;
    std::string function; // derived only
    std::size_t order = 0; // registration index
    std::vector<std::size_t> dep_orders;

    // Working state on the replica's current branch.
    Value current;
    VersionStamp current_stamp;
    bool visible = false;

    std::uint64_t recomputations = 0;
};

/// Registry of source and derived signals plus glitch-free propagation.
///
/// A derived node may only depend on nodes registered before it, so
/// registration order is a topological order of the dependency graph.
/// Propagation walks that order once and recomputes every visible
/// derived node that has at least one changed dependency; ties between
/// independent nodes therefore break by registration order.
class SignalGraph {
public:
    bool contains(const SignalId& id) const { return index_.contains(id); }

    SignalNode* find(const SignalId& id);
    const SignalNode* find(const SignalId& id) const;

    // Throws Error(UnknownSignal).
    SignalNode& at(const SignalId& id);
    const SignalNode& at(const SignalId& id) const;

    SignalNode& add_source(SignalId id);

    /// Validates the wiring: a name that appears among its own deps is a
    /// cycle, an existing name is a duplicate, and every dep must exist.
    SignalNode& add_derived(SignalId id, std::vector<SignalId> deps, std::string function);

    const std::vector<SignalNode>& nodes() const { return nodes_; }
    std::vector<SignalNode>& nodes() { return nodes_; }

    void mark_changed(const SignalNode& node);
    bool has_pending() const { return pending_min_ != npos; }

    /// Runs one propagation pass over pending changes. `recompute` is
    /// called for each affected derived node and must update its current
    /// value. Clears the pending set.
    void propagate(const std::function<void(SignalNode&)>& recompute);

    /// True when the dependency relation is a DAG. Holds by construction;
    /// exposed for trace verification.
    bool is_acyclic() const;

private:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    std::vector<SignalNode> nodes_;
    std::unordered_map<SignalId, std::size_t> index_;
    std::vector<char> changed_;
    std::size_t pending_min_ = npos;
};

} // namespace sigtrace
