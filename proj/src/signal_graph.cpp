#include "sigtrace/signal_graph.hpp"

#include "sigtrace/error.hpp"

#include <algorithm>

namespace sigtrace {

std::string_view to_string(SignalKind kind) noexcept { return kind == SignalKind::Source ? "source" : "derived"; }

SignalNode* SignalGraph::find(const SignalId& id)
{
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &nodes_[it->second];
}

const SignalNode* SignalGraph::find(const SignalId& id) const
{
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &nodes_[it->second];
}

SignalNode& SignalGraph::at(const SignalId& id)
{
    if (auto* n = find(id))
        return *n;
    throw Error(ErrorCode::UnknownSignal, "no signal named '" + id.name + "'");
}

const SignalNode& SignalGraph::at(const SignalId& id) const
{
    if (const auto* n = find(id))
        return *n;
    throw Error(ErrorCode::UnknownSignal, "no signal named '" + id.name + "'");
}

SignalNode& SignalGraph::add_source(SignalId id)
{
    if (contains(id))
        throw Error(ErrorCode::DuplicateName, "signal '" + id.name + "' already registered");
    SignalNode node;
    node.order = nodes_.size();
    node.id = std::move(id);
    index_.emplace(node.id, node.order);
    nodes_.push_back(std::move(node));
    changed_.push_back(0);
    return nodes_.back();
}

SignalNode& SignalGraph::add_derived(SignalId id, std::vector<SignalId> deps, std::string function)
{
    if (std::find(deps.begin(), deps.end(), id) != deps.end())
        throw Error(ErrorCode::CycleDetected, "signal '" + id.name + "' depends on itself");
    if (contains(id))
        throw Error(ErrorCode::DuplicateName, "signal '" + id.name + "' already registered");
    std::vector<std::size_t> orders;
    orders.reserve(deps.size());
    for (const auto& d : deps)
        orders.push_back(at(d).order);

    SignalNode node;
    node.order = nodes_.size();
    node.id = std::move(id);
    node.kind = SignalKind::Derived;
    node.deps = std::move(deps);
    node.dep_orders = std::move(orders);
    node.function = std::move(function);
    index_.emplace(node.id, node.order);
    nodes_.push_back(std::move(node));
    changed_.push_back(0);
    return nodes_.back();
}

void SignalGraph::mark_changed(const SignalNode& node)
{
    changed_[node.order] = 1;
    pending_min_ = std::min(pending_min_, node.order);
}

void SignalGraph::propagate(const std::function<void(SignalNode&)>& recompute)
{
    if (!has_pending())
        return;
    const std::size_t start = pending_min_;
    for (std::size_t i = start + 1; i < nodes_.size(); ++i) {
        auto& node = nodes_[i];
        if (node.kind != SignalKind::Derived || !node.visible)
            continue;
        bool dirty = std::any_of(node.dep_orders.begin(), node.dep_orders.end(),
            [&](std::size_t d) { return changed_[d] != 0; });
        if (!dirty)
            continue;
        recompute(node);
        ++node.recomputations;
        changed_[i] = 1;
    }
    std::fill(changed_.begin() + static_cast<std::ptrdiff_t>(start), changed_.end(), 0);
    pending_min_ = npos;
}

bool SignalGraph::is_acyclic() const
{
    // 0 = unvisited, 1 = on stack, 2 = done
    std::vector<int> state(nodes_.size(), 0);
    std::function<bool(std::size_t)> visit = [&](std::size_t i) {
        if (state[i] == 1)
            return false;
        if (state[i] == 2)
            return true;
        state[i] = 1;
        for (auto d : nodes_[i].dep_orders)
            if (!visit(d))
                return false;
        state[i] = 2;
        return true;
    };
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (!visit(i))
            return false;
    return true;
}

} // namespace sigtrace
