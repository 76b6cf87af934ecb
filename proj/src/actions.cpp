#include "sigtrace/actions.hpp"

#include "sigtrace/error.hpp"

namespace sigtrace {

ActionBlock& ActionLog::open(ActionBlock block)
{
    block.open = true;
    if (!open_.empty()) {
        block.parent = open_.back();
        blocks_.at(open_.back()).children.push_back(block.id);
    }
    auto id = block.id;
    auto [it, inserted] = blocks_.emplace(id, std::move(block));
    if (!inserted)
        throw Error(ErrorCode::UnknownAction, "action " + id.str() + " already exists");
    open_.push_back(id);
    return it->second;
}

ActionBlock& ActionLog::close_innermost(WallTime at, VersionStamp closed)
{
    auto& b = blocks_.at(open_.back());
    open_.pop_back();
    b.open = false;
    b.ended_at = at;
    b.closed = closed;
    committed_.push_back(b.id);
    return b;
}

ActionBlock& ActionLog::add_closed(ActionBlock block)
{
    block.open = false;
    auto id = block.id;
    auto [it, inserted] = blocks_.emplace(id, std::move(block));
    if (!inserted)
        throw Error(ErrorCode::MalformedTransaction, "action " + id.str() + " already exists");
    committed_.push_back(id);
    return it->second;
}

const ActionBlock* ActionLog::find(ActionId id) const
{
    auto it = blocks_.find(id);
    return it == blocks_.end() ? nullptr : &it->second;
}

ActionBlock* ActionLog::find(ActionId id)
{
    auto it = blocks_.find(id);
    return it == blocks_.end() ? nullptr : &it->second;
}

const ActionBlock& ActionLog::at(ActionId id) const
{
    if (const auto* b = find(id))
        return *b;
    throw Error(ErrorCode::UnknownAction, "no action " + id.str());
}

const ActionBlock* ActionLog::innermost() const { return open_.empty() ? nullptr : &blocks_.at(open_.back()); }

ActionBlock* ActionLog::innermost() { return open_.empty() ? nullptr : &blocks_.at(open_.back()); }

std::vector<ActionBlock> ActionLog::query(const ActionFilter& filter) const
{
    std::vector<ActionBlock> out;
    for (const auto& id : committed_) {
        const auto& b = blocks_.at(id);
        if (filter.top_level_only && !b.top_level())
            continue;
        if (filter.kind && b.kind != *filter.kind)
            continue;
        if (filter.label && b.label != *filter.label)
            continue;
        if (filter.from && b.started_at < *filter.from)
            continue;
        if (filter.to && b.ended_at > *filter.to)
            continue;
        out.push_back(b);
    }
    return out;
}

const ActionBlock& ActionLog::top_level_of(ActionId id) const
{
    const auto* b = &at(id);
    while (b->parent)
        b = &at(*b->parent);
    return *b;
}

std::vector<const ActionBlock*> ActionLog::tree(ActionId id) const
{
    std::vector<const ActionBlock*> out;
    std::vector<ActionId> stack {id};
    while (!stack.empty()) {
        auto cur = stack.back();
        stack.pop_back();
        const auto& b = at(cur);
        out.push_back(&b);
        for (auto it = b.children.rbegin(); it != b.children.rend(); ++it)
            stack.push_back(*it);
    }
    return out;
}

} // namespace sigtrace
