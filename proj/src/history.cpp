#include "sigtrace/history.hpp"

#include "sigtrace/error.hpp"

#include <algorithm>
#include <set>

namespace sigtrace {

std::string_view to_string(Origin origin) noexcept { return origin == Origin::Source ? "source" : "derived"; }

std::vector<CheckpointId> ExplorationPath::step_list() const
{
    std::vector<CheckpointId> out;
    out.reserve(steps.size());
    for (const auto& [_, cp] : steps)
        out.push_back(cp);
    return out;
}

History::History()
{
    Branch main;
    main.id = BranchId::main();
    main.label = "main";
    branches_.push_back(std::move(main));
}

bool History::insert(HistoryEntry entry)
{
    const auto stamp = entry.stamp;
    auto& stamps = index_[entry.signal];
    auto [it, inserted] = log_.try_emplace(stamp, std::move(entry));
    if (!inserted)
        return false;
    if (stamps.empty() || stamps.back() < stamp)
        stamps.push_back(stamp);
    else
        stamps.insert(std::lower_bound(stamps.begin(), stamps.end(), stamp), stamp);
    return true;
}

const HistoryEntry* History::find(VersionStamp stamp) const
{
    auto it = log_.find(stamp);
    return it == log_.end() ? nullptr : &it->second;
}

const std::vector<VersionStamp>* History::index_of(const SignalId& signal) const
{
    auto it = index_.find(signal);
    return it == index_.end() ? nullptr : &it->second;
}

bool History::visible(const HistoryEntry& entry, BranchId branch) const
{
    // Walk up the ancestry; each fork narrows how much of the parent is shared.
    std::optional<VersionStamp> cut;
    BranchId b = branch;
    for (;;) {
        if (entry.branch == b)
            return !cut || entry.stamp <= *cut;
        const auto& br = branches_[b.value];
        if (!br.parent)
            return false;
        cut = cut ? std::min(*cut, br.fork_stamp) : br.fork_stamp;
        b = *br.parent;
    }
}

std::vector<const HistoryEntry*> History::entries_of(const SignalId& signal, BranchId branch) const
{
    std::vector<const HistoryEntry*> out;
    const auto* stamps = index_of(signal);
    if (!stamps)
        return out;
    out.reserve(stamps->size());
    for (const auto& s : *stamps) {
        const auto& e = log_.at(s);
        if (visible(e, branch))
            out.push_back(&e);
    }
    return out;
}

const HistoryEntry* History::latest(const SignalId& signal, BranchId branch) const
{
    const auto* stamps = index_of(signal);
    if (!stamps)
        return nullptr;
    for (auto it = stamps->rbegin(); it != stamps->rend(); ++it) {
        const auto& e = log_.at(*it);
        if (visible(e, branch))
            return &e;
    }
    return nullptr;
}

const HistoryEntry* History::latest_at(const SignalId& signal, BranchId branch, VersionStamp at) const
{
    const auto* stamps = index_of(signal);
    if (!stamps)
        return nullptr;
    auto it = std::upper_bound(stamps->begin(), stamps->end(), at);
    while (it != stamps->begin()) {
        --it;
        const auto& e = log_.at(*it);
        if (visible(e, branch))
            return &e;
    }
    return nullptr;
}

const HistoryEntry* History::latest_before(const SignalId& signal, BranchId branch, VersionStamp before) const
{
    const auto* stamps = index_of(signal);
    if (!stamps)
        return nullptr;
    auto it = std::lower_bound(stamps->begin(), stamps->end(), before);
    while (it != stamps->begin()) {
        --it;
        const auto& e = log_.at(*it);
        if (visible(e, branch))
            return &e;
    }
    return nullptr;
}

const HistoryEntry* History::latest_at_time(const SignalId& signal, BranchId branch, WallTime at) const
{
    const HistoryEntry* best = nullptr;
    for (const auto* e : entries_of(signal, branch)) {
        if (e->wall_time > at)
            continue;
        if (!best || e->wall_time > best->wall_time || (e->wall_time == best->wall_time && e->stamp > best->stamp))
            best = e;
    }
    return best;
}

const Branch& History::branch(BranchId id) const
{
    if (!has_branch(id))
        throw Error(ErrorCode::UnknownBranch, "no branch " + id.str());
    return branches_[id.value];
}

BranchId History::add_branch(std::string label, BranchId parent, CheckpointId fork_point, VersionStamp fork_stamp, WallTime at)
{
    Branch b;
    b.id = BranchId {static_cast<std::uint32_t>(branches_.size())};
    b.label = std::move(label);
    b.parent = parent;
    b.fork_point = fork_point;
    b.fork_stamp = fork_stamp;
    b.created_at = at;
    branches_.push_back(std::move(b));
    return branches_.back().id;
}

void History::add_checkpoint(Checkpoint cp)
{
    auto id = cp.id;
    checkpoints_.insert_or_assign(id, std::move(cp));
}

const Checkpoint& History::checkpoint(CheckpointId id) const
{
    auto it = checkpoints_.find(id);
    if (it == checkpoints_.end())
        throw Error(ErrorCode::UnknownCheckpoint, "no checkpoint " + id.str());
    return it->second;
}

std::vector<SignalDiff> History::diff(CheckpointId a, CheckpointId b) const
{
    const auto& ca = checkpoint(a);
    const auto& cb = checkpoint(b);
    std::set<SignalId> names;
    for (const auto& [s, _] : ca.frontier)
        names.insert(s);
    for (const auto& [s, _] : cb.frontier)
        names.insert(s);

    auto value_in = [&](const Checkpoint& cp, const SignalId& s) -> std::optional<Value> {
        auto it = cp.frontier.find(s);
        if (it == cp.frontier.end())
            return std::nullopt;
        const auto* e = find(it->second);
        if (!e)
            return std::nullopt;
        return e->value;
    };

    std::vector<SignalDiff> out;
    for (const auto& s : names) {
        auto va = value_in(ca, s);
        auto vb = value_in(cb, s);
        if (va != vb)
            out.push_back(SignalDiff {s, std::move(va), std::move(vb)});
    }
    return out;
}

void History::add_path(ExplorationPath path)
{
    auto id = path.id;
    paths_.insert_or_assign(id, std::move(path));
}

ExplorationPath& History::path(PathId id)
{
    auto it = paths_.find(id);
    if (it == paths_.end())
        throw Error(ErrorCode::UnknownPath, "no path " + id.str());
    return it->second;
}

const ExplorationPath& History::path(PathId id) const
{
    auto it = paths_.find(id);
    if (it == paths_.end())
        throw Error(ErrorCode::UnknownPath, "no path " + id.str());
    return it->second;
}

} // namespace sigtrace
