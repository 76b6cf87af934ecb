#pragma once

#include "sigtrace/ids.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sigtrace {

/// A labeled group of history entries recorded between an interaction's
/// start and end. Blocks nest; every entry belongs to exactly one block.
struct ActionBlock {
    ActionId id;
    std::string label;
    std::string kind;
    std::optional<ActionId> parent;
    std::vector<ActionId> children;
    WallTime started_at = 0;
    WallTime ended_at = 0;
    // Lamport ticks taken when the block opened and closed on its origin
    // replica; every source entry of the block lies strictly between them.
    VersionStamp opened;
    VersionStamp closed;
    std::vector<VersionStamp> entries;
    ReplicaId origin_replica = 0;
    bool implicit = false;
    // Set on undo/redo blocks: the block whose effect they reverse or restore.
    std::optional<ActionId> reverts;
    BranchId branch;
    bool open = true;

    bool top_level() const { return !parent.has_value(); }
    bool is_undo() const { return reverts.has_value() && kind == "undo"; }
    bool is_redo() const { return reverts.has_value() && kind == "redo"; }
};

struct ActionFilter {
    std::optional<std::string> kind;
    std::optional<std::string> label;
    std::optional<WallTime> from; // started_at >= from
    std::optional<WallTime> to; // ended_at <= to
    bool top_level_only = false;
};

/// One entry on a linear undo or redo stack. `target` is the block whose
/// entries define the before/after values; `label` is the original
/// action's label, carried through undo/redo chains.
struct UndoItem {
    ActionId target;
    std::string label;
};

struct UndoStacks {
    std::vector<UndoItem> undo;
    std::vector<UndoItem> redo;
};

/// Block storage, the open-block stack, and per-branch undo stacks.
class ActionLog {
public:
    ActionBlock& open(ActionBlock block);
    /// Closes the innermost block. Caller validates nesting.
    ActionBlock& close_innermost(WallTime at, VersionStamp closed);

    /// Registers an already-closed block (from a remote transaction).
    ActionBlock& add_closed(ActionBlock block);

    const ActionBlock* find(ActionId id) const;
    ActionBlock* find(ActionId id);
    const ActionBlock& at(ActionId id) const; // throws UnknownAction

    const ActionBlock* innermost() const;
    ActionBlock* innermost();
    const std::vector<ActionId>& open_stack() const { return open_; }
    bool any_open() const { return !open_.empty(); }

    /// Closed blocks in commit order on this replica.
    const std::vector<ActionId>& commit_order() const { return committed_; }
    std::vector<ActionBlock> query(const ActionFilter& filter) const;

    /// Root of the block's parent chain.
    const ActionBlock& top_level_of(ActionId id) const;

    /// Block and all its descendants, pre-order.
    std::vector<const ActionBlock*> tree(ActionId id) const;

    UndoStacks& stacks(BranchId branch) { return stacks_[branch]; }
    const std::map<BranchId, UndoStacks>& all_stacks() const { return stacks_; }

    const std::map<ActionId, ActionBlock>& blocks() const { return blocks_; }

private:
    std::map<ActionId, ActionBlock> blocks_;
    std::vector<ActionId> open_;
    std::vector<ActionId> committed_;
    std::map<BranchId, UndoStacks> stacks_;
};

} // namespace sigtrace
