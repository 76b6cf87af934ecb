#include "helpers.hpp"

using namespace sigtrace;
using testing::local;
using testing::values_of;

namespace {

ActionFilter top_level()
{
    ActionFilter f;
    f.top_level_only = true;
    return f;
}

std::vector<ActionBlock> explicit_top_level(const Replica& r)
{
    std::vector<ActionBlock> out;
    for (auto& b : r.actions(top_level()))
        if (!b.implicit)
            out.push_back(b);
    return out;
}

} // namespace

TEST_CASE("a drag groups its sets")
{
    auto r = local();
    auto pos = r.create_source(0, "pos");
    auto a = r.begin_action("drag", "transform");
    r.set(pos, 1);
    r.set(pos, 2);
    r.set(pos, 3);
    auto block = r.end_action(a);
    CHECK(block.id == a);
    CHECK(block.entries.size() == 3);
    CHECK(block.label == "drag");
    CHECK(block.kind == "transform");
    CHECK_FALSE(block.implicit);
    CHECK_FALSE(block.open);
    CHECK(block.origin_replica == 1);
    CHECK(block.opened < block.closed);
    for (const auto& s : block.entries) {
        CHECK(block.opened < s);
        CHECK(s < block.closed);
        CHECK(r.history().find(s)->action == a);
    }
    CHECK(block.started_at <= block.ended_at);
}

TEST_CASE("nested actions tag the innermost block")
{
    auto r = local();
    auto pos = r.create_source(0, "pos");
    auto ink = r.create_source(Value::list({}), "ink");
    auto drag = r.begin_action("drag", "transform");
    r.set(pos, 1);
    auto stroke = r.begin_action("stroke", "draw");
    r.set(ink, Value::list({1}));
    auto inner = r.end_action(stroke);
    auto outer = r.end_action(drag);
    CHECK(inner.parent == drag);
    CHECK(inner.entries.size() == 1);
    CHECK(outer.entries.size() == 1);
    CHECK(outer.children == std::vector<ActionId> {stroke});
    CHECK(r.history_of(ink).back().action == stroke);
    CHECK(outer.opened < inner.opened);
    CHECK(inner.closed < outer.closed);
    CHECK(r.actions(top_level()).size() == 3); // two declarations and the drag
    CHECK(r.check_invariants().empty());
}

TEST_CASE("a lone set gets an implicit singleton block")
{
    auto r = local();
    auto x = r.create_source(0, "x");
    auto s = r.set(x, 4);
    const auto& b = r.action_log().at(r.history().find(s)->action);
    CHECK(b.implicit);
    CHECK(b.label == "set:x");
    CHECK(b.entries == std::vector<VersionStamp> {s});
    CHECK(b.top_level());
}

TEST_CASE("end_action errors")
{
    auto r = local();
    auto a = r.begin_action("A", "k");
    auto b = r.begin_action("B", "k");
    CHECK_CODE(r.end_action(a), NotInnermost);
    r.end_action(b);
    r.end_action(a);
    CHECK_CODE(r.end_action(a), UnknownAction);
    CHECK_CODE(r.end_action(ActionId {1, 77}), UnknownAction);
}

TEST_CASE("empty actions are recorded")
{
    auto r = local();
    auto a = r.begin_action("nothing", "idle");
    auto b = r.end_action(a);
    CHECK(b.entries.empty());
    REQUIRE(r.actions().size() == 1);
    CHECK(r.actions().front().id == a);
    CHECK_FALSE(r.undo().has_value());
}

TEST_CASE("actions lists meaningful steps")
{
    auto r = local();
    CHECK(r.actions().empty());
    auto pos = r.create_source(0, "pos");
    auto color = r.create_source("black", "color");
    auto drag = r.begin_action("drag", "transform");
    for (int i = 1; i <= 3; ++i)
        r.set(pos, i);
    r.end_action(drag);
    auto recolor = r.begin_action("recolor", "style");
    r.set(color, "red");
    r.end_action(recolor);

    auto steps = explicit_top_level(r);
    REQUIRE(steps.size() == 2);
    CHECK(steps[0].label == "drag");
    CHECK(steps[1].label == "recolor");

    ActionFilter f;
    f.kind = "transform";
    auto only = r.actions(f);
    REQUIRE(only.size() == 1);
    CHECK(only[0].id == drag);

    ActionFilter byl;
    byl.label = "recolor";
    CHECK(r.actions(byl).size() == 1);

    ActionFilter late;
    late.from = r.action_log().at(recolor).started_at;
    for (const auto& b : r.actions(late))
        CHECK(b.started_at >= *late.from);
    CHECK(r.actions(late).size() == 1);
}

TEST_CASE("undo restores the values before the action")
{
    auto r = local();
    auto x = r.create_source(1, "x");
    auto drag = r.begin_action("drag", "transform");
    r.set(x, 5);
    r.set(x, 9);
    r.end_action(drag);
    auto undone = r.undo();
    CHECK(undone == drag);
    CHECK(r.get(x) == Value(1));
    CHECK(values_of(r, x) == std::vector<Value> {1, 5, 9, 1});
    auto undo_blocks = r.actions(ActionFilter {.kind = "undo"});
    REQUIRE(undo_blocks.size() == 1);
    CHECK(undo_blocks[0].label == "undo:drag");
    CHECK(undo_blocks[0].reverts == drag);
    CHECK(undo_blocks[0].is_undo());

    auto redone = r.redo();
    CHECK(redone == drag);
    CHECK(r.get(x) == Value(9));
    CHECK(values_of(r, x) == std::vector<Value> {1, 5, 9, 1, 9});
    auto redo_blocks = r.actions(ActionFilter {.kind = "redo"});
    REQUIRE(redo_blocks.size() == 1);
    CHECK(redo_blocks[0].label == "redo:drag");
}

TEST_CASE("undo with nothing to undo")
{
    auto r = local();
    CHECK_FALSE(r.undo().has_value());
    CHECK_FALSE(r.redo().has_value());
    CHECK(r.events().empty());
}

TEST_CASE("a fresh action invalidates redo")
{
    auto r = local();
    auto x = r.create_source(0, "x");
    auto y = r.create_source(0, "y");
    r.set(x, 1);
    r.undo();
    CHECK(r.can_redo());
    r.set(y, 3);
    CHECK_FALSE(r.can_redo());
    CHECK_FALSE(r.redo().has_value());
    CHECK(r.get(x) == Value(0));
}

TEST_CASE("undo twice then redo twice returns to the tip")
{
    auto r = local();
    auto x = r.create_source(0, "x");
    auto y = r.create_source(0, "y");
    auto a = r.begin_action("a", "k");
    r.set(x, 1);
    r.set(y, 1);
    r.end_action(a);
    auto b = r.begin_action("b", "k");
    r.set(x, 2);
    r.end_action(b);
    CHECK(r.undo() == b);
    CHECK(r.get(x) == Value(1));
    CHECK(r.undo() == a);
    CHECK(r.get(x) == Value(0));
    CHECK(r.get(y) == Value(0));
    CHECK(r.redo() == a);
    CHECK(r.redo() == b);
    CHECK(r.get(x) == Value(2));
    CHECK(r.get(y) == Value(1));
    CHECK_FALSE(r.redo().has_value());
}

TEST_CASE("undo of the redo goes back again")
{
    auto r = local();
    auto x = r.create_source(0, "x");
    r.set(x, 7);
    r.undo();
    r.redo();
    CHECK(r.get(x) == Value(7));
    r.undo();
    CHECK(r.get(x) == Value(0));
    auto blocks = r.actions(ActionFilter {.kind = "undo"});
    REQUIRE(blocks.size() == 2);
    CHECK(blocks[1].label == "undo:set:x");
}

TEST_CASE("undo leaves untouched signals alone and derived follow")
{
    auto r = local();
    auto x = r.create_source(1, "x");
    auto y = r.create_source(2, "y");
    auto s = r.create_derived({x, y}, "sum", "s");
    r.set(y, 20);
    auto a = r.begin_action("move", "transform");
    r.set(x, 10);
    r.end_action(a);
    r.undo();
    CHECK(r.get(x) == Value(1));
    CHECK(r.get(y) == Value(20));
    CHECK(r.get(s) == Value(21));
}

TEST_CASE("nested children are undone with their top-level action")
{
    auto r = local();
    auto x = r.create_source(0, "x");
    auto y = r.create_source(0, "y");
    auto outer = r.begin_action("draw", "generate");
    r.set(x, 1);
    auto inner = r.begin_action("stroke", "draw");
    r.set(y, 1);
    r.end_action(inner);
    r.end_action(outer);
    CHECK(r.undo() == outer);
    CHECK(r.get(x) == Value(0));
    CHECK(r.get(y) == Value(0));
}

TEST_CASE("undo is refused while an action or batch is open")
{
    auto r = local();
    auto x = r.create_source(0, "x");
    r.set(x, 1);
    auto a = r.begin_action("a", "k");
    CHECK_CODE(r.undo(), OpenScope);
    r.end_action(a);
    r.batch([&] { CHECK_CODE(r.undo(), OpenScope); });
}

TEST_CASE("undo stacks belong to a branch")
{
    auto r = local();
    auto x = r.create_source(0, "x");
    auto v = r.checkpoint("v");
    r.set(x, 1);
    auto b = r.branch_from(v, "B");
    CHECK_FALSE(r.can_undo());
    r.set(x, 5);
    CHECK(r.can_undo());
    r.checkout(BranchId::main());
    CHECK(r.undo().has_value());
    CHECK(r.get(x) == Value(0));
    r.checkout(b);
    CHECK(r.get(x) == Value(5));
    r.undo();
    CHECK(r.get(x) == Value(0));
}
