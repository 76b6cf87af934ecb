#include "sigtrace/workloads.hpp"

#include <algorithm>
#include <array>
#include <memory>
#include <random>

namespace sigtrace::workloads {

namespace {

constexpr std::array kColors {"black", "red", "teal", "ochre", "blue", "violet"};

struct SeededClock {
    std::shared_ptr<std::mt19937_64> rng;
    std::shared_ptr<WallTime> t;

    explicit SeededClock(std::uint64_t seed)
        : rng(std::make_shared<std::mt19937_64>(seed ^ 0x5157u))
        , t(std::make_shared<WallTime>(1'700'000'000'000 + static_cast<WallTime>(seed % 100'000) * 1000))
    {
    }

    WallClock wall() const
    {
        return [rng = rng, t = t] {
            *t += 1 + static_cast<WallTime>((*rng)() % 40);
            return *t;
        };
    }
};

double tenths(std::uint64_t r)
{
    return static_cast<double>(r % 100) / 10.0 + 0.5;
}

} // namespace

Replica demo_session(std::uint64_t seed, std::size_t actions)
{
    SeededClock clock(seed);
    ReplicaOptions o;
    o.id = 1;
    o.clock = clock.wall();
    Replica r(std::move(o));
    std::mt19937_64 rng(seed);

    SignalId x = r.create_source(0, "x");
    SignalId y = r.create_source(0, "y");
    SignalId color = r.create_source("black", "color");
    SignalId weight = r.create_source(1.0, "weight");
    SignalId strokes = r.create_source(Value::List {}, "strokes");
    r.create_derived({x, y}, "sum", "position_sum");
    r.create_derived({color, weight}, "concat", "style");
    r.create_derived({strokes}, "count", "stroke_count");

    std::vector<CheckpointId> checkpoints;
    for (std::size_t i = 0; i < actions; ++i) {
        switch (i % 9) {
        case 0: {
            auto a = r.begin_action("drag", "transform");
            auto moves = 3 + rng() % 3;
            for (std::uint64_t m = 0; m < moves; ++m)
                r.batch([&] {
                    r.set(x, static_cast<std::int64_t>(rng() % 500));
                    r.set(y, static_cast<std::int64_t>(rng() % 500));
                });
            r.end_action(a);
            break;
        }
        case 1: {
            auto a = r.begin_action("recolor", "style");
            r.set(color, kColors[rng() % kColors.size()]);
            r.end_action(a);
            break;
        }
        case 2: {
            auto outer = r.begin_action("draw", "generate");
            auto inner = r.begin_action("stroke", "draw");
            auto list = r.get(strokes).as_list();
            list.push_back(Value::map({{"px", static_cast<std::int64_t>(rng() % 500)},
                {"py", static_cast<std::int64_t>(rng() % 500)}}));
            r.set(strokes, std::move(list));
            r.set(weight, tenths(rng()));
            r.end_action(inner);
            r.set(color, kColors[rng() % kColors.size()]);
            r.end_action(outer);
            break;
        }
        case 3: checkpoints.push_back(r.checkpoint("v" + std::to_string(checkpoints.size() + 1))); break;
        case 4: r.set(weight, tenths(rng())); break;
        case 5: r.undo(); break;
        case 6: r.redo(); break;
        case 7: {
            auto base = r.current_branch();
            r.branch_from(checkpoints.back(), "alt" + std::to_string(i));
            r.set(x, static_cast<std::int64_t>(1000 + rng() % 100));
            r.checkpoint("alt" + std::to_string(i));
            r.checkout(base);
            break;
        }
        case 8: {
            auto p = r.create_path("tour" + std::to_string(i));
            for (auto cp : checkpoints)
                r.append_step(p, cp);
            r.append_step(p, checkpoints.front());
            break;
        }
        }
    }
    return r;
}

RandomSession random_session(std::uint64_t seed, std::size_t operations)
{
    ReplicaOptions o;
    o.id = 1;
    auto t = std::make_shared<WallTime>(1'000);
    o.clock = [t] { return *t += 3; };
    RandomSession s {Replica(std::move(o)), {}, 0};
    auto& r = s.replica;
    std::mt19937_64 rng(seed);
    std::vector<SignalId> sources;
    std::vector<SignalId> all;
    std::vector<ActionId> open;
    static constexpr std::array functions {"sum", "concat", "count", "max", "first"};
    static constexpr std::array labels {"drag", "recolor", "stroke", "resize", "nudge"};

    auto random_value = [&]() -> Value {
        switch (rng() % 6) {
        case 0: return Value(static_cast<std::int64_t>(rng() % 1000) - 500);
        case 1: return Value(static_cast<double>(rng() % 10000) / 8.0);
        case 2: return Value(kColors[rng() % kColors.size()]);
        case 3: return Value(static_cast<bool>(rng() % 2));
        case 4: return Value::list({static_cast<std::int64_t>(rng() % 10), "p"});
        default: return Value(static_cast<std::int64_t>(rng() % 10));
        }
    };
    auto new_source = [&] {
        auto id = r.create_source(random_value());
        sources.push_back(id);
        all.push_back(id);
    };
    auto do_set = [&] {
        const auto& sig = sources[rng() % sources.size()];
        r.set(sig, random_value());
        ++s.set_calls[sig];
    };

    for (int i = 0; i < 3; ++i)
        new_source();
    s.operations = 3;
    while (s.operations < operations) {
        ++s.operations;
        auto roll = rng() % 100;
        if (roll < 45) {
            do_set();
        } else if (roll < 55) {
            if (open.size() < 4)
                open.push_back(r.begin_action(labels[rng() % labels.size()], rng() % 2 ? "transform" : "style"));
            else
                do_set();
        } else if (roll < 65) {
            if (!open.empty()) {
                r.end_action(open.back());
                open.pop_back();
            } else {
                do_set();
            }
        } else if (roll < 77) {
            auto n = 2 + rng() % 3;
            r.batch([&] {
                for (std::uint64_t k = 0; k < n; ++k)
                    do_set();
            });
        } else if (roll < 83) {
            new_source();
        } else if (roll < 90) {
            std::vector<SignalId> deps;
            auto n = 1 + rng() % 3;
            for (std::uint64_t k = 0; k < n; ++k) {
                auto d = all[rng() % all.size()];
                if (std::find(deps.begin(), deps.end(), d) == deps.end())
                    deps.push_back(d);
            }
            all.push_back(r.create_derived(deps, functions[rng() % functions.size()]));
        } else if (roll < 95) {
            if (open.empty())
                r.checkpoint("cp" + std::to_string(s.operations));
            else
                do_set();
        } else {
            const auto& cps = r.history().checkpoints();
            if (cps.empty()) {
                r.create_path("path" + std::to_string(s.operations));
            } else {
                auto paths = r.list_paths();
                auto it = std::next(cps.begin(), static_cast<std::ptrdiff_t>(rng() % cps.size()));
                if (paths.empty())
                    r.create_path("path" + std::to_string(s.operations));
                else
                    r.append_step(paths[rng() % paths.size()].id, it->first);
            }
        }
    }
    while (!open.empty()) {
        r.end_action(open.back());
        open.pop_back();
    }
    return s;
}

sim::Workload generate_sim_workload(const SimWorkloadOptions& opt)
{
    using namespace sim;
    std::mt19937_64 rng(opt.seed * 0x9e3779b97f4a7c15ULL + 17);
    Workload w;
    const std::vector<SignalId> nums {{"x"}, {"y"}, {"weight"}};
    const SignalId color {"color"};

    for (std::size_t r = 1; r <= opt.replicas; ++r) {
        WorkItem decl;
        decl.tick = 0;
        decl.replica = static_cast<ReplicaId>(r);
        decl.steps.push_back(step::CreateSource {"x", static_cast<std::int64_t>(r)});
        decl.steps.push_back(step::CreateSource {"y", std::int64_t {0}});
        decl.steps.push_back(step::CreateSource {"weight", 1.0});
        decl.steps.push_back(step::CreateSource {"color", "black"});
        if (r == 1) {
            decl.steps.push_back(step::CreateDerived {"total", nums, "sum"});
            decl.steps.push_back(step::CreateDerived {"style", {color, SignalId {"weight"}}, "concat"});
        }
        w.items.push_back(std::move(decl));
    }

    auto random_set = [&]() -> step::Set {
        switch (rng() % 4) {
        case 0: return {SignalId {"x"}, static_cast<std::int64_t>(rng() % 500)};
        case 1: return {SignalId {"y"}, static_cast<std::int64_t>(rng() % 500)};
        case 2: return {SignalId {"weight"}, static_cast<double>(rng() % 64) / 4.0};
        default: return {color, kColors[rng() % kColors.size()]};
        }
    };

    std::size_t groups = opt.actions ? opt.actions : std::max<std::size_t>(1, opt.ops / 10);
    groups = std::min(groups, std::max<std::size_t>(1, opt.ops));
    // Random split of ops into `groups` non-empty parts.
    std::vector<std::size_t> sizes(groups, opt.ops ? 1 : 0);
    for (std::size_t k = groups; k < opt.ops; ++k)
        ++sizes[rng() % groups];

    std::vector<std::uint64_t> cursor(opt.replicas + 1, opt.start_tick);
    static constexpr std::array<std::pair<const char*, const char*>, 4> kinds {
        {{"drag", "transform"}, {"recolor", "style"}, {"stroke", "draw"}, {"resize", "transform"}}};
    std::uint64_t serial = 0;

    for (auto size : sizes) {
        auto r = static_cast<ReplicaId>(1 + rng() % opt.replicas);
        auto t = cursor[r] + 1 + rng() % 3;
        auto shape = rng() % 100;
        WorkItem first {t, r, {}};
        if (shape < 70) {
            auto [label, kind] = kinds[rng() % kinds.size()];
            bool nested = size >= 2 && rng() % 3 == 0;
            std::size_t head = size / 2;
            first.steps.push_back(step::Begin {label, kind});
            for (std::size_t k = 0; k < head; ++k)
                first.steps.push_back(random_set());
            WorkItem second {t + 1 + rng() % 2, r, {}};
            if (nested)
                second.steps.push_back(step::Begin {"adjust", "refine"});
            for (std::size_t k = head; k < size; ++k)
                second.steps.push_back(random_set());
            if (nested)
                second.steps.push_back(step::End {});
            second.steps.push_back(step::End {});
            cursor[r] = second.tick;
            w.items.push_back(std::move(first));
            w.items.push_back(std::move(second));
        } else if (shape < 85) {
            step::Batch b;
            for (std::size_t k = 0; k < size; ++k)
                b.sets.push_back(random_set());
            first.steps.push_back(std::move(b));
            cursor[r] = t;
            w.items.push_back(std::move(first));
        } else {
            for (std::size_t k = 0; k < size; ++k)
                first.steps.push_back(random_set());
            cursor[r] = t;
            w.items.push_back(std::move(first));
        }
        if (!opt.extras)
            continue;
        auto extra = rng() % 100;
        WorkItem more {cursor[r] + 1, r, {}};
        if (extra < 12)
            more.steps.push_back(step::Undo {});
        else if (extra < 16)
            more.steps = {step::Undo {}, step::Redo {}};
        else if (extra < 21)
            more.steps.push_back(step::Checkpoint {"cp" + std::to_string(++serial)});
        else if (extra < 24)
            more.steps.push_back(step::Path {"route" + std::to_string(++serial)});
        if (!more.steps.empty()) {
            cursor[r] = more.tick;
            w.items.push_back(std::move(more));
        }
    }
    return w;
}

std::uint64_t last_tick(const sim::Workload& workload)
{
    std::uint64_t t = 0;
    for (const auto& item : workload.items)
        t = std::max(t, item.tick);
    return t;
}

} // namespace sigtrace::workloads
