#include "helpers.hpp"

#include "sigtrace/workloads.hpp"

#include <random>

using namespace sigtrace;

namespace {

struct Rng {
    std::mt19937_64 gen;
    explicit Rng(std::uint64_t seed) : gen(seed) { }
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(gen() % n); }
    bool chance(int percent) { return below(100) < static_cast<std::size_t>(percent); }
};

std::map<SignalId, std::vector<HistoryEntry>> all_histories(const Replica& r)
{
    std::map<SignalId, std::vector<HistoryEntry>> out;
    for (const auto& s : r.signals())
        out[s] = r.history_of(s);
    return out;
}

bool extends(const std::vector<HistoryEntry>& before, const std::vector<HistoryEntry>& after)
{
    // Every old entry is still present and unchanged.
    for (const auto& e : before)
        if (std::find(after.begin(), after.end(), e) == after.end())
            return false;
    return after.size() >= before.size();
}

} // namespace

TEST_CASE("histories are append-only under random local sessions")
{
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        Rng rng(seed);
        auto r = testing::local();
        std::vector<SignalId> sources {r.create_source(0, "a"), r.create_source(0, "b")};
        r.create_derived({sources[0], sources[1]}, "sum", "d");
        std::vector<ActionId> open;
        auto before = all_histories(r);
        std::size_t total = r.history().size();
        for (int i = 0; i < 200; ++i) {
            auto pick = rng.below(6);
            if (pick == 0 && open.size() < 3) {
                open.push_back(r.begin_action("g", "k"));
            } else if (pick == 1 && !open.empty()) {
                r.end_action(open.back());
                open.pop_back();
            } else if (pick == 2 && open.empty()) {
                r.undo();
            } else if (pick == 3 && open.empty()) {
                r.redo();
            } else if (pick == 4) {
                r.batch([&] {
                    for (int k = 0; k < 3; ++k)
                        r.set(sources[rng.below(2)], static_cast<int>(rng.below(10)));
                });
            } else {
                r.set(sources[rng.below(2)], static_cast<int>(rng.below(10)));
            }
            auto now = all_histories(r);
            for (const auto& [s, h] : before)
                REQUIRE(extends(h, now.at(s)));
            REQUIRE(r.history().size() >= total);
            total = r.history().size();
            before = std::move(now);
            REQUIRE(r.check_invariants().empty());
        }
    }
}

TEST_CASE("undo soundness and redo idempotence")
{
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed);
        auto r = testing::local();
        std::vector<SignalId> sources;
        for (int i = 0; i < 4; ++i)
            sources.push_back(r.create_source(0, "s" + std::to_string(i)));
        auto snapshot = [&] {
            std::vector<Value> v;
            for (const auto& s : sources)
                v.push_back(r.get(s));
            return v;
        };
        // Linear undo model: states[k] is the state after the k-th live action.
        std::vector<std::vector<Value>> states {snapshot()};
        std::size_t cursor = 0;
        for (int step = 0; step < 40; ++step) {
            auto choice = rng.below(3);
            if (choice == 0 || cursor == 0) {
                auto a = r.begin_action("edit", "k");
                for (std::size_t k = 0, n = 1 + rng.below(3); k < n; ++k)
                    r.set(sources[rng.below(sources.size())], static_cast<int>(rng.below(100)));
                r.end_action(a);
                states.resize(cursor + 1);
                states.push_back(snapshot());
                ++cursor;
            } else if (choice == 1) {
                REQUIRE(r.undo().has_value());
                --cursor;
                CHECK(snapshot() == states[cursor]);
            } else if (cursor + 1 < states.size()) {
                REQUIRE(r.redo().has_value());
                ++cursor;
                CHECK(snapshot() == states[cursor]);
            } else {
                CHECK_FALSE(r.redo().has_value());
            }
        }
    }
}

TEST_CASE("batches recompute each derived once")
{
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng rng(seed);
        auto r = testing::local();
        std::vector<SignalId> src;
        for (int i = 0; i < 5; ++i)
            src.push_back(r.create_source(i, "x" + std::to_string(i)));
        std::vector<SignalId> all = src;
        for (int i = 0; i < 6; ++i) {
            std::vector<SignalId> deps {all[rng.below(all.size())], all[rng.below(all.size())]};
            all.push_back(r.create_derived(deps, "sum", "d" + std::to_string(i)));
        }
        std::map<SignalId, std::uint64_t> before;
        for (const auto& s : all)
            before[s] = r.recompute_count(s);
        r.batch([&] {
            for (int k = 0; k < 6; ++k)
                r.set(src[rng.below(src.size())], static_cast<int>(rng.below(50)));
        });
        for (const auto& s : all)
            CHECK(r.recompute_count(s) - before[s] <= 1);
        CHECK(r.check_invariants().empty());
    }
}

TEST_CASE("concurrent transactions commute and duplicates are no-ops")
{
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
        Rng rng(seed);
        auto origin = testing::shared(1);
        std::vector<SignalId> sig {origin.create_source(0, "x"), origin.create_source("k", "y")};
        origin.create_derived({sig[0]}, "count", "c");
        auto setup = origin.take_outbox();

        auto make = [&](ReplicaId id) {
            auto r = testing::shared(id);
            for (const auto& t : setup)
                r.apply_remote(t);
            return r;
        };
        auto p = make(2);
        auto q = make(3);
        auto scribble = [&](Replica& r) {
            for (std::size_t k = 0, n = 1 + rng.below(3); k < n; ++k) {
                auto a = r.begin_action("w", "k");
                for (std::size_t j = 0, m = rng.below(3); j < m; ++j)
                    r.set(sig[rng.below(2)], static_cast<int>(rng.below(5)));
                r.end_action(a);
            }
            return r.take_outbox();
        };
        auto tp = scribble(p);
        auto tq = scribble(q);

        auto observer_a = make(4);
        auto observer_b = make(5);
        for (const auto& t : tp)
            observer_a.apply_remote(t);
        for (const auto& t : tq)
            observer_a.apply_remote(t);
        for (const auto& t : tq)
            observer_b.apply_remote(t);
        for (const auto& t : tp)
            observer_b.apply_remote(t);
        CHECK(observer_a.replicated_state() == observer_b.replicated_state());

        auto state = observer_a.replicated_state();
        for (const auto& t : tp)
            CHECK(observer_a.apply_remote(t) == ApplyResult::Duplicate);
        CHECK(observer_a.replicated_state() == state);

        for (const auto& t : tq)
            p.apply_remote(t);
        for (const auto& t : tp)
            q.apply_remote(t);
        CHECK(p.replicated_state() == state);
        CHECK(q.replicated_state() == state);
    }
}

TEST_CASE("lamports respect causal order")
{
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Rng rng(seed);
        std::vector<Replica> rs;
        for (ReplicaId id = 1; id <= 3; ++id)
            rs.push_back(testing::shared(id));
        rs[0].create_source(0, "x");
        std::vector<Transaction> all;
        std::vector<std::size_t> cursor(3, 0);
        auto route = [&] {
            for (auto& r : rs)
                for (auto& t : r.take_outbox())
                    all.push_back(std::move(t));
        };
        route();
        for (int step = 0; step < 60; ++step) {
            auto& r = rs[rng.below(3)];
            auto i = static_cast<std::size_t>(&r - rs.data());
            // deliver a random prefix of what this replica has not seen
            auto upto = cursor[i] + rng.below(all.size() - cursor[i] + 1);
            for (; cursor[i] < upto; ++cursor[i])
                if (all[cursor[i]].id.replica != r.id())
                    r.apply_remote(all[cursor[i]]);
            if (r.has_signal(SignalId {"x"}))
                r.set(SignalId {"x"}, step);
            route();
        }
        std::map<TxnId, std::uint64_t> lamport;
        for (const auto& t : all)
            lamport[t.id] = t.lamport;
        for (const auto& t : all) {
            if (t.id.seq > 1)
                CHECK(lamport.at(TxnId {t.id.replica, t.id.seq - 1}) < t.lamport);
            for (const auto& [r, seq] : t.deps)
                if (seq > 0)
                    CHECK(lamport.at(TxnId {r, seq}) < t.lamport);
        }
    }
}

TEST_CASE("random sessions track set and recompute counts")
{
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        auto s = workloads::random_session(seed, 400);
        for (const auto& sig : s.replica.signals()) {
            auto n = s.replica.history_of(sig).size();
            if (s.replica.kind_of(sig) == SignalKind::Source)
                CHECK(n == 1 + s.set_calls[sig]);
            else
                CHECK(n == 1 + s.replica.recompute_count(sig)); // initial evaluation plus recomputes
        }
    }
}
