#pragma once

#include "sigtrace/netsim.hpp"
#include "sigtrace/replica.hpp"

#include <cstdint>
#include <map>

namespace sigtrace::workloads {

inline constexpr std::size_t kDefaultDemoActions = 12;

/// Scripted single-replica drawing session on replica 1 with a clock
/// derived from the seed. Declares x, y, color, weight, strokes and three
/// derived signals, then plays `actions` scenes from a fixed rotation:
/// drag, recolor, nested stroke, checkpoint, lone resize, undo, redo,
/// branch exploration, path. `actions == 0` stops after the declarations.
Replica demo_session(std::uint64_t seed, std::size_t actions = kDefaultDemoActions);

struct RandomSession {
    Replica replica;
    std::map<SignalId, std::uint64_t> set_calls; // successful set() per signal
    std::size_t operations = 0;
};

/// Randomized local session of `operations` library calls: sets, nested
/// actions, batches, new sources and derived signals, checkpoints and
/// paths. No undo/redo, so every source entry is a creation or a set.
RandomSession random_session(std::uint64_t seed, std::size_t operations);

struct SimWorkloadOptions {
    std::size_t replicas = 3;
    std::uint64_t seed = 0;
    std::size_t ops = 200; // set operations in total
    std::size_t actions = 0; // 0 picks ops / 10
    std::uint64_t start_tick = 4; // first tick after the declarations
    bool extras = true; // sprinkle undo, redo, checkpoints and paths
};

/// Every replica declares the same sources at tick 0 (concurrent
/// declarations merge); replica 1 also declares the derived signals.
sim::Workload generate_sim_workload(const SimWorkloadOptions& options);

/// Last tick used by any item.
std::uint64_t last_tick(const sim::Workload& workload);

} // namespace sigtrace::workloads
