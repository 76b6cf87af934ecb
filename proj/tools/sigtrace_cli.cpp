// sigtrace: record, replay, inspect and simulate signal traces.

#include "sigtrace/error.hpp"
#include "sigtrace/netsim.hpp"
#include "sigtrace/replay.hpp"
#include "sigtrace/trace.hpp"
#include "sigtrace/workloads.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace sigtrace;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

fs::path output_path(const std::string& p)
{
    fs::path path(p);
    if (path.is_relative())
        if (const char* dir = std::getenv("SIGTRACE_OUT_DIR"); dir && *dir)
            return fs::path(dir) / path;
    return path;
}

VersionStamp parse_stamp(const std::string& text)
{
    try {
        return VersionStamp::parse(text);
    } catch (const Error&) {
        throw UsageError("invalid stamp '" + text + "' (expected lamport@replica)");
    }
}

template <class Id> Id parse_id(const std::string& text, const char* what)
{
    try {
        return Id::parse(text);
    } catch (const Error&) {
        throw UsageError(std::string("invalid ") + what + " id '" + text + "'");
    }
}

sim::Partition parse_partition(const std::string& text)
{
    // START-END:R[,R...]
    auto colon = text.find(':');
    auto dash = text.find('-');
    if (colon == std::string::npos || dash == std::string::npos || dash > colon)
        throw UsageError("invalid partition '" + text + "' (expected START-END:R[,R...])");
    sim::Partition p;
    try {
        std::size_t used = 0;
        p.start = std::stoull(text.substr(0, dash), &used);
        if (used != dash)
            throw std::invalid_argument("start");
        p.end = std::stoull(text.substr(dash + 1, colon - dash - 1), &used);
        if (used != colon - dash - 1)
            throw std::invalid_argument("end");
        std::string rest = text.substr(colon + 1);
        std::size_t pos = 0;
        while (pos <= rest.size()) {
            auto comma = rest.find(',', pos);
            auto item = rest.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
            auto r = std::stoul(item, &used);
            if (used != item.size())
                throw std::invalid_argument("replica");
            p.isolated.push_back(static_cast<ReplicaId>(r));
            if (comma == std::string::npos)
                break;
            pos = comma + 1;
        }
    } catch (const std::logic_error&) {
        throw UsageError("invalid partition '" + text + "' (expected START-END:R[,R...])");
    }
    return p;
}

Replica load(const std::string& file, std::optional<VersionStamp> upto = std::nullopt)
{
    return replay(read_trace(file), FunctionRegistry::with_builtins(), upto);
}

std::string absent_or(const std::optional<Value>& v)
{
    return v ? v->to_display() : "absent";
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app {"Record, replay, query and simulate signal histories"};
    app.require_subcommand(1);

    std::uint64_t seed = 1;
    std::string out;
    std::size_t demo_actions = workloads::kDefaultDemoActions;
    auto* demo = app.add_subcommand("demo", "Record a scripted single-replica session");
    demo->add_option("--seed", seed, "Random seed")->required();
    demo->add_option("--out", out, "Trace file to write")->required();
    demo->add_option("--actions", demo_actions, "Number of scripted scenes");

    std::string trace_file;
    std::string at;
    auto* replay_cmd = app.add_subcommand("replay", "Replay a trace and print signal values");
    replay_cmd->add_option("--trace", trace_file, "Trace file")->required();
    replay_cmd->add_option("--at", at, "Stop after this stamp (lamport@replica)");

    std::string signal;
    std::optional<WallTime> at_time;
    auto* query = app.add_subcommand("query", "Print a signal's history or its value at a point");
    query->add_option("--trace", trace_file, "Trace file")->required();
    query->add_option("--signal", signal, "Signal id")->required();
    auto* q_at = query->add_option("--at", at, "Stamp (lamport@replica)");
    query->add_option("--time", at_time, "Wall time in milliseconds")->excludes(q_at);

    std::string kind;
    std::string label;
    bool no_implicit = false;
    bool nested = false;
    auto* actions = app.add_subcommand("actions", "List the semantic action log");
    actions->add_option("--trace", trace_file, "Trace file")->required();
    actions->add_option("--kind", kind, "Only actions of this kind");
    actions->add_option("--label", label, "Only actions with this label");
    actions->add_flag("--no-implicit", no_implicit, "Hide implicit single-edit actions");
    actions->add_flag("--nested", nested, "Include nested actions");

    std::string from_cp;
    std::string to_cp;
    auto* diff = app.add_subcommand("diff", "Compare two checkpoints");
    diff->add_option("--trace", trace_file, "Trace file")->required();
    diff->add_option("--from", from_cp, "Checkpoint id")->required();
    diff->add_option("--to", to_cp, "Checkpoint id")->required();

    auto* verify_cmd = app.add_subcommand("verify", "Check a trace end to end");
    verify_cmd->add_option("--trace", trace_file, "Trace file")->required();

    std::size_t replicas = 3;
    std::size_t ops = 200;
    std::size_t sim_actions = 0;
    double duplicate = 0.0;
    std::vector<std::string> partitions;
    std::string report_file;
    std::string trace_dir;
    std::string fault = "none";
    std::uint64_t min_delay = 1;
    std::uint64_t max_delay = 3;
    bool no_reorder = false;
    auto* simulate = app.add_subcommand("simulate", "Run replicas over a simulated network");
    simulate->add_option("--replicas", replicas, "Replica count")->check(CLI::Range(1, 1000));
    simulate->add_option("--seed", seed, "Random seed")->required();
    simulate->add_option("--ops", ops, "Set operations in the generated workload");
    simulate->add_option("--actions", sim_actions, "Operation groups (default ops/10)");
    simulate->add_option("--duplicate", duplicate, "Duplicate probability")->check(CLI::Range(0.0, 1.0));
    simulate->add_option("--partition", partitions, "START-END:R[,R...] isolates replicas for ticks [START, END)");
    simulate->add_option("--min-delay", min_delay, "Minimum delivery delay in ticks")->check(CLI::PositiveNumber);
    simulate->add_option("--max-delay", max_delay, "Maximum delivery delay in ticks")->check(CLI::PositiveNumber);
    simulate->add_flag("--no-reorder", no_reorder, "FIFO channels");
    simulate->add_option("--report", report_file, "Write the JSON report here");
    simulate->add_option("--trace-dir", trace_dir, "Write each replica's trace into this directory");
    simulate->add_option("--inject-fault", fault, "Merge fault for harness checks")
        ->check(CLI::IsMember({"none", "invert-lww"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*demo) {
            auto r = workloads::demo_session(seed, demo_actions);
            auto path = output_path(out);
            write_file(path, r.trace_text());
            std::cout << "wrote " << r.events().size() << " records to " << path.string() << "\n";
        } else if (*replay_cmd) {
            std::optional<VersionStamp> upto;
            if (!at.empty())
                upto = parse_stamp(at);
            auto r = load(trace_file, upto);
            for (const auto& s : r.signals())
                std::cout << s.name << " = " << r.get(s).to_display() << "\n";
        } else if (*query) {
            std::optional<VersionStamp> stamp;
            if (!at.empty())
                stamp = parse_stamp(at);
            auto r = load(trace_file);
            SignalId id {signal};
            if (stamp) {
                std::cout << r.value_at(id, *stamp).to_display() << "\n";
            } else if (at_time) {
                std::cout << r.value_at_time(id, *at_time).to_display() << "\n";
            } else {
                for (const auto& e : r.history_of(id))
                    std::cout << e.stamp.str() << "\t" << e.wall_time << "\t" << to_string(e.origin) << "\t"
                              << e.action.str() << "\t" << e.value.to_display() << "\n";
            }
        } else if (*actions) {
            auto r = load(trace_file);
            ActionFilter f;
            if (!kind.empty())
                f.kind = kind;
            if (!label.empty())
                f.label = label;
            f.top_level_only = !nested;
            std::size_t shown = 0;
            for (const auto& b : r.actions(f)) {
                if (no_implicit && b.implicit)
                    continue;
                ++shown;
                std::cout << b.id.str() << "\t" << b.label << "\t" << b.kind << "\tentries=" << b.entries.size()
                          << "\torigin=" << b.origin_replica << "\tat=" << b.closed.str();
                if (b.parent)
                    std::cout << "\tparent=" << b.parent->str();
                if (b.reverts)
                    std::cout << "\treverts=" << b.reverts->str();
                std::cout << "\n";
            }
            std::cout << shown << (shown == 1 ? " action\n" : " actions\n");
        } else if (*diff) {
            auto a = parse_id<CheckpointId>(from_cp, "checkpoint");
            auto b = parse_id<CheckpointId>(to_cp, "checkpoint");
            auto r = load(trace_file);
            auto changes = r.diff(a, b);
            for (const auto& d : changes)
                std::cout << d.signal.name << ": " << absent_or(d.before) << " -> " << absent_or(d.after) << "\n";
            if (changes.empty())
                std::cout << "no differences\n";
        } else if (*verify_cmd) {
            auto text = read_file(trace_file);
            auto failures = verify(text);
            if (!failures.empty()) {
                for (const auto& f : failures)
                    std::cerr << "verify: " << f << "\n";
                return 1;
            }
            auto lines = std::count(text.begin(), text.end(), '\n');
            std::cout << "ok: " << (lines > 0 ? lines - 1 : 0) << " records verified\n";
        } else if (*simulate) {
            sim::SimConfig config;
            config.replica_count = replicas;
            config.seed = seed;
            config.min_delay = min_delay;
            config.max_delay = std::max(max_delay, min_delay);
            config.duplicate_prob = duplicate;
            config.reorder = !no_reorder;
            for (const auto& p : partitions)
                config.partitions.push_back(parse_partition(p));
            config.fault = fault == "invert-lww" ? MergeFault::InvertLastWriterWins : MergeFault::None;
            workloads::SimWorkloadOptions wo;
            wo.replicas = replicas;
            wo.seed = seed;
            wo.ops = ops;
            wo.actions = sim_actions;
            wo.start_tick = config.max_delay + 1;
            auto report = sim::run(config, workloads::generate_sim_workload(wo));
            if (!report_file.empty())
                write_file(output_path(report_file), report.to_json() + "\n");
            if (!trace_dir.empty()) {
                auto dir = output_path(trace_dir);
                std::error_code ec;
                fs::create_directories(dir, ec);
                if (ec)
                    throw Error(ErrorCode::IoFailure, "cannot create '" + dir.string() + "': " + ec.message());
                for (const auto& rr : report.replicas)
                    write_file(dir / ("replica" + std::to_string(rr.id) + ".trace"), rr.trace);
            }
            const auto& s = report.stats;
            std::cout << "messages: " << s.messages << " (duplicates " << s.duplicates << ", deferred " << s.deferred
                      << "), transactions: " << s.transactions << ", max buffer depth: " << s.max_buffer_depth
                      << ", ticks: " << s.ticks << "\n";
            std::cout << "shared action log: " << report.replicas.front().log.size() << " actions\n";
            auto verdict = sim::assert_converged(report);
            if (!verdict.converged) {
                std::cout << "diverged: " << verdict.divergence << "\n";
                return 1;
            }
            std::cout << "converged\n";
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
