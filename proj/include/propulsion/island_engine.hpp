#ifndef PROPULSION_ISLAND_ENGINE_HPP
#define PROPULSION_ISLAND_ENGINE_HPP

#include <functional>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "propulsion/inprocess_transport.hpp"
#include "propulsion/population_ledger.hpp"
#include "propulsion/propagators.hpp"
#include "propulsion/transport.hpp"

namespace propulsion {

enum class ExchangeMode { Migration, Pollination };
enum class EmigrationPolicy { Best, Random };
enum class ImmigrationPolicy { Worst, Random };

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// The replaced cache could not drain at final synchronization; some
// condemned individual never arrived. Signals a transport or protocol bug.
struct ResidualCache : std::runtime_error {
    explicit ResidualCache(const std::string& what) : std::runtime_error(what) {}
};

struct ProtocolError : std::runtime_error {
    explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

// Directed graph of exchange paths between islands; no self edges.
struct Topology {
    std::vector<std::vector<int>> successors;

    static Topology fully_connected(int n_islands);
    static Topology ring(int n_islands);
    static Topology from_edges(int n_islands, const std::vector<std::pair<int, int>>& edges);
};

struct IslandConfig {
    std::vector<int> island_sizes;
    int generations = 256;
    ExchangeMode exchange_mode = ExchangeMode::Pollination;
    double exchange_probability = 0.7;
    int n_migrants = 1;
    Topology topology;  // defaults to fully connected when left empty
    EmigrationPolicy emigration_policy = EmigrationPolicy::Best;
    ImmigrationPolicy immigration_policy = ImmigrationPolicy::Worst;
    std::uint64_t seed = 0;
    int report_top_n = 1;

    IslandLayout layout() const { return IslandLayout(island_sizes); }
    Topology effective_topology() const;
};

// Empty string when valid, else the complaint.
std::string validate_island_config(const IslandConfig& cfg);

enum class EventKind { Bred, Received, Emigrated, Immigrated, Deactivated };
const char* event_kind_name(EventKind kind);

struct EventRecord {
    double time = 0.0;
    EventKind kind = EventKind::Bred;
    Identity id;
    double loss = 0.0;
    int other_island = -1;
    int other_rank = -1;
};

struct WorkerReport {
    WorkerAddress address;
    PopulationLedger ledger;
    std::vector<EventRecord> events;
    double finish_time = 0.0;
    std::size_t deferrals = 0;
};

struct RunResult {
    std::vector<Individual> top_n;
    std::vector<WorkerReport> workers;
    double makespan = 0.0;
    std::size_t distinct_evaluated = 0;
};

// Objective: genes in, loss out (lower is better). The RandomSource is for
// noisy objectives; deterministic ones ignore it. Throwing marks the
// individual with +infinity loss and the search continues.
using Objective = std::function<double(const GeneVector&, RandomSource&)>;

// Injected per-evaluation cost in seconds, keyed by (worker gid, generation).
using DelaySchedule = std::function<double(int, int)>;

// One worker's asynchronous optimization loop: breed and evaluate, share the
// result on the island, exchange with other islands, and reconcile
// deactivations, without ever waiting on peers until the final barrier.
class IslandWorker {
public:
    IslandWorker(const SearchSpace& space, Objective objective,
                 const PropagatorConfig& prop_config, const IslandConfig& island_config,
                 Endpoint& endpoint, DelaySchedule eval_delay = {});

    WorkerReport run();

    // step pieces, exposed for protocol tests
    void step();
    void breed_and_evaluate();
    std::size_t drain_intra_island();
    void emigrate();
    std::size_t receive_immigrants();
    std::size_t process_deactivation_notices();
    void finalize();

    const PopulationLedger& ledger() const { return ledger_; }
    int generation() const { return generation_; }

private:
    void post_to(const WorkerAddress& dest, Envelope env);
    void log(EventKind kind, const Identity& id, double loss, int other_island = -1,
             int other_rank = -1);
    std::vector<const Individual*> pick_emigrants(std::vector<const Individual*> candidates,
                                                  std::size_t k);
    void choose_victim(const std::set<Identity>& batch, const Identity& inserted);
    void reconcile_pollination_balance();
    WorkerReport make_report();

    const SearchSpace& space_;
    Objective objective_;
    PropagatorConfig prop_config_;
    const IslandConfig& cfg_;
    Endpoint& ep_;
    DelaySchedule eval_delay_;

    std::shared_ptr<const Propagator> propagator_;
    PopulationLedger ledger_;
    RandomSource breed_rng_;
    RandomSource exchange_rng_;
    RandomSource eval_rng_;
    int generation_ = 0;
    std::vector<EventRecord> events_;
    std::vector<WorkerAddress> island_peers_;
    std::vector<int> successor_islands_;
    std::size_t posts_this_round_ = 0;
};

// Runs all workers as threads over an in-process backend and merges the
// per-worker reports.
RunResult run_inprocess(const SearchSpace& space, const Objective& objective,
                        const PropagatorConfig& prop_config, const IslandConfig& island_config,
                        const InProcessNet::Options& net_options,
                        DelaySchedule eval_delay = {});

// Runs the single worker owned by this process over an already-connected
// endpoint (mesh backend).
WorkerReport run_worker(const SearchSpace& space, const Objective& objective,
                        const PropagatorConfig& prop_config, const IslandConfig& island_config,
                        Endpoint& endpoint, DelaySchedule eval_delay = {});

RunResult merge_reports(std::vector<WorkerReport> reports, int top_n);

// Best-first ordering used everywhere results are ranked: loss ascending,
// identity as the deterministic tiebreak.
bool better_individual(const Individual& a, const Individual& b);

}  // namespace propulsion

#endif
