#ifndef PROPULSION_RUN_CONFIG_HPP
#define PROPULSION_RUN_CONFIG_HPP

#include <string>
#include <vector>

#include "propulsion/island_engine.hpp"
#include "propulsion/propagators.hpp"
#include "propulsion/search_space.hpp"

namespace propulsion {

// Everything a run needs, parsed from a flat key-value config file with
// [gene] sections. Defaults follow the shipped tuning.
struct RunConfig {
    std::string objective;          // named benchmark
    std::string objective_command;  // external command, mutually exclusive
    SearchSpace space;              // explicit genes, or derived from the benchmark
    bool explicit_genes = false;
    PropagatorConfig propagator;
    IslandConfig islands;
    std::string topology_kind = "fully_connected";  // fully_connected | ring | edges
    std::vector<std::pair<int, int>> edges;
    std::string backend = "inprocess";  // inprocess | mesh
    bool deterministic = true;
    std::string rank_file;
    std::string out_dir = "out";
    double barrier_timeout = 60.0;

    IslandConfig resolved_islands() const;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

// The search space the run actually uses: explicit genes, or the benchmark's.
SearchSpace effective_space(const RunConfig& cfg);

// Objective function for the run. External commands get genes as name=value
// arguments and must print the loss as the last output line; any failure
// (nonzero exit, unparsable output) yields +infinity.
Objective make_objective(const RunConfig& cfg);

// Canonical serialization; parse(serialize(c)) reproduces every recognized key.
std::string serialize_run_config(const RunConfig& cfg);

// Full consistency check; throws ConfigError naming the offending key.
void validate_run_config(const RunConfig& cfg);

}  // namespace propulsion

#endif
