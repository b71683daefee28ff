#ifndef PROPULSION_POPULATION_LEDGER_HPP
#define PROPULSION_POPULATION_LEDGER_HPP

#include <cstddef>
#include <map>
#include <stdexcept>
#include <vector>

#include "propulsion/search_space.hpp"

namespace propulsion {

struct DuplicateIdentity : std::runtime_error {
    explicit DuplicateIdentity(const Identity& id)
        : std::runtime_error("duplicate identity (" + std::to_string(id.island) + "," +
                             std::to_string(id.rank) + "," + std::to_string(id.generation) + ")") {}
};

enum class RecordOutcome { RecordedActive, RecordedInactive, Ignored };
enum class DeactivateOutcome { Deactivated, AlreadyInactive, Deferred };

// Per-worker record of every individual the worker knows of. Records are
// append-only and deactivation is a soft flag; nothing is ever removed, so
// the full history stays available for reporting. Single-writer: owned by
// exactly one worker, never shared.
class PopulationLedger {
public:
    PopulationLedger() = default;
    PopulationLedger(int island, int rank) : owner_island_(island), owner_rank_(rank) {}

    // Appends an evaluated individual. If its identity was condemned before
    // it arrived (a pending entry in the replaced cache), it is recorded
    // inactive and the cache entry is consumed.
    RecordOutcome record(Individual ind);

    // Same as record() but silently ignores an already-present identity
    // instead of throwing. Legitimate under pollination, where copies of one
    // individual can reach a worker more than once.
    RecordOutcome record_or_ignore(Individual ind);

    // Marks an identity inactive. Absent identities are deferred into the
    // replaced cache and retried once they arrive.
    DeactivateOutcome deactivate(const Identity& id);

    // Breeding pool: all and only active records, in append order.
    std::vector<const Individual*> active_view() const;

    // Retries every cached condemnation; returns how many resolved.
    std::size_t flush_cache();

    bool contains(const Identity& id) const { return index_.count(id) != 0; }
    const Individual* find(const Identity& id) const;

    const std::vector<Individual>& records() const { return records_; }
    const std::vector<Identity>& replaced_cache() const { return replaced_cache_; }

    std::size_t active_count() const { return active_count_; }
    std::size_t inactive_count() const { return records_.size() - active_count_; }
    std::size_t deferrals_seen() const { return deferrals_seen_; }

    int owner_island() const { return owner_island_; }
    int owner_rank() const { return owner_rank_; }

private:
    RecordOutcome insert(Individual ind);

    int owner_island_ = 0;
    int owner_rank_ = 0;
    std::vector<Individual> records_;
    std::map<Identity, std::size_t> index_;
    std::vector<Identity> replaced_cache_;
    std::size_t active_count_ = 0;
    std::size_t deferrals_seen_ = 0;
};

}  // namespace propulsion

#endif
