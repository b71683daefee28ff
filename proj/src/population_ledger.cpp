#include "propulsion/population_ledger.hpp"

#include <algorithm>

namespace propulsion {

RecordOutcome PopulationLedger::record(Individual ind) {
    if (!ind.evaluated()) {
        throw std::invalid_argument("record: individual has no loss");
    }
    if (index_.count(ind.origin)) {
        throw DuplicateIdentity(ind.origin);
    }
    return insert(std::move(ind));
}

RecordOutcome PopulationLedger::record_or_ignore(Individual ind) {
    if (index_.count(ind.origin)) {
        return RecordOutcome::Ignored;
    }
    return record(std::move(ind));
}

RecordOutcome PopulationLedger::insert(Individual ind) {
    ind.resident_island = owner_island_;
    auto pending = std::find(replaced_cache_.begin(), replaced_cache_.end(), ind.origin);
    if (pending != replaced_cache_.end()) {
        replaced_cache_.erase(pending);
        ind.active = false;
        index_[ind.origin] = records_.size();
        records_.push_back(std::move(ind));
        return RecordOutcome::RecordedInactive;
    }
    ind.active = true;
    index_[ind.origin] = records_.size();
    records_.push_back(std::move(ind));
    ++active_count_;
    return RecordOutcome::RecordedActive;
}

DeactivateOutcome PopulationLedger::deactivate(const Identity& id) {
    auto it = index_.find(id);
    if (it == index_.end()) {
        if (std::find(replaced_cache_.begin(), replaced_cache_.end(), id) ==
            replaced_cache_.end()) {
            replaced_cache_.push_back(id);
            ++deferrals_seen_;
        }
        return DeactivateOutcome::Deferred;
    }
    Individual& ind = records_[it->second];
    if (!ind.active) {
        return DeactivateOutcome::AlreadyInactive;
    }
    ind.active = false;
    --active_count_;
    return DeactivateOutcome::Deactivated;
}

std::vector<const Individual*> PopulationLedger::active_view() const {
    std::vector<const Individual*> view;
    view.reserve(active_count_);
    for (const Individual& ind : records_) {
        if (ind.active) view.push_back(&ind);
    }
    return view;
}

std::size_t PopulationLedger::flush_cache() {
    std::size_t resolved = 0;
    for (std::size_t i = 0; i < replaced_cache_.size();) {
        auto it = index_.find(replaced_cache_[i]);
        if (it == index_.end()) {
            ++i;
            continue;
        }
        Individual& ind = records_[it->second];
        if (ind.active) {
            ind.active = false;
            --active_count_;
        }
        replaced_cache_.erase(replaced_cache_.begin() + static_cast<std::ptrdiff_t>(i));
        ++resolved;
    }
    return resolved;
}

const Individual* PopulationLedger::find(const Identity& id) const {
    auto it = index_.find(id);
    return it == index_.end() ? nullptr : &records_[it->second];
}

}  // namespace propulsion
