#include <doctest.h>

#include <map>
#include <set>

#include "propulsion/population_ledger.hpp"
#include "propulsion/rng.hpp"

using namespace propulsion;

namespace {

Individual make_ind(int island, int rank, int generation, double loss) {
    Individual ind;
    ind.genes = {GeneValue{0.0}};
    ind.loss = loss;
    ind.origin = {island, rank, generation};
    return ind;
}

}  // namespace

TEST_CASE("record on an empty ledger yields one active record") {
    PopulationLedger ledger(0, 0);
    CHECK(ledger.record(make_ind(0, 0, 0, 1.0)) == RecordOutcome::RecordedActive);
    CHECK(ledger.active_count() == 1);
    CHECK(ledger.active_view().size() == 1);
}

TEST_CASE("condemnation arriving before the individual is absorbed") {
    PopulationLedger ledger(0, 0);
    const Identity b{0, 1, 3};
    CHECK(ledger.deactivate(b) == DeactivateOutcome::Deferred);
    CHECK(ledger.replaced_cache().size() == 1);
    CHECK(ledger.record(make_ind(0, 1, 3, 2.0)) == RecordOutcome::RecordedInactive);
    CHECK(ledger.replaced_cache().empty());
    CHECK(ledger.active_count() == 0);
    CHECK(ledger.records().size() == 1);
}

TEST_CASE("recording the same identity twice throws") {
    PopulationLedger ledger(0, 0);
    ledger.record(make_ind(0, 0, 0, 1.0));
    CHECK_THROWS_AS(ledger.record(make_ind(0, 0, 0, 1.0)), DuplicateIdentity);
    CHECK(ledger.record_or_ignore(make_ind(0, 0, 0, 1.0)) == RecordOutcome::Ignored);
}

TEST_CASE("deactivate present, absent and repeated") {
    PopulationLedger ledger(0, 0);
    ledger.record(make_ind(0, 0, 0, 1.0));
    const Identity a{0, 0, 0};
    CHECK(ledger.deactivate(a) == DeactivateOutcome::Deactivated);
    CHECK(ledger.deactivate(a) == DeactivateOutcome::AlreadyInactive);
    CHECK(ledger.inactive_count() == 1);

    const Identity c{1, 0, 5};
    CHECK(ledger.deactivate(c) == DeactivateOutcome::Deferred);
    CHECK(ledger.replaced_cache() == std::vector<Identity>{c});
}

TEST_CASE("active view preserves append order") {
    PopulationLedger ledger(0, 0);
    ledger.record(make_ind(0, 0, 0, 3.0));
    ledger.record(make_ind(0, 0, 1, 1.0));
    ledger.deactivate({0, 0, 0});
    const auto view = ledger.active_view();
    REQUIRE(view.size() == 1);
    CHECK(view[0]->origin == Identity{0, 0, 1});
    CHECK(PopulationLedger{}.active_view().empty());
}

TEST_CASE("flush retries cached condemnations") {
    PopulationLedger ledger(0, 0);
    ledger.deactivate({9, 9, 9});
    CHECK(ledger.flush_cache() == 0);  // still absent
    CHECK(ledger.replaced_cache().size() == 1);
    // arrival consumes the pending condemnation immediately
    ledger.record(make_ind(9, 9, 9, 4.0));
    CHECK(ledger.replaced_cache().empty());
    CHECK(ledger.flush_cache() == 0);
}

// Brute-force replay oracle: the ledger's final state must be a pure
// function of the operation sequence.
TEST_CASE("replay oracle agrees over random operation logs") {
    RandomSource rng(2024);
    for (int trial = 0; trial < 60; ++trial) {
        PopulationLedger ledger(0, 0);
        // oracle state
        std::map<Identity, bool> oracle_active;  // identity -> active
        std::map<Identity, double> oracle_loss;
        std::set<Identity> oracle_cache;
        std::vector<Identity> oracle_order;

        const int ops = 1 + static_cast<int>(rng.uniform_index(200));
        for (int op = 0; op < ops; ++op) {
            const Identity id{0, static_cast<int>(rng.uniform_index(3)),
                              static_cast<int>(rng.uniform_index(12))};
            if (rng.chance(0.55)) {
                const double loss = rng.uniform(0, 10);
                if (oracle_loss.count(id)) {
                    CHECK(ledger.record_or_ignore(make_ind(id.island, id.rank, id.generation,
                                                           loss)) == RecordOutcome::Ignored);
                } else {
                    ledger.record(make_ind(id.island, id.rank, id.generation, loss));
                    oracle_loss[id] = loss;
                    oracle_order.push_back(id);
                    if (oracle_cache.count(id)) {
                        oracle_cache.erase(id);
                        oracle_active[id] = false;
                    } else {
                        oracle_active[id] = true;
                    }
                }
            } else {
                ledger.deactivate(id);
                if (oracle_loss.count(id)) {
                    oracle_active[id] = false;
                } else {
                    oracle_cache.insert(id);
                }
            }
        }

        // compare active sets in order
        std::vector<Identity> oracle_view;
        for (const Identity& id : oracle_order) {
            if (oracle_active[id]) oracle_view.push_back(id);
        }
        std::vector<Identity> ledger_view;
        for (const Individual* p : ledger.active_view()) ledger_view.push_back(p->origin);
        CHECK(ledger_view == oracle_view);

        std::set<Identity> ledger_cache(ledger.replaced_cache().begin(),
                                        ledger.replaced_cache().end());
        CHECK(ledger_cache == oracle_cache);
    }
}

TEST_CASE("inactive count is monotone") {
    RandomSource rng(5);
    PopulationLedger ledger(0, 0);
    std::size_t last_inactive = 0;
    for (int op = 0; op < 300; ++op) {
        const Identity id{0, 0, static_cast<int>(rng.uniform_index(40))};
        if (rng.chance(0.5)) {
            ledger.record_or_ignore(make_ind(0, 0, id.generation, 1.0));
        } else {
            ledger.deactivate(id);
        }
        CHECK(ledger.inactive_count() >= last_inactive);
        last_inactive = ledger.inactive_count();
    }
}

TEST_CASE("any interleaving of record and deactivate ends recorded-and-inactive") {
    const Identity x{0, 0, 7};
    // record first
    {
        PopulationLedger ledger(0, 0);
        ledger.record(make_ind(0, 0, 7, 1.0));
        ledger.deactivate(x);
        REQUIRE(ledger.find(x));
        CHECK_FALSE(ledger.find(x)->active);
        CHECK(ledger.replaced_cache().empty());
    }
    // deactivate first
    {
        PopulationLedger ledger(0, 0);
        ledger.deactivate(x);
        ledger.record(make_ind(0, 0, 7, 1.0));
        REQUIRE(ledger.find(x));
        CHECK_FALSE(ledger.find(x)->active);
        CHECK(ledger.replaced_cache().empty());
    }
}

TEST_CASE("100 records with 40 deactivations leave 60 active in order") {
    PopulationLedger ledger(0, 0);
    for (int g = 0; g < 100; ++g) ledger.record(make_ind(0, 0, g, g));
    for (int g = 0; g < 40; ++g) ledger.deactivate({0, 0, g * 2});
    const auto view = ledger.active_view();
    REQUIRE(view.size() == 60);
    int last = -1;
    for (const Individual* p : view) {
        CHECK(p->origin.generation > last);
        last = p->origin.generation;
    }
}
