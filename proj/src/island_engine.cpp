#include "propulsion/island_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <thread>

namespace propulsion {

Topology Topology::fully_connected(int n_islands) {
    Topology t;
    t.successors.resize(static_cast<std::size_t>(n_islands));
    for (int i = 0; i < n_islands; ++i) {
        for (int j = 0; j < n_islands; ++j) {
            if (i != j) t.successors[static_cast<std::size_t>(i)].push_back(j);
        }
    }
    return t;
}

Topology Topology::ring(int n_islands) {
    Topology t;
    t.successors.resize(static_cast<std::size_t>(n_islands));
    if (n_islands < 2) return t;
    for (int i = 0; i < n_islands; ++i) {
        t.successors[static_cast<std::size_t>(i)].push_back((i + 1) % n_islands);
    }
    return t;
}

Topology Topology::from_edges(int n_islands, const std::vector<std::pair<int, int>>& edges) {
    Topology t;
    t.successors.resize(static_cast<std::size_t>(n_islands));
    for (const auto& [from, to] : edges) {
        t.successors.at(static_cast<std::size_t>(from)).push_back(to);
    }
    return t;
}

Topology IslandConfig::effective_topology() const {
    if (!topology.successors.empty()) return topology;
    return Topology::fully_connected(static_cast<int>(island_sizes.size()));
}

std::string validate_island_config(const IslandConfig& cfg) {
    if (cfg.island_sizes.empty()) return "island_sizes must not be empty";
    for (int s : cfg.island_sizes) {
        if (s < 1) return "island sizes must be positive";
    }
    if (cfg.generations < 1) return "generations must be positive";
    if (cfg.exchange_probability < 0.0 || cfg.exchange_probability > 1.0) {
        return "exchange_probability must be in [0,1]";
    }
    if (cfg.n_migrants < 1) return "n_migrants must be positive";
    if (cfg.report_top_n < 1) return "report_top_n must be positive";
    const Topology topo = cfg.effective_topology();
    if (topo.successors.size() != cfg.island_sizes.size()) {
        return "topology does not cover every island";
    }
    const int n = static_cast<int>(cfg.island_sizes.size());
    for (int i = 0; i < n; ++i) {
        for (int j : topo.successors[static_cast<std::size_t>(i)]) {
            if (j == i) return "topology has a self edge";
            if (j < 0 || j >= n) return "topology references a missing island";
        }
    }
    return "";
}

const char* event_kind_name(EventKind kind) {
    switch (kind) {
        case EventKind::Bred: return "bred";
        case EventKind::Received: return "received";
        case EventKind::Emigrated: return "emigrated";
        case EventKind::Immigrated: return "immigrated";
        case EventKind::Deactivated: return "deactivated";
    }
    return "?";
}

bool better_individual(const Individual& a, const Individual& b) {
    if (a.loss_value() != b.loss_value()) return a.loss_value() < b.loss_value();
    return a.origin < b.origin;
}

IslandWorker::IslandWorker(const SearchSpace& space, Objective objective,
                           const PropagatorConfig& prop_config,
                           const IslandConfig& island_config, Endpoint& endpoint,
                           DelaySchedule eval_delay)
    : space_(space),
      objective_(std::move(objective)),
      prop_config_(prop_config),
      cfg_(island_config),
      ep_(endpoint),
      eval_delay_(std::move(eval_delay)),
      propagator_(make_default_pipeline(prop_config, space)),
      ledger_(endpoint.self().island, endpoint.self().rank),
      breed_rng_(RandomSource::for_worker(cfg_.seed, endpoint.self().global_id,
                                          RngStream::Breeding)),
      exchange_rng_(RandomSource::for_worker(cfg_.seed, endpoint.self().global_id,
                                             RngStream::Exchange)),
      eval_rng_(RandomSource::for_worker(cfg_.seed, endpoint.self().global_id,
                                         RngStream::Evaluation)) {
    const WorkerAddress& me = ep_.self();
    for (const WorkerAddress& w : ep_.layout().workers_of_island(me.island)) {
        if (w.global_id != me.global_id) island_peers_.push_back(w);
    }
    successor_islands_ =
        cfg_.effective_topology().successors[static_cast<std::size_t>(me.island)];
}

void IslandWorker::post_to(const WorkerAddress& dest, Envelope env) {
    ep_.post(dest, std::move(env));
    ++posts_this_round_;
}

void IslandWorker::log(EventKind kind, const Identity& id, double loss, int other_island,
                       int other_rank) {
    events_.push_back({ep_.now(), kind, id, loss, other_island, other_rank});
}

WorkerReport IslandWorker::run() {
    for (generation_ = 0; generation_ < cfg_.generations; ++generation_) step();
    finalize();
    return make_report();
}

// One generation, in protocol order: breed, intra-island sync, probabilistic
// exchange, immigration, deactivation notices, cache retry.
void IslandWorker::step() {
    breed_and_evaluate();
    drain_intra_island();
    if (exchange_rng_.chance(cfg_.exchange_probability)) emigrate();
    receive_immigrants();
    process_deactivation_notices();
    ledger_.flush_cache();
}

void IslandWorker::breed_and_evaluate() {
    const std::vector<const Individual*> view = ledger_.active_view();
    std::vector<Individual> bred = propagator_->apply(view, breed_rng_);
    Individual child = std::move(bred.at(0));
    const WorkerAddress& me = ep_.self();
    child.origin = {me.island, me.rank, generation_};
    child.active = true;

    double loss;
    try {
        loss = objective_(child.genes, eval_rng_);
    } catch (...) {
        loss = std::numeric_limits<double>::infinity();
    }
    if (std::isnan(loss)) loss = std::numeric_limits<double>::infinity();
    child.loss = loss;

    const double cost =
        eval_delay_ ? eval_delay_(me.global_id, generation_) : (ep_.is_virtual() ? 1.0 : 0.0);
    if (cost > 0.0 || ep_.is_virtual()) ep_.advance(cost);

    log(EventKind::Bred, child.origin, loss);
    ledger_.record(child);
    for (const WorkerAddress& peer : island_peers_) {
        post_to(peer, Envelope{Channel::IntraIsland, me, child, false, -1});
    }
}

std::size_t IslandWorker::drain_intra_island() {
    std::size_t count = 0;
    for (Envelope& env : ep_.poll(Channel::IntraIsland)) {
        const RecordOutcome outcome = ledger_.record(std::move(env.payload));
        const Individual* rec = ledger_.records().empty() ? nullptr : &ledger_.records().back();
        log(EventKind::Received, rec->origin, rec->loss_value(), env.sender.island,
            env.sender.rank);
        if (outcome == RecordOutcome::RecordedInactive) {
            log(EventKind::Deactivated, rec->origin, rec->loss_value());
        }
        ++count;
    }
    return count;
}

std::vector<const Individual*> IslandWorker::pick_emigrants(
    std::vector<const Individual*> candidates, std::size_t k) {
    if (cfg_.emigration_policy == EmigrationPolicy::Best) {
        return select_best(candidates, k);
    }
    return select_uniform(candidates, k, exchange_rng_);
}

void IslandWorker::emigrate() {
    if (successor_islands_.empty()) return;
    const WorkerAddress& me = ep_.self();

    if (cfg_.exchange_mode == ExchangeMode::Migration) {
        // Disjoint eligibility across workers: only individuals this worker
        // itself bred and that are still active may emigrate.
        std::vector<const Individual*> eligible;
        for (const Individual& rec : ledger_.records()) {
            if (rec.active && rec.origin.island == me.island && rec.origin.rank == me.rank) {
                eligible.push_back(&rec);
            }
        }
        if (eligible.empty()) return;  // nothing eligible this step
        const std::size_t k =
            std::min<std::size_t>(static_cast<std::size_t>(cfg_.n_migrants), eligible.size());
        std::vector<Individual> emigrants;
        for (const Individual* p : pick_emigrants(std::move(eligible), k)) {
            emigrants.push_back(*p);
        }
        for (const Individual& emigrant : emigrants) {
            // one target island per emigrant keeps it active on one island only
            const int target = successor_islands_[exchange_rng_.uniform_index(
                successor_islands_.size())];
            for (const WorkerAddress& w : ep_.layout().workers_of_island(target)) {
                post_to(w, Envelope{Channel::Emigrant, me, emigrant, false, -1});
            }
            log(EventKind::Emigrated, emigrant.origin, emigrant.loss_value(), target);
        }
        for (const Individual& emigrant : emigrants) {
            Individual notice;
            notice.origin = emigrant.origin;
            for (const WorkerAddress& peer : island_peers_) {
                post_to(peer, Envelope{Channel::Deactivate, me, notice, false, -1});
            }
            if (ledger_.deactivate(emigrant.origin) == DeactivateOutcome::Deactivated) {
                log(EventKind::Deactivated, emigrant.origin, emigrant.loss_value());
            }
        }
        return;
    }

    // Pollination: copies of any active individuals; the source keeps them.
    const std::vector<const Individual*> view = ledger_.active_view();
    if (view.empty()) return;
    const std::size_t k =
        std::min<std::size_t>(static_cast<std::size_t>(cfg_.n_migrants), view.size());
    std::vector<Individual> pollinators;
    for (const Individual* p : pick_emigrants(view, k)) pollinators.push_back(*p);
    for (const Individual& pollinator : pollinators) {
        for (int target : successor_islands_) {
            // The coordinator that will pick the replacement victim is a
            // stable function of the pollinator's identity, so repeated
            // copies of one individual can never trigger two replacements.
            const int coordinator = static_cast<int>(
                identity_hash(pollinator.origin) %
                static_cast<std::uint64_t>(ep_.layout().island_size(target)));
            for (const WorkerAddress& w : ep_.layout().workers_of_island(target)) {
                post_to(w, Envelope{Channel::Emigrant, me, pollinator, true, coordinator});
            }
            log(EventKind::Emigrated, pollinator.origin, pollinator.loss_value(), target);
        }
    }
}

void IslandWorker::choose_victim(const std::set<Identity>& batch, const Identity& inserted) {
    std::vector<const Individual*> candidates;
    for (const Individual* p : ledger_.active_view()) {
        if (!batch.count(p->origin)) candidates.push_back(p);
    }
    if (candidates.empty()) {
        // flooded first generations: fall back to earlier arrivals of the
        // same batch rather than leaving the insertion unmatched
        for (const Individual* p : ledger_.active_view()) {
            if (!(p->origin == inserted)) candidates.push_back(p);
        }
    }
    if (candidates.empty()) return;  // repaired at final reconciliation

    const Individual* victim =
        cfg_.immigration_policy == ImmigrationPolicy::Worst
            ? select_worst(candidates, 1)[0]
            : select_uniform(candidates, 1, exchange_rng_)[0];
    const Identity victim_id = victim->origin;
    const double victim_loss = victim->loss_value();
    Individual notice;
    notice.origin = victim_id;
    const WorkerAddress& me = ep_.self();
    for (const WorkerAddress& peer : island_peers_) {
        post_to(peer, Envelope{Channel::Deactivate, me, notice, true, -1});
    }
    if (ledger_.deactivate(victim_id) == DeactivateOutcome::Deactivated) {
        log(EventKind::Deactivated, victim_id, victim_loss);
    }
}

std::size_t IslandWorker::receive_immigrants() {
    std::vector<Envelope> batch = ep_.poll(Channel::Emigrant);
    if (batch.empty()) return 0;
    std::set<Identity> batch_ids;
    for (const Envelope& env : batch) batch_ids.insert(env.payload.origin);

    std::size_t count = 0;
    const WorkerAddress& me = ep_.self();
    for (Envelope& env : batch) {
        const Identity id = env.payload.origin;
        const double loss = env.payload.loss.value_or(
            std::numeric_limits<double>::quiet_NaN());
        if (cfg_.exchange_mode == ExchangeMode::Migration) {
            // every migrated identity arrives exactly once; a duplicate is a
            // transport bug and aborts the run
            ledger_.record(std::move(env.payload));
            log(EventKind::Immigrated, id, loss, env.sender.island, env.sender.rank);
            ++count;
            continue;
        }
        const RecordOutcome outcome = ledger_.record_or_ignore(std::move(env.payload));
        if (outcome == RecordOutcome::Ignored) continue;  // repeated pollination copy
        log(EventKind::Immigrated, id, loss, env.sender.island, env.sender.rank);
        ++count;
        if (outcome == RecordOutcome::RecordedInactive) {
            // condemned while in flight; its replacement duty was already
            // consumed by the insertion that condemned it
            log(EventKind::Deactivated, id, loss);
            continue;
        }
        if (env.coordinator_rank == me.rank) choose_victim(batch_ids, id);
    }
    return count;
}

std::size_t IslandWorker::process_deactivation_notices() {
    std::size_t count = 0;
    for (const Envelope& env : ep_.poll(Channel::Deactivate)) {
        const Identity id = env.payload.origin;
        const DeactivateOutcome outcome = ledger_.deactivate(id);
        if (outcome == DeactivateOutcome::Deactivated) {
            const Individual* rec = ledger_.find(id);
            log(EventKind::Deactivated, id,
                rec ? rec->loss_value() : std::numeric_limits<double>::quiet_NaN());
        }
        ++count;
    }
    return count;
}

// Drains every channel in barrier-delimited rounds until a full round passes
// with no worker receiving or sending anything, then reconciles.
void IslandWorker::finalize() {
    bool quiet = false;
    std::size_t rounds = 0;
    while (true) {
        const bool all_quiet = ep_.barrier(quiet);
        if (all_quiet) break;
        posts_this_round_ = 0;
        std::size_t received = 0;
        received += drain_intra_island();
        received += receive_immigrants();
        received += process_deactivation_notices();
        ledger_.flush_cache();
        quiet = received == 0 && posts_this_round_ == 0;
        if (++rounds > 100000) {
            throw ProtocolError("final synchronization did not quiesce");
        }
    }
    if (!ledger_.replaced_cache().empty()) {
        throw ResidualCache("replaced cache still holds " +
                            std::to_string(ledger_.replaced_cache().size()) +
                            " condemnations after final synchronization");
    }
    if (cfg_.exchange_mode == ExchangeMode::Pollination) reconcile_pollination_balance();
}

// After convergence every worker of an island holds the same records, so the
// surplus left by concurrent replacements that picked the same victim can be
// repaired identically everywhere without further messages.
void IslandWorker::reconcile_pollination_balance() {
    const WorkerAddress& me = ep_.self();
    std::size_t evaluated_here = 0;
    for (const Individual& rec : ledger_.records()) {
        if (rec.origin.island == me.island) ++evaluated_here;
    }
    if (ledger_.active_count() < evaluated_here) {
        throw ProtocolError("pollination balance deficit: more replacements than insertions");
    }
    std::size_t surplus = ledger_.active_count() - evaluated_here;
    while (surplus > 0) {
        const Individual* victim = nullptr;
        for (const Individual* p : ledger_.active_view()) {
            if (!victim || p->loss_value() > victim->loss_value() ||
                (p->loss_value() == victim->loss_value() && victim->origin < p->origin)) {
                victim = p;
            }
        }
        if (!victim) throw ProtocolError("pollination reconciliation ran out of candidates");
        ledger_.deactivate(victim->origin);
        log(EventKind::Deactivated, victim->origin, victim->loss_value());
        --surplus;
    }
}

WorkerReport IslandWorker::make_report() {
    WorkerReport report;
    report.address = ep_.self();
    report.events = std::move(events_);
    report.finish_time = ep_.now();
    report.deferrals = ledger_.deferrals_seen();
    report.ledger = std::move(ledger_);
    return report;
}

WorkerReport run_worker(const SearchSpace& space, const Objective& objective,
                        const PropagatorConfig& prop_config, const IslandConfig& island_config,
                        Endpoint& endpoint, DelaySchedule eval_delay) {
    const std::string space_err = [&] {
        const auto issues = validate_space(space);
        return issues.empty() ? std::string{} : issues.front().describe();
    }();
    if (!space_err.empty()) throw ConfigError(space_err);
    const std::string prop_err = validate_propagator_config(prop_config);
    if (!prop_err.empty()) throw ConfigError(prop_err);
    const std::string isl_err = validate_island_config(island_config);
    if (!isl_err.empty()) throw ConfigError(isl_err);

    IslandWorker worker(space, objective, prop_config, island_config, endpoint,
                        std::move(eval_delay));
    return worker.run();
}

RunResult run_inprocess(const SearchSpace& space, const Objective& objective,
                        const PropagatorConfig& prop_config, const IslandConfig& island_config,
                        const InProcessNet::Options& net_options, DelaySchedule eval_delay) {
    const std::string isl_err = validate_island_config(island_config);
    if (!isl_err.empty()) throw ConfigError(isl_err);

    InProcessNet net(island_config.layout(), net_options);
    const int total = net.layout().total_workers();
    std::vector<std::unique_ptr<Endpoint>> endpoints;
    endpoints.reserve(static_cast<std::size_t>(total));
    for (int gid = 0; gid < total; ++gid) endpoints.push_back(net.endpoint(gid));

    std::vector<WorkerReport> reports(static_cast<std::size_t>(total));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(total));
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(total));
    for (int gid = 0; gid < total; ++gid) {
        threads.emplace_back([&, gid] {
            try {
                reports[static_cast<std::size_t>(gid)] =
                    run_worker(space, objective, prop_config, island_config,
                               *endpoints[static_cast<std::size_t>(gid)], eval_delay);
            } catch (...) {
                errors[static_cast<std::size_t>(gid)] = std::current_exception();
            }
            try {
                endpoints[static_cast<std::size_t>(gid)]->close();
            } catch (...) {
            }
        });
    }
    for (std::thread& t : threads) t.join();
    for (const std::exception_ptr& err : errors) {
        if (err) std::rethrow_exception(err);
    }
    return merge_reports(std::move(reports), island_config.report_top_n);
}

RunResult merge_reports(std::vector<WorkerReport> reports, int top_n) {
    RunResult result;
    std::map<Identity, Individual> seen;
    for (const WorkerReport& r : reports) {
        for (const Individual& rec : r.ledger.records()) {
            seen.emplace(rec.origin, rec);
        }
        result.makespan = std::max(result.makespan, r.finish_time);
    }
    result.distinct_evaluated = seen.size();
    std::vector<Individual> all;
    all.reserve(seen.size());
    for (auto& [id, ind] : seen) all.push_back(std::move(ind));
    std::sort(all.begin(), all.end(), better_individual);
    const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(top_n), all.size());
    result.top_n.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n));
    result.workers = std::move(reports);
    return result;
}

}  // namespace propulsion
