#include "propulsion/propagators.hpp"

#include <algorithm>
#include <numeric>

namespace propulsion {

std::string validate_propagator_config(const PropagatorConfig& cfg) {
    auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (cfg.pool_size < 2) return "pool_size must be at least 2";
    if (!prob_ok(cfg.crossover_probability)) return "crossover_probability must be in [0,1]";
    if (!prob_ok(cfg.point_mutation_probability))
        return "point_mutation_probability must be in [0,1]";
    if (!prob_ok(cfg.random_init_probability)) return "random_init_probability must be in [0,1]";
    if (!(cfg.sigma_factor > 0.0)) return "sigma_factor must be positive";
    return "";
}

namespace {

std::vector<const Individual*> select_sorted(PopulationView pop, std::size_t k, bool lowest) {
    if (pop.size() < k) throw InsufficientPopulation(pop.size(), k);
    std::vector<std::size_t> order(pop.size());
    std::iota(order.begin(), order.end(), 0);
    // the index tiebreak keeps append order on equal losses
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k),
                      order.end(), [&](std::size_t a, std::size_t b) {
                          const double la = pop[a]->loss_value();
                          const double lb = pop[b]->loss_value();
                          if (la != lb) return lowest ? la < lb : la > lb;
                          return a < b;
                      });
    std::vector<const Individual*> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back(pop[order[i]]);
    return out;
}

Individual unevaluated_child(GeneVector genes) {
    Individual child;
    child.genes = std::move(genes);
    return child;
}

}  // namespace

std::vector<const Individual*> select_best(PopulationView pop, std::size_t k) {
    return select_sorted(pop, k, true);
}

std::vector<const Individual*> select_worst(PopulationView pop, std::size_t k) {
    return select_sorted(pop, k, false);
}

std::vector<const Individual*> select_uniform(PopulationView pop, std::size_t k,
                                              RandomSource& rng) {
    if (pop.size() < k) throw InsufficientPopulation(pop.size(), k);
    std::vector<std::size_t> order(pop.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<const Individual*> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + rng.uniform_index(order.size() - i);
        std::swap(order[i], order[j]);
        out.push_back(pop[order[i]]);
    }
    return out;
}

GeneVector uniform_crossover(const Individual& a, const Individual& b, double probability,
                             RandomSource& rng) {
    if (a.genes.size() != b.genes.size()) throw SpaceMismatch();
    GeneVector child = a.genes;
    for (std::size_t i = 0; i < child.size(); ++i) {
        if (a.genes[i].index() != b.genes[i].index()) throw SpaceMismatch();
        if (rng.uniform01() < probability) child[i] = b.genes[i];
    }
    return child;
}

GeneVector point_mutation(GeneVector genes, double probability, const SearchSpace& space,
                          RandomSource& rng) {
    for (std::size_t i = 0; i < genes.size(); ++i) {
        if (rng.uniform01() >= probability) continue;
        const GeneSpec& g = space.genes[i];
        switch (g.kind) {
            case GeneKind::Continuous:
                genes[i] = rng.uniform(g.lower, g.upper);
                break;
            case GeneKind::Integer:
                genes[i] = rng.uniform_int(static_cast<std::int64_t>(g.lower),
                                           static_cast<std::int64_t>(g.upper));
                break;
            case GeneKind::Categorical:
                genes[i] = static_cast<std::int64_t>(rng.uniform_index(g.categories.size()));
                break;
        }
    }
    return genes;
}

GeneVector interval_mutation(GeneVector genes, double sigma_factor, const SearchSpace& space,
                             RandomSource& rng) {
    for (std::size_t i = 0; i < genes.size(); ++i) {
        const GeneSpec& g = space.genes[i];
        if (g.kind != GeneKind::Continuous) continue;
        const double sigma = sigma_factor * (g.upper - g.lower);
        const double perturbed = as_double(genes[i]) + rng.normal(0.0, sigma);
        genes[i] = std::clamp(perturbed, g.lower, g.upper);
    }
    return genes;
}

std::vector<Individual> SelectBest::apply(PopulationView in, RandomSource&) const {
    std::vector<Individual> out;
    for (const Individual* p : select_best(in, k_)) out.push_back(*p);
    return out;
}

std::vector<Individual> SelectWorst::apply(PopulationView in, RandomSource&) const {
    std::vector<Individual> out;
    for (const Individual* p : select_worst(in, k_)) out.push_back(*p);
    return out;
}

std::vector<Individual> SelectUniform::apply(PopulationView in, RandomSource& rng) const {
    std::vector<Individual> out;
    for (const Individual* p : select_uniform(in, k_, rng)) out.push_back(*p);
    return out;
}

std::vector<Individual> RandomInit::apply(PopulationView, RandomSource& rng) const {
    std::vector<Individual> out;
    out.push_back(sample_random(space_, rng));
    return out;
}

std::vector<Individual> Stochastic::apply(PopulationView in, RandomSource& rng) const {
    std::vector<Individual> current(in.size());
    std::transform(in.begin(), in.end(), current.begin(),
                   [](const Individual* p) { return *p; });
    for (const Rule& r : rules_) {
        const bool fire = rng.uniform01() < r.probability;
        if (!fire) continue;
        const std::vector<const Individual*> view = make_view(current);
        current = r.rule->apply(view, rng);
    }
    return current;
}

std::vector<Individual> Conditional::apply(PopulationView in, RandomSource& rng) const {
    return in.size() >= threshold_ ? then_->apply(in, rng) : else_->apply(in, rng);
}

std::vector<Individual> DefaultPropagator::apply(PopulationView in, RandomSource& rng) const {
    if (rng.uniform01() < config_.random_init_probability) {
        std::vector<Individual> out;
        out.push_back(sample_random(space_, rng));
        return out;
    }
    const std::vector<const Individual*> pool = select_best(in, config_.pool_size);
    const std::vector<const Individual*> parents = select_uniform(pool, 2, rng);
    GeneVector genes =
        uniform_crossover(*parents[0], *parents[1], config_.crossover_probability, rng);
    genes = point_mutation(std::move(genes), config_.point_mutation_probability, space_, rng);
    genes = interval_mutation(std::move(genes), config_.sigma_factor, space_, rng);
    std::vector<Individual> out;
    out.push_back(unevaluated_child(std::move(genes)));
    return out;
}

std::shared_ptr<const Propagator> make_default_pipeline(const PropagatorConfig& config,
                                                        const SearchSpace& space) {
    return std::make_shared<Conditional>(config.pool_size,
                                         std::make_shared<DefaultPropagator>(config, space),
                                         std::make_shared<RandomInit>(space));
}

}  // namespace propulsion
