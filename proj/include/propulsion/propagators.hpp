#ifndef PROPULSION_PROPAGATORS_HPP
#define PROPULSION_PROPAGATORS_HPP

#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "propulsion/rng.hpp"
#include "propulsion/search_space.hpp"

namespace propulsion {

using PopulationView = std::span<const Individual* const>;

struct InsufficientPopulation : std::runtime_error {
    InsufficientPopulation(std::size_t have, std::size_t need)
        : std::runtime_error("selection needs " + std::to_string(need) +
                             " individuals, population has " + std::to_string(have)) {}
};

struct SpaceMismatch : std::runtime_error {
    SpaceMismatch() : std::runtime_error("parents do not share a gene layout") {}
};

struct PropagatorConfig {
    std::size_t pool_size = 20;
    double crossover_probability = 0.7;
    double point_mutation_probability = 0.4;
    double sigma_factor = 0.05;
    double random_init_probability = 0.2;
};

// Returns a human-readable complaint for the first invalid field, or empty.
std::string validate_propagator_config(const PropagatorConfig& cfg);

// A breeding rule: maps a list of individuals to a new list. Rules are
// immutable and hold no state between invocations; all randomness comes from
// the caller's RandomSource.
class Propagator {
public:
    virtual ~Propagator() = default;
    virtual std::vector<Individual> apply(PopulationView in, RandomSource& rng) const = 0;
};

inline std::vector<const Individual*> make_view(const std::vector<Individual>& pop) {
    std::vector<const Individual*> v;
    v.reserve(pop.size());
    for (const Individual& ind : pop) v.push_back(&ind);
    return v;
}

// The k individuals with lowest loss; ties keep append order (earlier wins).
std::vector<const Individual*> select_best(PopulationView pop, std::size_t k);
// The k individuals with highest loss; ties keep append order.
std::vector<const Individual*> select_worst(PopulationView pop, std::size_t k);
// k distinct individuals drawn uniformly without replacement.
std::vector<const Individual*> select_uniform(PopulationView pop, std::size_t k,
                                              RandomSource& rng);

// Child starts as a copy of a; per gene, with the given probability the
// value is taken from b instead.
GeneVector uniform_crossover(const Individual& a, const Individual& b, double probability,
                             RandomSource& rng);

// Per gene, with the given probability the value is resampled uniformly
// within its spec.
GeneVector point_mutation(GeneVector genes, double probability, const SearchSpace& space,
                          RandomSource& rng);

// Every continuous gene is perturbed by a Gaussian with standard deviation
// sigma_factor * (upper - lower), then clamped to its limits. Integer and
// categorical genes pass through.
GeneVector interval_mutation(GeneVector genes, double sigma_factor, const SearchSpace& space,
                             RandomSource& rng);

class SelectBest final : public Propagator {
public:
    explicit SelectBest(std::size_t k) : k_(k) {}
    std::vector<Individual> apply(PopulationView in, RandomSource&) const override;

private:
    std::size_t k_;
};

class SelectWorst final : public Propagator {
public:
    explicit SelectWorst(std::size_t k) : k_(k) {}
    std::vector<Individual> apply(PopulationView in, RandomSource&) const override;

private:
    std::size_t k_;
};

class SelectUniform final : public Propagator {
public:
    explicit SelectUniform(std::size_t k) : k_(k) {}
    std::vector<Individual> apply(PopulationView in, RandomSource& rng) const override;

private:
    std::size_t k_;
};

// Fresh random individual regardless of input.
class RandomInit final : public Propagator {
public:
    explicit RandomInit(SearchSpace space) : space_(std::move(space)) {}
    std::vector<Individual> apply(PopulationView, RandomSource& rng) const override;

private:
    SearchSpace space_;
};

// Applies each sub-rule independently with its probability, in list order,
// threading the intermediate individuals.
class Stochastic final : public Propagator {
public:
    struct Rule {
        std::shared_ptr<const Propagator> rule;
        double probability;
    };
    explicit Stochastic(std::vector<Rule> rules) : rules_(std::move(rules)) {}
    std::vector<Individual> apply(PopulationView in, RandomSource& rng) const override;

private:
    std::vector<Rule> rules_;
};

// then_rule when the input population has at least `threshold` individuals,
// else_rule otherwise. Canonical use: random-initialize until the population
// can support selection.
class Conditional final : public Propagator {
public:
    Conditional(std::size_t threshold, std::shared_ptr<const Propagator> then_rule,
                std::shared_ptr<const Propagator> else_rule)
        : threshold_(threshold), then_(std::move(then_rule)), else_(std::move(else_rule)) {}
    std::vector<Individual> apply(PopulationView in, RandomSource& rng) const override;

private:
    std::size_t threshold_;
    std::shared_ptr<const Propagator> then_;
    std::shared_ptr<const Propagator> else_;
};

// The shipped default breeding rule. Per invocation: with probability
// random_init_probability emit a fresh random individual; otherwise take the
// pool_size fittest as breeding pool, draw two distinct parents uniformly,
// apply uniform crossover and point mutation with their probabilities, then
// always apply interval mutation.
class DefaultPropagator final : public Propagator {
public:
    DefaultPropagator(PropagatorConfig config, SearchSpace space)
        : config_(config), space_(std::move(space)) {}
    std::vector<Individual> apply(PopulationView in, RandomSource& rng) const override;

    const PropagatorConfig& config() const { return config_; }

private:
    PropagatorConfig config_;
    SearchSpace space_;
};

// Default propagator guarded so sparse populations fall back to random
// initialization until selection becomes possible.
std::shared_ptr<const Propagator> make_default_pipeline(const PropagatorConfig& config,
                                                        const SearchSpace& space);

}  // namespace propulsion

#endif
