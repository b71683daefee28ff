#ifndef PROPULSION_SEARCH_SPACE_HPP
#define PROPULSION_SEARCH_SPACE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "propulsion/rng.hpp"

namespace propulsion {

enum class GeneKind { Continuous, Integer, Categorical };

// One named optimization parameter. Continuous/integer genes carry limits,
// categorical genes carry an ordered symbol list.
struct GeneSpec {
    std::string name;
    GeneKind kind = GeneKind::Continuous;
    double lower = 0.0;
    double upper = 0.0;
    std::vector<std::string> categories;

    static GeneSpec continuous(std::string name, double lower, double upper) {
        return {std::move(name), GeneKind::Continuous, lower, upper, {}};
    }
    static GeneSpec integer(std::string name, std::int64_t lower, std::int64_t upper) {
        return {std::move(name), GeneKind::Integer, static_cast<double>(lower),
                static_cast<double>(upper), {}};
    }
    static GeneSpec categorical(std::string name, std::vector<std::string> categories) {
        return {std::move(name), GeneKind::Categorical, 0.0, 0.0, std::move(categories)};
    }
};

// Gene values are doubles for continuous genes and 64-bit integers for
// integer genes and categorical indices; the GeneSpec kind disambiguates.
using GeneValue = std::variant<double, std::int64_t>;
using GeneVector = std::vector<GeneValue>;

inline double as_double(const GeneValue& v) {
    if (const double* d = std::get_if<double>(&v)) return *d;
    return static_cast<double>(std::get<std::int64_t>(v));
}

// Globally unique provenance of an individual: each worker breeds exactly one
// individual per generation, so this triple never collides.
struct Identity {
    int island = -1;
    int rank = -1;
    int generation = -1;

    friend bool operator==(const Identity&, const Identity&) = default;
    friend auto operator<=>(const Identity&, const Identity&) = default;
};

inline std::uint64_t identity_hash(const Identity& id) {
    std::uint64_t s = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(id.island)) << 40) ^
                      (static_cast<std::uint64_t>(static_cast<std::uint32_t>(id.rank)) << 20) ^
                      static_cast<std::uint64_t>(static_cast<std::uint32_t>(id.generation));
    return splitmix64(s);
}

struct Individual {
    GeneVector genes;
    std::optional<double> loss;  // set exactly once, at evaluation
    Identity origin;
    bool active = true;
    int resident_island = -1;

    bool evaluated() const { return loss.has_value(); }
    double loss_value() const { return *loss; }
};

// Ordered list of gene specs; the order defines gene positions for
// crossover, mutation and every serialization.
struct SearchSpace {
    std::vector<GeneSpec> genes;

    std::size_t dimension() const { return genes.size(); }
};

struct SpaceIssue {
    enum Kind { EmptySpace, BadLimits, DuplicateName } kind;
    std::string gene_name;

    std::string describe() const;
};

// Returns every invariant violation; an empty list means the space is valid.
std::vector<SpaceIssue> validate_space(const SearchSpace& space);

bool space_valid(const SearchSpace& space);

// Uniform sample of a fresh unevaluated individual. Identity fields stay
// unset; the engine assigns them at breeding time.
Individual sample_random(const SearchSpace& space, RandomSource& rng);

// True iff every gene value has the kind and range its spec demands.
bool genes_within(const SearchSpace& space, const GeneVector& genes);

// Builds a uniform search space of `dim` continuous genes x1..xdim in
// [-limit, limit], the shape used by the benchmark objectives.
SearchSpace symmetric_continuous_space(std::size_t dim, double limit);

}  // namespace propulsion

#endif
