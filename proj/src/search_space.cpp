#include "propulsion/search_space.hpp"

#include <set>

namespace propulsion {

std::string SpaceIssue::describe() const {
    switch (kind) {
        case EmptySpace: return "EmptySpace: search space has no genes";
        case BadLimits: return "BadLimits(" + gene_name + ")";
        case DuplicateName: return "DuplicateName(" + gene_name + ")";
    }
    return "unknown";
}

std::vector<SpaceIssue> validate_space(const SearchSpace& space) {
    std::vector<SpaceIssue> issues;
    if (space.genes.empty()) {
        issues.push_back({SpaceIssue::EmptySpace, ""});
    }
    std::set<std::string> seen;
    for (const GeneSpec& g : space.genes) {
        if (!seen.insert(g.name).second) {
            issues.push_back({SpaceIssue::DuplicateName, g.name});
        }
        switch (g.kind) {
            case GeneKind::Continuous:
            case GeneKind::Integer:
                if (!(g.lower < g.upper)) {
                    issues.push_back({SpaceIssue::BadLimits, g.name});
                }
                break;
            case GeneKind::Categorical: {
                if (g.categories.empty()) {
                    issues.push_back({SpaceIssue::BadLimits, g.name});
                    break;
                }
                std::set<std::string> cats(g.categories.begin(), g.categories.end());
                if (cats.size() != g.categories.size()) {
                    issues.push_back({SpaceIssue::BadLimits, g.name});
                }
                break;
            }
        }
    }
    return issues;
}

bool space_valid(const SearchSpace& space) { return validate_space(space).empty(); }

Individual sample_random(const SearchSpace& space, RandomSource& rng) {
    Individual ind;
    ind.genes.reserve(space.genes.size());
    for (const GeneSpec& g : space.genes) {
        switch (g.kind) {
            case GeneKind::Continuous:
                ind.genes.emplace_back(rng.uniform(g.lower, g.upper));
                break;
            case GeneKind::Integer:
                ind.genes.emplace_back(rng.uniform_int(static_cast<std::int64_t>(g.lower),
                                                       static_cast<std::int64_t>(g.upper)));
                break;
            case GeneKind::Categorical:
                ind.genes.emplace_back(
                    static_cast<std::int64_t>(rng.uniform_index(g.categories.size())));
                break;
        }
    }
    return ind;
}

bool genes_within(const SearchSpace& space, const GeneVector& genes) {
    if (genes.size() != space.genes.size()) return false;
    for (std::size_t i = 0; i < genes.size(); ++i) {
        const GeneSpec& g = space.genes[i];
        switch (g.kind) {
            case GeneKind::Continuous: {
                const double* d = std::get_if<double>(&genes[i]);
                if (!d || *d < g.lower || *d > g.upper) return false;
                break;
            }
            case GeneKind::Integer: {
                const std::int64_t* v = std::get_if<std::int64_t>(&genes[i]);
                if (!v || *v < static_cast<std::int64_t>(g.lower) ||
                    *v > static_cast<std::int64_t>(g.upper))
                    return false;
                break;
            }
            case GeneKind::Categorical: {
                const std::int64_t* v = std::get_if<std::int64_t>(&genes[i]);
                if (!v || *v < 0 || static_cast<std::size_t>(*v) >= g.categories.size())
                    return false;
                break;
            }
        }
    }
    return true;
}

SearchSpace symmetric_continuous_space(std::size_t dim, double limit) {
    SearchSpace space;
    space.genes.reserve(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        space.genes.push_back(GeneSpec::continuous("x" + std::to_string(i + 1), -limit, limit));
    }
    return space;
}

}  // namespace propulsion
