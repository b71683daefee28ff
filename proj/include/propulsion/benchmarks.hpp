#ifndef PROPULSION_BENCHMARKS_HPP
#define PROPULSION_BENCHMARKS_HPP

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "propulsion/rng.hpp"
#include "propulsion/search_space.hpp"

namespace propulsion {

struct UnknownBenchmark : std::runtime_error {
    explicit UnknownBenchmark(const std::string& name)
        : std::runtime_error("unknown benchmark: " + name) {}
};

struct DimensionMismatch : std::runtime_error {
    DimensionMismatch(std::size_t got, std::size_t want)
        : std::runtime_error("benchmark input has dimension " + std::to_string(got) +
                             ", expected " + std::to_string(want)) {}
};

struct OutOfBounds : std::runtime_error {
    explicit OutOfBounds(std::size_t index)
        : std::runtime_error("benchmark input out of bounds at index " + std::to_string(index)) {}
};

// Fixed dimension, symmetric limit and known minimum of one named analytic
// objective. The engine guarantees in-bounds genes, so out-of-bounds input to
// evaluate() is treated as a bug, not clamped.
struct BenchmarkSpec {
    std::string name;
    std::size_t dimension;
    double limit;
    double optimum_value;
    std::vector<double> optimum_point;
};

const std::vector<std::string>& benchmark_names();
bool is_benchmark(const std::string& name);

BenchmarkSpec benchmark_spec(const std::string& name);

// Value of the named function at x. Only quartic consumes randomness: one
// fresh standard-normal draw per summand per evaluation, so it never returns
// the same value twice at the same point.
double benchmark_evaluate(const std::string& name, std::span<const double> x, RandomSource& rng);

SearchSpace benchmark_space(const std::string& name);

}  // namespace propulsion

#endif
