#include "propulsion/benchmarks.hpp"

#include <cmath>
#include <map>

namespace propulsion {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double sphere(std::span<const double> x) { return x[0] * x[0] + x[1] * x[1]; }

double rosenbrock(std::span<const double> x) {
    const double a = x[0] * x[0] - x[1];
    const double b = 1.0 - x[0];
    return 100.0 * a * a + b * b;
}

// int() truncates toward zero; that is the only reading under which the
// stated minimum of -25 holds on the +-5.12 domain.
double step(std::span<const double> x) {
    double sum = 0.0;
    for (double v : x) sum += std::trunc(v);
    return sum;
}

double quartic(std::span<const double> x, RandomSource& rng) {
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi2 = x[i] * x[i];
        sum += static_cast<double>(i + 1) * xi2 * xi2 + rng.normal(0.0, 1.0);
    }
    return sum;
}

double rastrigin(std::span<const double> x) {
    double sum = 10.0 * static_cast<double>(x.size());
    for (double v : x) sum += v * v - 10.0 * std::cos(kTwoPi * v);
    return sum;
}

double griewank(std::span<const double> x) {
    double sum = 0.0;
    double prod = 1.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sum += x[i] * x[i];
        prod *= std::cos(x[i] / std::sqrt(static_cast<double>(i + 1)));
    }
    return 1.0 + sum / 4000.0 - prod;
}

constexpr double kSchwefelV = 418.982887;

double schwefel(std::span<const double> x) {
    double sum = 0.0;
    for (double v : x) sum += v * std::sin(std::sqrt(std::fabs(v)));
    return 10.0 * kSchwefelV - sum;
}

// Double-funnel constants, computed rather than hard-coded decimals.
struct BiSphereConstants {
    double mu1;
    double mu2;
    double s;
    BiSphereConstants() {
        mu1 = 2.5;
        s = 1.0 - std::pow(2.0 * std::sqrt(50.0) - 8.2, -0.5);
        mu2 = -std::sqrt((mu1 * mu1 - 1.0) / s);
    }
};

const BiSphereConstants& bi_constants() {
    static const BiSphereConstants c;
    return c;
}

double bisphere(std::span<const double> x) {
    const BiSphereConstants& c = bi_constants();
    double d1 = 0.0;
    double d2 = 0.0;
    for (double v : x) {
        d1 += (v - c.mu1) * (v - c.mu1);
        d2 += (v - c.mu2) * (v - c.mu2);
    }
    return std::min(d1, static_cast<double>(x.size()) + c.s * d2);
}

double birastrigin(std::span<const double> x) {
    const BiSphereConstants& c = bi_constants();
    double mod = 0.0;
    for (double v : x) mod += 1.0 - std::cos(kTwoPi * (v - c.mu1));
    return bisphere(x) + 10.0 * mod;
}

std::map<std::string, BenchmarkSpec> build_specs() {
    const BiSphereConstants& c = bi_constants();
    std::map<std::string, BenchmarkSpec> specs;
    auto add = [&specs](std::string name, std::size_t dim, double limit, double opt_value,
                        double opt_coord) {
        specs[name] = {name, dim, limit, opt_value, std::vector<double>(dim, opt_coord)};
    };
    add("sphere", 2, 5.12, 0.0, 0.0);
    add("rosenbrock", 2, 2.048, 0.0, 1.0);
    add("step", 5, 5.12, -25.0, -5.12);
    add("quartic", 30, 1.28, 0.0, 0.0);
    add("rastrigin", 20, 5.12, 0.0, 0.0);
    add("griewank", 10, 600.0, 0.0, 0.0);
    add("schwefel", 10, 500.0, 0.0, 420.968746);
    add("bisphere", 30, 5.12, 0.0, c.mu1);
    add("birastrigin", 30, 5.12, 0.0, c.mu1);
    return specs;
}

const std::map<std::string, BenchmarkSpec>& specs() {
    static const std::map<std::string, BenchmarkSpec> s = build_specs();
    return s;
}

}  // namespace

const std::vector<std::string>& benchmark_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (const auto& [name, spec] : specs()) n.push_back(name);
        return n;
    }();
    return names;
}

bool is_benchmark(const std::string& name) { return specs().count(name) != 0; }

BenchmarkSpec benchmark_spec(const std::string& name) {
    auto it = specs().find(name);
    if (it == specs().end()) throw UnknownBenchmark(name);
    return it->second;
}

double benchmark_evaluate(const std::string& name, std::span<const double> x,
                          RandomSource& rng) {
    const BenchmarkSpec spec = benchmark_spec(name);
    if (x.size() != spec.dimension) throw DimensionMismatch(x.size(), spec.dimension);
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] < -spec.limit || x[i] > spec.limit) throw OutOfBounds(i);
    }
    if (name == "sphere") return sphere(x);
    if (name == "rosenbrock") return rosenbrock(x);
    if (name == "step") return step(x);
    if (name == "quartic") return quartic(x, rng);
    if (name == "rastrigin") return rastrigin(x);
    if (name == "griewank") return griewank(x);
    if (name == "schwefel") return schwefel(x);
    if (name == "bisphere") return bisphere(x);
    if (name == "birastrigin") return birastrigin(x);
    throw UnknownBenchmark(name);
}

SearchSpace benchmark_space(const std::string& name) {
    const BenchmarkSpec spec = benchmark_spec(name);
    return symmetric_continuous_space(spec.dimension, spec.limit);
}

}  // namespace propulsion
