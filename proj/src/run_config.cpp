#include "propulsion/run_config.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <sstream>

#include "propulsion/benchmarks.hpp"
#include "propulsion/reporting.hpp"

namespace propulsion {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

double to_number(const std::string& key, const std::string& value) {
    try {
        return parse_double(value);
    } catch (...) {
        throw ConfigError("key '" + key + "' has a non-numeric value: " + value);
    }
}

int to_int(const std::string& key, const std::string& value) {
    const double d = to_number(key, value);
    const int i = static_cast<int>(d);
    if (static_cast<double>(i) != d) {
        throw ConfigError("key '" + key + "' must be an integer");
    }
    return i;
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("key '" + key + "' must be true or false");
}

}  // namespace

IslandConfig RunConfig::resolved_islands() const {
    IslandConfig cfg = islands;
    const int n = static_cast<int>(cfg.island_sizes.size());
    if (topology_kind == "fully_connected") {
        cfg.topology = Topology::fully_connected(n);
    } else if (topology_kind == "ring") {
        cfg.topology = Topology::ring(n);
    } else if (topology_kind == "edges") {
        cfg.topology = Topology::from_edges(n, edges);
    } else {
        throw ConfigError("key 'topology' must be fully_connected, ring or edges");
    }
    return cfg;
}

RunConfig parse_run_config(const std::string& text) {
    RunConfig cfg;
    cfg.islands.island_sizes = {4, 4};

    std::istringstream in(text);
    std::string line;
    GeneSpec* current_gene = nullptr;
    int islands_count = -1;
    int island_size = -1;
    std::vector<int> island_sizes;

    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t == "[gene]") {
            cfg.space.genes.emplace_back();
            current_gene = &cfg.space.genes.back();
            cfg.explicit_genes = true;
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("malformed line (expected key = value): " + t);
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw ConfigError("malformed line (empty key or value): " + t);
        }

        if (current_gene) {
            if (key == "name") {
                current_gene->name = value;
                continue;
            }
            if (key == "kind") {
                if (value == "continuous") current_gene->kind = GeneKind::Continuous;
                else if (value == "integer") current_gene->kind = GeneKind::Integer;
                else if (value == "categorical") current_gene->kind = GeneKind::Categorical;
                else throw ConfigError("gene 'kind' must be continuous, integer or categorical");
                continue;
            }
            if (key == "lower") {
                current_gene->lower = to_number(key, value);
                continue;
            }
            if (key == "upper") {
                current_gene->upper = to_number(key, value);
                continue;
            }
            if (key == "categories") {
                current_gene->categories = split_ws(value);
                continue;
            }
            // fall through: top-level key after a gene section
            current_gene = nullptr;
        }

        if (key == "objective") cfg.objective = value;
        else if (key == "objective_command") cfg.objective_command = value;
        else if (key == "seed") cfg.islands.seed = static_cast<std::uint64_t>(to_number(key, value));
        else if (key == "islands") islands_count = to_int(key, value);
        else if (key == "island_size") island_size = to_int(key, value);
        else if (key == "island_sizes") {
            island_sizes.clear();
            for (const std::string& tok : split_ws(value)) island_sizes.push_back(to_int(key, tok));
        }
        else if (key == "generations") cfg.islands.generations = to_int(key, value);
        else if (key == "exchange_mode") {
            if (value == "migration") cfg.islands.exchange_mode = ExchangeMode::Migration;
            else if (value == "pollination") cfg.islands.exchange_mode = ExchangeMode::Pollination;
            else throw ConfigError("key 'exchange_mode' must be migration or pollination");
        }
        else if (key == "exchange_probability")
            cfg.islands.exchange_probability = to_number(key, value);
        else if (key == "n_migrants") cfg.islands.n_migrants = to_int(key, value);
        else if (key == "topology") cfg.topology_kind = value;
        else if (key == "edges") {
            cfg.edges.clear();
            for (const std::string& tok : split_ws(value)) {
                const std::size_t gt = tok.find('>');
                if (gt == std::string::npos) {
                    throw ConfigError("key 'edges' entries must look like 0>1");
                }
                cfg.edges.emplace_back(to_int(key, tok.substr(0, gt)),
                                       to_int(key, tok.substr(gt + 1)));
            }
        }
        else if (key == "emigration_policy") {
            if (value == "best") cfg.islands.emigration_policy = EmigrationPolicy::Best;
            else if (value == "random") cfg.islands.emigration_policy = EmigrationPolicy::Random;
            else throw ConfigError("key 'emigration_policy' must be best or random");
        }
        else if (key == "immigration_policy") {
            if (value == "worst") cfg.islands.immigration_policy = ImmigrationPolicy::Worst;
            else if (value == "random") cfg.islands.immigration_policy = ImmigrationPolicy::Random;
            else throw ConfigError("key 'immigration_policy' must be worst or random");
        }
        else if (key == "report_top_n") cfg.islands.report_top_n = to_int(key, value);
        else if (key == "pool_size") cfg.propagator.pool_size = static_cast<std::size_t>(to_int(key, value));
        else if (key == "crossover_probability")
            cfg.propagator.crossover_probability = to_number(key, value);
        else if (key == "point_mutation_probability")
            cfg.propagator.point_mutation_probability = to_number(key, value);
        else if (key == "sigma_factor") cfg.propagator.sigma_factor = to_number(key, value);
        else if (key == "random_init_probability")
            cfg.propagator.random_init_probability = to_number(key, value);
        else if (key == "backend") cfg.backend = value;
        else if (key == "deterministic") cfg.deterministic = to_bool(key, value);
        else if (key == "rank_file") cfg.rank_file = value;
        else if (key == "out") cfg.out_dir = value;
        else if (key == "barrier_timeout") cfg.barrier_timeout = to_number(key, value);
        else throw ConfigError("unrecognized key '" + key + "'");
    }

    if (!island_sizes.empty()) {
        cfg.islands.island_sizes = island_sizes;
    } else {
        const int count = islands_count > 0 ? islands_count : 2;
        const int size = island_size > 0 ? island_size : 4;
        cfg.islands.island_sizes.assign(static_cast<std::size_t>(count), size);
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    return parse_run_config(read_text_file(path));
}

std::string serialize_run_config(const RunConfig& cfg) {
    std::string out;
    auto kv = [&out](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
    if (!cfg.objective.empty()) kv("objective", cfg.objective);
    if (!cfg.objective_command.empty()) kv("objective_command", cfg.objective_command);
    kv("seed", std::to_string(cfg.islands.seed));
    std::string sizes;
    for (int s : cfg.islands.island_sizes) sizes += (sizes.empty() ? "" : " ") + std::to_string(s);
    kv("island_sizes", sizes);
    kv("generations", std::to_string(cfg.islands.generations));
    kv("exchange_mode",
       cfg.islands.exchange_mode == ExchangeMode::Migration ? "migration" : "pollination");
    kv("exchange_probability", format_double(cfg.islands.exchange_probability));
    kv("n_migrants", std::to_string(cfg.islands.n_migrants));
    kv("topology", cfg.topology_kind);
    if (cfg.topology_kind == "edges") {
        std::string e;
        for (const auto& [from, to] : cfg.edges) {
            e += (e.empty() ? "" : " ") + std::to_string(from) + ">" + std::to_string(to);
        }
        kv("edges", e);
    }
    kv("emigration_policy",
       cfg.islands.emigration_policy == EmigrationPolicy::Best ? "best" : "random");
    kv("immigration_policy",
       cfg.islands.immigration_policy == ImmigrationPolicy::Worst ? "worst" : "random");
    kv("report_top_n", std::to_string(cfg.islands.report_top_n));
    kv("pool_size", std::to_string(cfg.propagator.pool_size));
    kv("crossover_probability", format_double(cfg.propagator.crossover_probability));
    kv("point_mutation_probability", format_double(cfg.propagator.point_mutation_probability));
    kv("sigma_factor", format_double(cfg.propagator.sigma_factor));
    kv("random_init_probability", format_double(cfg.propagator.random_init_probability));
    kv("backend", cfg.backend);
    kv("deterministic", cfg.deterministic ? "true" : "false");
    if (!cfg.rank_file.empty()) kv("rank_file", cfg.rank_file);
    kv("out", cfg.out_dir);
    kv("barrier_timeout", format_double(cfg.barrier_timeout));
    if (cfg.explicit_genes) {
        for (const GeneSpec& g : cfg.space.genes) {
            out += "\n[gene]\n";
            kv("name", g.name);
            switch (g.kind) {
                case GeneKind::Continuous:
                    kv("kind", "continuous");
                    kv("lower", format_double(g.lower));
                    kv("upper", format_double(g.upper));
                    break;
                case GeneKind::Integer:
                    kv("kind", "integer");
                    kv("lower", format_double(g.lower));
                    kv("upper", format_double(g.upper));
                    break;
                case GeneKind::Categorical: {
                    kv("kind", "categorical");
                    std::string cats;
                    for (const std::string& c : g.categories) {
                        cats += (cats.empty() ? "" : " ") + c;
                    }
                    kv("categories", cats);
                    break;
                }
            }
        }
    }
    return out;
}

SearchSpace effective_space(const RunConfig& cfg) {
    if (cfg.explicit_genes) return cfg.space;
    return benchmark_space(cfg.objective);
}

Objective make_objective(const RunConfig& cfg) {
    if (!cfg.objective.empty()) {
        const std::string name = cfg.objective;
        return [name](const GeneVector& genes, RandomSource& rng) {
            std::vector<double> x(genes.size());
            for (std::size_t i = 0; i < genes.size(); ++i) x[i] = as_double(genes[i]);
            return benchmark_evaluate(name, x, rng);
        };
    }
    const std::string command = cfg.objective_command;
    const SearchSpace space = effective_space(cfg);
    return [command, space](const GeneVector& genes, RandomSource&) {
        std::string cmd = command;
        for (std::size_t i = 0; i < genes.size(); ++i) {
            cmd += " " + space.genes[i].name + "=" + format_gene(genes[i], space.genes[i]);
        }
        cmd += " 2>/dev/null";
        FILE* pipe = ::popen(cmd.c_str(), "r");
        if (!pipe) return std::numeric_limits<double>::infinity();
        std::string output;
        char buf[256];
        while (std::fgets(buf, sizeof(buf), pipe)) output += buf;
        const int status = ::pclose(pipe);
        if (status != 0) return std::numeric_limits<double>::infinity();
        // loss is the last non-empty output line
        std::istringstream lines(output);
        std::string line, last;
        while (std::getline(lines, line)) {
            const std::string t = trim(line);
            if (!t.empty()) last = t;
        }
        try {
            return parse_double(last);
        } catch (...) {
            return std::numeric_limits<double>::infinity();
        }
    };
}

void validate_run_config(const RunConfig& cfg) {
    if (cfg.objective.empty() && cfg.objective_command.empty()) {
        throw ConfigError("key 'objective' (or 'objective_command') is required");
    }
    if (!cfg.objective.empty() && !cfg.objective_command.empty()) {
        throw ConfigError("keys 'objective' and 'objective_command' are mutually exclusive");
    }
    if (!cfg.objective.empty() && !is_benchmark(cfg.objective)) {
        throw ConfigError("key 'objective' names no known benchmark: " + cfg.objective);
    }
    if (!cfg.objective_command.empty() && !cfg.explicit_genes) {
        throw ConfigError("key 'objective_command' requires [gene] sections");
    }
    if (cfg.explicit_genes) {
        const auto issues = validate_space(cfg.space);
        if (!issues.empty()) {
            throw ConfigError("invalid search space: " + issues.front().describe());
        }
        for (const GeneSpec& g : cfg.space.genes) {
            for (const std::string& c : g.categories) {
                if (c.find(',') != std::string::npos) {
                    throw ConfigError("category symbols must not contain commas: " + c);
                }
            }
        }
        if (!cfg.objective.empty()) {
            const BenchmarkSpec spec = benchmark_spec(cfg.objective);
            if (cfg.space.genes.size() != spec.dimension) {
                throw ConfigError("gene count does not match benchmark dimension");
            }
            for (const GeneSpec& g : cfg.space.genes) {
                if (g.kind != GeneKind::Continuous) {
                    throw ConfigError("benchmark genes must be continuous");
                }
                if (g.lower < -spec.limit || g.upper > spec.limit) {
                    throw ConfigError("gene limits exceed benchmark limits");
                }
            }
        }
    }
    const std::string prop_err = validate_propagator_config(cfg.propagator);
    if (!prop_err.empty()) throw ConfigError(prop_err);
    const std::string isl_err = validate_island_config(cfg.resolved_islands());
    if (!isl_err.empty()) throw ConfigError(isl_err);
    if (cfg.backend != "inprocess" && cfg.backend != "mesh") {
        throw ConfigError("key 'backend' must be inprocess or mesh");
    }
    if (cfg.backend == "mesh" && cfg.rank_file.empty()) {
        throw ConfigError("key 'rank_file' is required for the mesh backend");
    }
}

}  // namespace propulsion
