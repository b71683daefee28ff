#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include "propulsion/benchmarks.hpp"
#include "propulsion/island_engine.hpp"
#include "propulsion/mesh_transport.hpp"
#include "propulsion/reporting.hpp"
#include "propulsion/run_config.hpp"

namespace fs = std::filesystem;
using namespace propulsion;

namespace {

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> backend;
    std::optional<std::string> rank_file;
    std::optional<std::string> out_dir;
};

void apply_overrides(RunConfig& cfg, const Overrides& ov) {
    if (ov.seed) cfg.islands.seed = *ov.seed;
    if (ov.backend) cfg.backend = *ov.backend;
    if (ov.rank_file) cfg.rank_file = *ov.rank_file;
    if (ov.out_dir) cfg.out_dir = *ov.out_dir;
}

void write_worker_files(const fs::path& dir, const WorkerReport& report,
                        const SearchSpace& space) {
    const std::string gid = std::to_string(report.address.global_id);
    write_text_file((dir / ("ledger_w" + gid + ".csv")).string(),
                    ledger_dump_csv(report.ledger, space));
    write_text_file((dir / ("events_w" + gid + ".csv")).string(), events_csv(report.events));
}

std::string summary_text(const Individual& best, const SearchSpace& space,
                         std::size_t evaluations, double makespan) {
    std::ostringstream out;
    out << "best_loss        " << format_double(best.loss_value()) << "\n";
    out << "best_origin      (" << best.origin.island << "," << best.origin.rank << ","
        << best.origin.generation << ")\n";
    std::string genes;
    for (std::size_t i = 0; i < best.genes.size(); ++i) {
        genes += (i ? " " : "") + space.genes[i].name + "=" +
                 format_gene(best.genes[i], space.genes[i]);
    }
    out << "best_genes       " << genes << "\n";
    out << "evaluations      " << evaluations << "\n";
    out << "makespan_seconds " << format_double(makespan) << "\n";
    return out.str();
}

std::string summary_csv(const Individual& best, const SearchSpace& space,
                        std::size_t evaluations, double makespan,
                        const std::string& objective) {
    std::string out = "key,value\n";
    out += "objective," + objective + "\n";
    out += "best_loss," + format_double(best.loss_value()) + "\n";
    out += "best_origin_island," + std::to_string(best.origin.island) + "\n";
    out += "best_origin_rank," + std::to_string(best.origin.rank) + "\n";
    out += "best_generation," + std::to_string(best.origin.generation) + "\n";
    for (std::size_t i = 0; i < best.genes.size(); ++i) {
        out += "gene_" + space.genes[i].name + "," +
               format_gene(best.genes[i], space.genes[i]) + "\n";
    }
    out += "evaluations," + std::to_string(evaluations) + "\n";
    out += "makespan_seconds," + format_double(makespan) + "\n";
    return out;
}

int cmd_run(const std::string& config_path, const Overrides& ov) {
    RunConfig cfg;
    try {
        cfg = load_run_config(config_path);
        apply_overrides(cfg, ov);
        validate_run_config(cfg);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    }

    try {
        const SearchSpace space = effective_space(cfg);
        const Objective objective = make_objective(cfg);
        const IslandConfig islands = cfg.resolved_islands();
        const fs::path out_dir(cfg.out_dir);
        fs::create_directories(out_dir);
        write_text_file((out_dir / "config_used.cfg").string(), serialize_run_config(cfg));

        if (cfg.backend == "inprocess") {
            InProcessNet::Options net_options;
            net_options.virtual_clock = cfg.deterministic;
            net_options.latency_seed = islands.seed + 1;
            // the virtual clock waits without limit; wall-clock backends time out
            net_options.barrier_timeout = cfg.deterministic ? 0.0 : cfg.barrier_timeout;
            const RunResult result =
                run_inprocess(space, objective, cfg.propagator, islands, net_options);
            for (const WorkerReport& w : result.workers) write_worker_files(out_dir, w, space);
            const Individual& best = result.top_n.at(0);
            write_text_file((out_dir / "summary.csv").string(),
                            summary_csv(best, space, result.distinct_evaluated,
                                        result.makespan,
                                        cfg.objective.empty() ? "external" : cfg.objective));
            std::cout << summary_text(best, space, result.distinct_evaluated, result.makespan);
            return 0;
        }

        // mesh backend: one worker per process, identity from PROPULSION_RANK
        const std::vector<RankEntry> ranks = parse_rank_file(cfg.rank_file);
        const int my_gid = rank_from_environment();
        const IslandLayout layout = layout_from_ranks(ranks);
        if (layout.sizes() != islands.layout().sizes()) {
            std::cerr << "config error: rank file does not match island_sizes\n";
            return 1;
        }
        MeshEndpoint::Options mesh_options;
        mesh_options.barrier_timeout = cfg.barrier_timeout;
        MeshEndpoint endpoint(ranks, my_gid, mesh_options);
        WorkerReport report = run_worker(space, objective, cfg.propagator, islands, endpoint);
        write_worker_files(out_dir, report, space);
        endpoint.barrier(true);  // everyone's files are on disk after this
        if (my_gid == 0) {
            std::vector<WorkerReport> gathered;
            for (const RankEntry& r : ranks) {
                WorkerReport wr;
                wr.address = layout.address(r.global_id);
                PopulationLedger ledger(r.island, r.rank);
                const std::string dump = read_text_file(
                    (out_dir / ("ledger_w" + std::to_string(r.global_id) + ".csv")).string());
                for (LedgerRow& row : read_ledger_csv(dump, space)) {
                    const bool active = row.individual.active;
                    ledger.record(std::move(row.individual));
                    if (!active) ledger.deactivate(ledger.records().back().origin);
                }
                wr.ledger = std::move(ledger);
                gathered.push_back(std::move(wr));
            }
            const RunResult result = merge_reports(std::move(gathered), islands.report_top_n);
            const Individual& best = result.top_n.at(0);
            write_text_file((out_dir / "summary.csv").string(),
                            summary_csv(best, space, result.distinct_evaluated, report.finish_time,
                                        cfg.objective.empty() ? "external" : cfg.objective));
            std::cout << summary_text(best, space, result.distinct_evaluated,
                                      report.finish_time);
        }
        endpoint.close();
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "run failed: " << e.what() << "\n";
        return 2;
    }
}

int cmd_report(const std::string& dir, const std::string& optimum_arg) {
    try {
        const fs::path out_dir(dir);
        const RunConfig cfg =
            parse_run_config(read_text_file((out_dir / "config_used.cfg").string()));
        const SearchSpace space = effective_space(cfg);

        std::vector<double> optimum;
        if (!optimum_arg.empty()) {
            std::istringstream in(optimum_arg);
            std::string tok;
            while (std::getline(in, tok, ',')) optimum.push_back(parse_double(tok));
        } else if (!cfg.objective.empty()) {
            optimum = benchmark_spec(cfg.objective).optimum_point;
        }

        std::map<Identity, GeneVector> genes_by_identity;
        std::vector<std::vector<EventRecord>> per_worker;
        for (int gid = 0;; ++gid) {
            const fs::path ledger_path = out_dir / ("ledger_w" + std::to_string(gid) + ".csv");
            const fs::path events_path = out_dir / ("events_w" + std::to_string(gid) + ".csv");
            if (!fs::exists(ledger_path) || !fs::exists(events_path)) break;
            for (LedgerRow& row : read_ledger_csv(read_text_file(ledger_path.string()), space)) {
                genes_by_identity.emplace(row.individual.origin, std::move(row.individual.genes));
            }
            per_worker.push_back(read_events_csv(read_text_file(events_path.string())));
        }
        if (per_worker.empty()) {
            std::cerr << "report error: no ledger/event files in " << dir << "\n";
            return 1;
        }

        const std::vector<SeriesRow> rows = build_series(per_worker, genes_by_identity, optimum);
        write_text_file((out_dir / "series.csv").string(), series_csv(rows));

        double best = std::numeric_limits<double>::infinity();
        std::size_t events = 0;
        for (const auto& w : per_worker) events += w.size();
        for (const SeriesRow& r : rows) best = std::min(best, r.best_so_far);
        std::cout << "workers          " << per_worker.size() << "\n";
        std::cout << "events           " << events << "\n";
        std::cout << "distinct_evals   " << genes_by_identity.size() << "\n";
        std::cout << "best_loss        " << format_double(best) << "\n";
        if (!rows.empty()) {
            std::cout << "final_median     " << format_double(rows.back().median_active) << "\n";
            std::cout << "final_distance   " << format_double(rows.back().distance_to_optimum)
                      << "\n";
        }
        std::cout << "series           " << (out_dir / "series.csv").string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "report error: " << e.what() << "\n";
        return 1;
    }
}

struct BenchCase {
    std::string benchmark;
    std::vector<std::uint64_t> seeds;
    int generations = 0;  // 0: inherit
};

int cmd_bench(const std::string& suite_path, const std::string& out_path) {
    std::vector<BenchCase> cases;
    RunConfig base;
    try {
        // suite file: shared run-config keys, then [case] sections with
        // benchmark, seeds and an optional generations budget
        std::istringstream in(read_text_file(suite_path));
        std::string line;
        std::string shared;
        BenchCase* current = nullptr;
        while (std::getline(in, line)) {
            std::string t = line;
            if (t.find('#') == 0 || t.find_first_not_of(" \t\r") == std::string::npos) continue;
            if (t.find("[case]") != std::string::npos) {
                cases.emplace_back();
                current = &cases.back();
                continue;
            }
            if (!current) {
                shared += t + "\n";
                continue;
            }
            const std::size_t eq = t.find('=');
            if (eq == std::string::npos) throw ConfigError("malformed suite line: " + t);
            std::string key = t.substr(0, eq);
            std::string value = t.substr(eq + 1);
            key.erase(0, key.find_first_not_of(" \t"));
            key.erase(key.find_last_not_of(" \t") + 1);
            value.erase(0, value.find_first_not_of(" \t"));
            value.erase(value.find_last_not_of(" \t\r") + 1);
            if (key == "benchmark") {
                current->benchmark = value;
            } else if (key == "seeds") {
                std::istringstream seeds(value);
                std::uint64_t s;
                while (seeds >> s) current->seeds.push_back(s);
            } else if (key == "generations") {
                current->generations = std::stoi(value);
            } else {
                throw ConfigError("unrecognized suite key '" + key + "'");
            }
        }
        base = parse_run_config(shared);
        if (cases.empty()) throw ConfigError("suite has no [case] sections");
        for (const BenchCase& c : cases) {
            if (!is_benchmark(c.benchmark))
                throw ConfigError("unknown benchmark in suite: " + c.benchmark);
            if (c.seeds.empty()) throw ConfigError("case has no seeds: " + c.benchmark);
        }
    } catch (const std::exception& e) {
        std::cerr << "suite error: " << e.what() << "\n";
        return 1;
    }

    std::string csv = "benchmark,seed,best_loss,time_to_best,evaluations,status\n";
    bool any_failed = false;
    for (const BenchCase& c : cases) {
        std::vector<double> bests;
        std::vector<double> times;
        for (const std::uint64_t seed : c.seeds) {
            RunConfig cfg = base;
            cfg.objective = c.benchmark;
            cfg.objective_command.clear();
            cfg.explicit_genes = false;
            cfg.islands.seed = seed;
            if (c.generations > 0) cfg.islands.generations = c.generations;
            try {
                validate_run_config(cfg);
                const SearchSpace space = effective_space(cfg);
                const IslandConfig islands = cfg.resolved_islands();
                InProcessNet::Options net_options;
                net_options.virtual_clock = true;
                net_options.latency_seed = seed + 1;
                const RunResult result = run_inprocess(space, make_objective(cfg),
                                                       cfg.propagator, islands, net_options);
                const double best = result.top_n.at(0).loss_value();
                double time_to_best = result.makespan;
                for (const WorkerReport& w : result.workers) {
                    for (const EventRecord& e : w.events) {
                        if (e.kind == EventKind::Bred && e.loss == best) {
                            time_to_best = std::min(time_to_best, e.time);
                        }
                    }
                }
                bests.push_back(best);
                times.push_back(time_to_best);
                csv += c.benchmark + "," + std::to_string(seed) + "," + format_double(best) +
                       "," + format_double(time_to_best) + "," +
                       std::to_string(result.distinct_evaluated) + ",ok\n";
            } catch (const std::exception& e) {
                any_failed = true;
                csv += c.benchmark + "," + std::to_string(seed) + ",nan,nan,0,failed: " +
                       e.what() + "\n";
            }
        }
        if (!bests.empty()) {
            auto mean_std = [](const std::vector<double>& v) {
                double mean = 0.0;
                for (double x : v) mean += x;
                mean /= static_cast<double>(v.size());
                double var = 0.0;
                for (double x : v) var += (x - mean) * (x - mean);
                var /= static_cast<double>(v.size());
                return std::make_pair(mean, std::sqrt(var));
            };
            const auto [bm, bs] = mean_std(bests);
            const auto [tm, ts] = mean_std(times);
            csv += c.benchmark + ",aggregate," + format_double(bm) + "±" + format_double(bs) +
                   "," + format_double(tm) + "±" + format_double(ts) + "," +
                   std::to_string(bests.size()) + " runs,ok\n";
        }
    }
    write_text_file(out_path, csv);
    std::cout << csv;
    return any_failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"asynchronous island-model genetic optimizer"};
    app.require_subcommand(1);

    Overrides ov;
    std::string config_path;
    std::string report_dir;
    std::string optimum_arg;
    std::string suite_path;
    std::string bench_out = "bench.csv";
    std::uint64_t seed_value = 0;
    std::string backend_value;
    std::string rank_file_value;
    std::string out_value;

    CLI::App* run = app.add_subcommand("run", "execute an optimization run");
    run->add_option("config", config_path, "run config file")->required();
    CLI::Option* seed_opt = run->add_option("--seed", seed_value, "override the seed");
    CLI::Option* backend_opt =
        run->add_option("--backend", backend_value, "inprocess or mesh")
            ->check(CLI::IsMember({"inprocess", "mesh"}));
    CLI::Option* rank_opt = run->add_option("--rank-file", rank_file_value, "mesh rank file");
    CLI::Option* out_opt = run->add_option("--out", out_value, "output directory");

    CLI::App* report = app.add_subcommand("report", "summarize a finished run directory");
    report->add_option("dir", report_dir, "run output directory")->required();
    report->add_option("--optimum", optimum_arg, "comma-separated optimum point");

    CLI::App* bench = app.add_subcommand("bench", "run a benchmark suite");
    bench->add_option("suite", suite_path, "suite config file")->required();
    bench->add_option("--out", bench_out, "aggregate csv path");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) {
        if (*seed_opt) ov.seed = seed_value;
        if (*backend_opt) ov.backend = backend_value;
        if (*rank_opt) ov.rank_file = rank_file_value;
        if (*out_opt) ov.out_dir = out_value;
        return cmd_run(config_path, ov);
    }
    if (report->parsed()) return cmd_report(report_dir, optimum_arg);
    if (bench->parsed()) return cmd_bench(suite_path, bench_out);
    return 1;
}
