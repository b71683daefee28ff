#ifndef PROPULSION_REPORTING_HPP
#define PROPULSION_REPORTING_HPP

#include <map>
#include <string>
#include <vector>

#include "propulsion/island_engine.hpp"
#include "propulsion/search_space.hpp"

namespace propulsion {

// Shortest decimal form that round-trips the exact double.
std::string format_double(double v);
double parse_double(const std::string& s);

std::string format_gene(const GeneValue& v, const GeneSpec& spec);

// Ledger dump: one row per record, header mandatory. Gene columns follow the
// space order; categorical genes print their symbol.
std::string ledger_dump_csv(const PopulationLedger& ledger, const SearchSpace& space);
std::string events_csv(const std::vector<EventRecord>& events);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

struct LedgerRow {
    Individual individual;  // active flag carried inside
};

std::vector<LedgerRow> read_ledger_csv(const std::string& content, const SearchSpace& space);
std::vector<EventRecord> read_events_csv(const std::string& content);

// One output row per event after merging all worker logs in time order.
struct SeriesRow {
    double time = 0.0;
    std::string event;
    double best_so_far = 0.0;
    double median_active = 0.0;
    double distance_to_optimum = 0.0;  // NaN when no optimum is configured
};

// Replays merged event logs into best-so-far / median-active / distance
// series. genes_by_identity supplies gene vectors for distance computation.
std::vector<SeriesRow> build_series(const std::vector<std::vector<EventRecord>>& per_worker,
                                    const std::map<Identity, GeneVector>& genes_by_identity,
                                    const std::vector<double>& optimum_point);

std::string series_csv(const std::vector<SeriesRow>& rows);

}  // namespace propulsion

#endif
