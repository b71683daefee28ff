#include "propulsion/reporting.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace propulsion {

std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw std::runtime_error("bad number: '" + s + "'");
    }
    return v;
}

std::string format_gene(const GeneValue& v, const GeneSpec& spec) {
    switch (spec.kind) {
        case GeneKind::Continuous: return format_double(as_double(v));
        case GeneKind::Integer: return std::to_string(std::get<std::int64_t>(v));
        case GeneKind::Categorical:
            return spec.categories.at(
                static_cast<std::size_t>(std::get<std::int64_t>(v)));
    }
    return "";
}

std::string ledger_dump_csv(const PopulationLedger& ledger, const SearchSpace& space) {
    std::string out = "origin_island,origin_rank,generation,active,loss";
    for (const GeneSpec& g : space.genes) out += "," + g.name;
    out += "\n";
    for (const Individual& rec : ledger.records()) {
        out += std::to_string(rec.origin.island) + "," + std::to_string(rec.origin.rank) + "," +
               std::to_string(rec.origin.generation) + "," + (rec.active ? "1" : "0") + "," +
               format_double(rec.loss_value());
        for (std::size_t i = 0; i < rec.genes.size(); ++i) {
            out += "," + format_gene(rec.genes[i], space.genes[i]);
        }
        out += "\n";
    }
    return out;
}

std::string events_csv(const std::vector<EventRecord>& events) {
    std::string out = "time,event,origin_island,origin_rank,generation,loss,other_island,other_rank\n";
    for (const EventRecord& e : events) {
        out += format_double(e.time);
        out += ",";
        out += event_kind_name(e.kind);
        out += "," + std::to_string(e.id.island) + "," + std::to_string(e.id.rank) + "," +
               std::to_string(e.id.generation) + "," + format_double(e.loss) + "," +
               std::to_string(e.other_island) + "," + std::to_string(e.other_rank) + "\n";
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

EventKind event_kind_from(const std::string& s) {
    if (s == "bred") return EventKind::Bred;
    if (s == "received") return EventKind::Received;
    if (s == "emigrated") return EventKind::Emigrated;
    if (s == "immigrated") return EventKind::Immigrated;
    if (s == "deactivated") return EventKind::Deactivated;
    throw std::runtime_error("unknown event kind: " + s);
}

}  // namespace

std::vector<LedgerRow> read_ledger_csv(const std::string& content, const SearchSpace& space) {
    std::istringstream in(content);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty ledger dump");
    std::vector<LedgerRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> f = split_csv_line(line);
        if (f.size() != 5 + space.genes.size()) {
            throw std::runtime_error("ledger row has wrong field count");
        }
        LedgerRow row;
        row.individual.origin = {std::stoi(f[0]), std::stoi(f[1]), std::stoi(f[2])};
        row.individual.active = f[3] == "1";
        row.individual.loss = parse_double(f[4]);
        for (std::size_t i = 0; i < space.genes.size(); ++i) {
            const GeneSpec& g = space.genes[i];
            const std::string& field = f[5 + i];
            switch (g.kind) {
                case GeneKind::Continuous:
                    row.individual.genes.emplace_back(parse_double(field));
                    break;
                case GeneKind::Integer:
                    row.individual.genes.emplace_back(
                        static_cast<std::int64_t>(std::stoll(field)));
                    break;
                case GeneKind::Categorical: {
                    const auto it =
                        std::find(g.categories.begin(), g.categories.end(), field);
                    if (it == g.categories.end()) {
                        throw std::runtime_error("unknown category: " + field);
                    }
                    row.individual.genes.emplace_back(
                        static_cast<std::int64_t>(it - g.categories.begin()));
                    break;
                }
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<EventRecord> read_events_csv(const std::string& content) {
    std::istringstream in(content);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty event log");
    std::vector<EventRecord> events;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> f = split_csv_line(line);
        if (f.size() != 8) throw std::runtime_error("event row has wrong field count");
        EventRecord e;
        e.time = parse_double(f[0]);
        e.kind = event_kind_from(f[1]);
        e.id = {std::stoi(f[2]), std::stoi(f[3]), std::stoi(f[4])};
        e.loss = parse_double(f[5]);
        e.other_island = std::stoi(f[6]);
        e.other_rank = std::stoi(f[7]);
        events.push_back(e);
    }
    return events;
}

std::vector<SeriesRow> build_series(const std::vector<std::vector<EventRecord>>& per_worker,
                                    const std::map<Identity, GeneVector>& genes_by_identity,
                                    const std::vector<double>& optimum_point) {
    struct Tagged {
        EventRecord event;
        std::size_t worker;
        std::size_t index;
    };
    std::vector<Tagged> merged;
    for (std::size_t w = 0; w < per_worker.size(); ++w) {
        for (std::size_t i = 0; i < per_worker[w].size(); ++i) {
            merged.push_back({per_worker[w][i], w, i});
        }
    }
    std::stable_sort(merged.begin(), merged.end(), [](const Tagged& a, const Tagged& b) {
        if (a.event.time != b.event.time) return a.event.time < b.event.time;
        if (a.worker != b.worker) return a.worker < b.worker;
        return a.index < b.index;
    });

    const double nan = std::numeric_limits<double>::quiet_NaN();
    double best = std::numeric_limits<double>::infinity();
    Identity best_id;
    bool have_best = false;
    std::map<Identity, double> active;
    std::multiset<double> active_losses;

    auto median = [&]() -> double {
        if (active_losses.empty()) return nan;
        auto it = active_losses.begin();
        std::advance(it, (active_losses.size() - 1) / 2);
        if (active_losses.size() % 2 == 1) return *it;
        auto it2 = std::next(it);
        return 0.5 * (*it + *it2);
    };
    auto distance = [&]() -> double {
        if (!have_best || optimum_point.empty()) return nan;
        auto it = genes_by_identity.find(best_id);
        if (it == genes_by_identity.end()) return nan;
        const GeneVector& genes = it->second;
        if (genes.size() != optimum_point.size()) return nan;
        double sum = 0.0;
        for (std::size_t i = 0; i < genes.size(); ++i) {
            const double d = as_double(genes[i]) - optimum_point[i];
            sum += d * d;
        }
        return std::sqrt(sum);
    };

    std::vector<SeriesRow> rows;
    rows.reserve(merged.size());
    for (const Tagged& t : merged) {
        const EventRecord& e = t.event;
        switch (e.kind) {
            case EventKind::Bred:
            case EventKind::Received:
            case EventKind::Immigrated:
                if (!active.count(e.id) && !std::isnan(e.loss)) {
                    active.emplace(e.id, e.loss);
                    active_losses.insert(e.loss);
                }
                if (!std::isnan(e.loss) &&
                    (e.loss < best || (!have_best && e.loss <= best))) {
                    best = e.loss;
                    best_id = e.id;
                    have_best = true;
                }
                break;
            case EventKind::Deactivated: {
                auto it = active.find(e.id);
                if (it != active.end()) {
                    active_losses.erase(active_losses.find(it->second));
                    active.erase(it);
                }
                break;
            }
            case EventKind::Emigrated:
                break;
        }
        rows.push_back({e.time, event_kind_name(e.kind), have_best ? best : nan, median(),
                        distance()});
    }
    return rows;
}

std::string series_csv(const std::vector<SeriesRow>& rows) {
    std::string out = "time,event,best_so_far,median_active,distance_to_optimum\n";
    for (const SeriesRow& r : rows) {
        out += format_double(r.time) + "," + r.event + "," + format_double(r.best_so_far) +
               "," + format_double(r.median_active) + "," +
               format_double(r.distance_to_optimum) + "\n";
    }
    return out;
}

}  // namespace propulsion
