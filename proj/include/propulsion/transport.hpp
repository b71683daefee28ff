#ifndef PROPULSION_TRANSPORT_HPP
#define PROPULSION_TRANSPORT_HPP

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "propulsion/search_space.hpp"

namespace propulsion {

struct TransportClosed : std::runtime_error {
    TransportClosed() : std::runtime_error("transport is closed") {}
};

struct UnknownDestination : std::runtime_error {
    explicit UnknownDestination(int gid)
        : std::runtime_error("unknown destination worker " + std::to_string(gid)) {}
};

struct TimeoutExceeded : std::runtime_error {
    explicit TimeoutExceeded(const std::string& what) : std::runtime_error(what) {}
};

struct WorkerAddress {
    int island = 0;
    int rank = 0;
    int global_id = 0;

    friend bool operator==(const WorkerAddress&, const WorkerAddress&) = default;
};

// Mapping between (island, rank) pairs and flattened worker ids. Identical on
// every worker of a run; it defines addressing for the whole mesh.
class IslandLayout {
public:
    IslandLayout() = default;
    explicit IslandLayout(std::vector<int> island_sizes) : sizes_(std::move(island_sizes)) {
        offsets_.resize(sizes_.size());
        int off = 0;
        for (std::size_t i = 0; i < sizes_.size(); ++i) {
            offsets_[i] = off;
            off += sizes_[i];
        }
        total_ = off;
        addresses_.reserve(total_);
        for (std::size_t isl = 0; isl < sizes_.size(); ++isl) {
            for (int r = 0; r < sizes_[isl]; ++r) {
                addresses_.push_back({static_cast<int>(isl), r, offsets_[isl] + r});
            }
        }
    }

    int n_islands() const { return static_cast<int>(sizes_.size()); }
    int island_size(int island) const { return sizes_.at(static_cast<std::size_t>(island)); }
    int total_workers() const { return total_; }
    const std::vector<int>& sizes() const { return sizes_; }

    int global_id(int island, int rank) const {
        return offsets_.at(static_cast<std::size_t>(island)) + rank;
    }
    const WorkerAddress& address(int global_id) const {
        return addresses_.at(static_cast<std::size_t>(global_id));
    }
    const std::vector<WorkerAddress>& addresses() const { return addresses_; }

    std::vector<WorkerAddress> workers_of_island(int island) const {
        std::vector<WorkerAddress> out;
        for (int r = 0; r < island_size(island); ++r) out.push_back(address(global_id(island, r)));
        return out;
    }

private:
    std::vector<int> sizes_;
    std::vector<int> offsets_;
    std::vector<WorkerAddress> addresses_;
    int total_ = 0;
};

enum class Channel : std::uint8_t { IntraIsland = 0, Emigrant = 1, Deactivate = 2 };

inline const char* channel_name(Channel c) {
    switch (c) {
        case Channel::IntraIsland: return "intra_island";
        case Channel::Emigrant: return "emigrant";
        case Channel::Deactivate: return "deactivate";
    }
    return "?";
}

// One transport message. Intra-island results and emigrants carry a full
// individual; deactivation notices carry the identity tuple only. Emigrant
// envelopes additionally carry the exchange-mode flag and, for pollination,
// the coordinator rank on the target island.
struct Envelope {
    Channel channel = Channel::IntraIsland;
    WorkerAddress sender;
    Individual payload;
    bool pollination = false;
    int coordinator_rank = -1;
};

// Fixed-layout binary frame; floats travel as raw bits so losses compare
// bit-exactly across workers.
std::vector<std::uint8_t> encode_envelope(const Envelope& env);
Envelope decode_envelope(const std::uint8_t* data, std::size_t size);

// One worker's connection to the run. post() never waits for delivery;
// poll() never blocks. Owned by exactly one worker; only internal delivery
// may run on other threads.
class Endpoint {
public:
    virtual ~Endpoint() = default;

    virtual const WorkerAddress& self() const = 0;
    virtual const IslandLayout& layout() const = 0;

    virtual void post(const WorkerAddress& dest, Envelope env) = 0;
    virtual std::vector<Envelope> poll(Channel channel) = 0;

    // Synchronization point carrying a per-worker flag; returns the AND of
    // all workers' flags. Every message posted before a worker's barrier
    // entry is visible to polls performed after the barrier returns.
    virtual bool barrier(bool flag) = 0;

    // Virtual or wall-clock seconds since the run started.
    virtual double now() const = 0;

    // Injects evaluation cost: advances the virtual clock, or sleeps on
    // wall-clock backends.
    virtual void advance(double dt) = 0;

    virtual bool is_virtual() const { return false; }

    // Marks this worker finished; posting afterwards raises TransportClosed.
    virtual void close() = 0;
};

}  // namespace propulsion

#endif
