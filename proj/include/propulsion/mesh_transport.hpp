#ifndef PROPULSION_MESH_TRANSPORT_HPP
#define PROPULSION_MESH_TRANSPORT_HPP

#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "propulsion/transport.hpp"

namespace propulsion {

// One line per worker in the rank file: `global_id island rank host port`.
struct RankEntry {
    int global_id = 0;
    int island = 0;
    int rank = 0;
    std::string host;
    int port = 0;
};

std::vector<RankEntry> parse_rank_file(const std::string& path);
IslandLayout layout_from_ranks(const std::vector<RankEntry>& ranks);

// Reads PROPULSION_RANK to find this process's worker identity.
int rank_from_environment();

// Multi-process backend: a full TCP mesh bootstrapped from the rank file.
// Each ordered pair of workers gets its own connection, so TCP stream
// framing provides exactly-once delivery and per-pair FIFO. One reader
// thread per incoming connection demultiplexes frames into local queues;
// poll never touches the network.
class MeshEndpoint final : public Endpoint {
public:
    struct Options {
        double connect_timeout = 30.0;
        double barrier_timeout = 60.0;
    };

    MeshEndpoint(std::vector<RankEntry> ranks, int my_global_id, Options options);
    ~MeshEndpoint() override;

    const WorkerAddress& self() const override { return self_; }
    const IslandLayout& layout() const override { return layout_; }
    void post(const WorkerAddress& dest, Envelope env) override;
    std::vector<Envelope> poll(Channel channel) override;
    bool barrier(bool flag) override;
    double now() const override;
    void advance(double dt) override;
    void close() override;

private:
    void accept_loop();
    void reader_loop(int fd, int peer_gid);
    void send_frame(int fd, std::uint8_t type, const std::uint8_t* body, std::size_t len);
    void enqueue_barrier_token(std::uint64_t epoch, bool flag);

    std::vector<RankEntry> ranks_;
    IslandLayout layout_;
    WorkerAddress self_;
    Options opt_;

    int listen_fd_ = -1;
    std::thread accept_thread_;
    std::vector<std::thread> readers_;

    std::mutex mu_;
    std::condition_variable cv_;
    std::vector<Envelope> queues_[3];
    std::map<int, int> out_fds_;                       // peer gid -> outgoing fd
    std::vector<int> in_fds_;                          // accepted connections
    std::map<std::uint64_t, std::pair<int, bool>> barrier_votes_;  // epoch -> (count, and)
    std::uint64_t barrier_epoch_ = 0;
    std::size_t expected_incoming_ = 0;
    std::size_t connected_incoming_ = 0;
    bool closed_ = false;

    std::mutex send_mu_;
    std::chrono::steady_clock::time_point start_;
};

}  // namespace propulsion

#endif
