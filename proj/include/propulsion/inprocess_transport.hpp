#ifndef PROPULSION_INPROCESS_TRANSPORT_HPP
#define PROPULSION_INPROCESS_TRANSPORT_HPP

#include <chrono>
#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "propulsion/rng.hpp"
#include "propulsion/transport.hpp"

namespace propulsion {

// In-process backend: all workers live in one process as threads.
//
// With the virtual clock enabled, worker execution is serialized by a
// scheduler that always runs the worker with the smallest (clock, id), so a
// given seed and latency schedule reproduce the exact same delivery order.
// Evaluation cost and message latency are injected virtual quantities;
// nothing actually sleeps.
//
// Without the virtual clock, workers run freely in parallel with mutexed
// queues and wall-clock timestamps.
class InProcessNet {
public:
    // Latency/drop hooks receive (from_gid, to_gid, channel, sequence).
    using LatencyFn = std::function<double(int, int, Channel, std::uint64_t)>;
    using DropFn = std::function<bool(int, int, Channel, std::uint64_t)>;

    struct Options {
        bool virtual_clock = true;
        double uniform_max_latency = 0.0;  // latency ~ U[0, max] per message
        std::uint64_t latency_seed = 1;
        LatencyFn latency_fn;  // overrides uniform latency when set
        DropFn drop_fn;        // fault injection: true drops the message
        double barrier_timeout = 0.0;  // wall seconds; <= 0 waits forever
    };

    InProcessNet(IslandLayout layout, Options options);
    ~InProcessNet();

    // One endpoint per worker; create all of them before any worker runs.
    std::unique_ptr<Endpoint> endpoint(int global_id);

    const IslandLayout& layout() const { return layout_; }

    // Test observability.
    std::uint64_t posted_count(int from_gid, Channel channel) const;
    std::uint64_t dropped_count() const;

private:
    friend class InProcessEndpoint;

    enum class WorkerState { Ready, InBarrier, Finished };

    struct DeliveryKey {
        double at;
        std::uint64_t seq;
        bool operator<(const DeliveryKey& o) const {
            if (at != o.at) return at < o.at;
            return seq < o.seq;
        }
    };

    struct Worker {
        double clock = 0.0;
        WorkerState state = WorkerState::Ready;
        bool barrier_flag = true;
        std::condition_variable cv;
        std::map<DeliveryKey, Envelope> pending[3];
        std::uint64_t posted[3] = {0, 0, 0};
    };

    // virtual-clock scheduling, all under mu_
    void schedule_locked();
    void wait_for_turn(std::unique_lock<std::mutex>& lk, int gid);
    void check_progress_locked();

    void post_from(int from, const WorkerAddress& dest, Envelope env);
    std::vector<Envelope> poll_for(int gid, Channel channel);
    bool barrier_from(int gid, bool flag);
    double now_for(int gid) const;
    void advance_for(int gid, double dt);
    void close_for(int gid);

    IslandLayout layout_;
    Options opt_;
    mutable std::mutex mu_;
    std::vector<std::unique_ptr<Worker>> workers_;
    int running_ = -1;
    std::uint64_t next_seq_ = 0;
    std::uint64_t barrier_epoch_ = 0;
    bool failed_ = false;
    std::string failure_;
    RandomSource latency_rng_;
    std::map<std::uint64_t, double> last_delivery_;  // per (from,to,channel) FIFO floor
    std::uint64_t dropped_ = 0;

    // wall-clock mode barrier bookkeeping
    std::size_t wall_barrier_waiting_ = 0;
    bool wall_barrier_result_ = true;
    bool wall_barrier_collect_ = true;
    std::condition_variable wall_barrier_cv_;

    std::chrono::steady_clock::time_point start_;
};

}  // namespace propulsion

#endif
