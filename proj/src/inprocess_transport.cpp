#include "propulsion/inprocess_transport.hpp"

#include <algorithm>
#include <thread>

namespace propulsion {

namespace {

std::uint64_t pair_key(int from, int to, Channel ch) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(from)) << 34) |
           (static_cast<std::uint64_t>(static_cast<std::uint32_t>(to)) << 4) |
           static_cast<std::uint64_t>(ch);
}

}  // namespace

class InProcessEndpoint final : public Endpoint {
public:
    InProcessEndpoint(InProcessNet* net, int gid)
        : net_(net), addr_(net->layout().address(gid)) {}

    const WorkerAddress& self() const override { return addr_; }
    const IslandLayout& layout() const override { return net_->layout(); }

    void post(const WorkerAddress& dest, Envelope env) override {
        net_->post_from(addr_.global_id, dest, std::move(env));
    }
    std::vector<Envelope> poll(Channel channel) override {
        return net_->poll_for(addr_.global_id, channel);
    }
    bool barrier(bool flag) override { return net_->barrier_from(addr_.global_id, flag); }
    double now() const override { return net_->now_for(addr_.global_id); }
    void advance(double dt) override { net_->advance_for(addr_.global_id, dt); }
    bool is_virtual() const override { return net_->opt_.virtual_clock; }
    void close() override { net_->close_for(addr_.global_id); }

private:
    InProcessNet* net_;
    WorkerAddress addr_;
};

InProcessNet::InProcessNet(IslandLayout layout, Options options)
    : layout_(std::move(layout)),
      opt_(std::move(options)),
      latency_rng_(opt_.latency_seed),
      start_(std::chrono::steady_clock::now()) {
    workers_.reserve(static_cast<std::size_t>(layout_.total_workers()));
    for (int i = 0; i < layout_.total_workers(); ++i) {
        workers_.push_back(std::make_unique<Worker>());
    }
}

InProcessNet::~InProcessNet() = default;

std::unique_ptr<Endpoint> InProcessNet::endpoint(int global_id) {
    if (global_id < 0 || global_id >= layout_.total_workers())
        throw UnknownDestination(global_id);
    return std::make_unique<InProcessEndpoint>(this, global_id);
}

std::uint64_t InProcessNet::posted_count(int from_gid, Channel channel) const {
    std::lock_guard<std::mutex> lk(mu_);
    return workers_[static_cast<std::size_t>(from_gid)]
        ->posted[static_cast<std::size_t>(channel)];
}

std::uint64_t InProcessNet::dropped_count() const {
    std::lock_guard<std::mutex> lk(mu_);
    return dropped_;
}

// Picks the runnable worker with the smallest (clock, id) when the token is
// free. Called with mu_ held.
void InProcessNet::schedule_locked() {
    if (!opt_.virtual_clock || running_ != -1 || failed_) return;
    int best = -1;
    for (int i = 0; i < layout_.total_workers(); ++i) {
        const Worker& w = *workers_[static_cast<std::size_t>(i)];
        if (w.state != WorkerState::Ready) continue;
        if (best == -1 || w.clock < workers_[static_cast<std::size_t>(best)]->clock) best = i;
    }
    if (best != -1) {
        running_ = best;
        workers_[static_cast<std::size_t>(best)]->cv.notify_all();
    }
}

void InProcessNet::wait_for_turn(std::unique_lock<std::mutex>& lk, int gid) {
    if (!opt_.virtual_clock) return;
    Worker& w = *workers_[static_cast<std::size_t>(gid)];
    if (running_ == gid) return;
    schedule_locked();
    w.cv.wait(lk, [&] { return running_ == gid || failed_; });
    if (failed_) throw TimeoutExceeded(failure_);
}

// Completes the pending barrier once every non-finished worker is inside it.
// Called with mu_ held.
void InProcessNet::check_progress_locked() {
    std::size_t live = 0;
    std::size_t in_barrier = 0;
    double exit_time = 0.0;
    for (const auto& wp : workers_) {
        if (wp->state == WorkerState::Finished) continue;
        ++live;
        if (wp->state == WorkerState::InBarrier) {
            ++in_barrier;
            exit_time = std::max(exit_time, wp->clock);
        }
    }
    if (live == 0 || in_barrier == 0 || in_barrier != live) return;

    bool all_flags = true;
    for (auto& wp : workers_) {
        if (wp->state != WorkerState::InBarrier) continue;
        all_flags = all_flags && wp->barrier_flag;
        wp->clock = exit_time;
        wp->state = WorkerState::Ready;
    }
    // Everything posted before a barrier entry must be visible to polls after
    // the exit, so in-flight deliveries are capped at the exit time.
    for (auto& wp : workers_) {
        for (auto& queue : wp->pending) {
            std::map<DeliveryKey, Envelope> capped;
            for (auto& [key, env] : queue) {
                capped.emplace(DeliveryKey{std::min(key.at, exit_time), key.seq},
                               std::move(env));
            }
            queue.swap(capped);
        }
    }
    for (auto& [pair, floor] : last_delivery_) floor = std::min(floor, exit_time);
    wall_barrier_result_ = all_flags;
    ++barrier_epoch_;
    for (auto& wp : workers_) wp->cv.notify_all();
    schedule_locked();
}

void InProcessNet::post_from(int from, const WorkerAddress& dest, Envelope env) {
    std::unique_lock<std::mutex> lk(mu_);
    Worker& sender = *workers_[static_cast<std::size_t>(from)];
    if (sender.state == WorkerState::Finished) throw TransportClosed();
    if (dest.global_id < 0 || dest.global_id >= layout_.total_workers() ||
        !(layout_.address(dest.global_id) == dest)) {
        throw UnknownDestination(dest.global_id);
    }
    wait_for_turn(lk, from);
    sender.posted[static_cast<std::size_t>(env.channel)]++;

    const std::uint64_t seq = next_seq_++;
    if (opt_.drop_fn && opt_.drop_fn(from, dest.global_id, env.channel, seq)) {
        ++dropped_;
        return;
    }

    double at = 0.0;
    if (opt_.virtual_clock) {
        double latency = 0.0;
        if (opt_.latency_fn) {
            latency = opt_.latency_fn(from, dest.global_id, env.channel, seq);
        } else if (opt_.uniform_max_latency > 0.0) {
            latency = latency_rng_.uniform(0.0, opt_.uniform_max_latency);
        }
        at = sender.clock + std::max(0.0, latency);
        // same-pair deliveries never reorder
        double& floor = last_delivery_[pair_key(from, dest.global_id, env.channel)];
        at = std::max(at, floor);
        floor = at;
    }
    workers_[static_cast<std::size_t>(dest.global_id)]
        ->pending[static_cast<std::size_t>(env.channel)]
        .emplace(DeliveryKey{at, seq}, std::move(env));
}

std::vector<Envelope> InProcessNet::poll_for(int gid, Channel channel) {
    std::unique_lock<std::mutex> lk(mu_);
    Worker& w = *workers_[static_cast<std::size_t>(gid)];
    if (w.state == WorkerState::Finished) throw TransportClosed();
    wait_for_turn(lk, gid);
    auto& queue = w.pending[static_cast<std::size_t>(channel)];
    std::vector<Envelope> out;
    if (opt_.virtual_clock) {
        auto it = queue.begin();
        while (it != queue.end() && it->first.at <= w.clock) {
            out.push_back(std::move(it->second));
            it = queue.erase(it);
        }
    } else {
        for (auto& [key, env] : queue) out.push_back(std::move(env));
        queue.clear();
    }
    return out;
}

bool InProcessNet::barrier_from(int gid, bool flag) {
    std::unique_lock<std::mutex> lk(mu_);
    Worker& w = *workers_[static_cast<std::size_t>(gid)];
    if (w.state == WorkerState::Finished) throw TransportClosed();

    if (opt_.virtual_clock) {
        wait_for_turn(lk, gid);
        w.state = WorkerState::InBarrier;
        w.barrier_flag = flag;
        const std::uint64_t epoch = barrier_epoch_;
        if (running_ == gid) running_ = -1;
        check_progress_locked();
        if (barrier_epoch_ == epoch) schedule_locked();
        auto done = [&] { return barrier_epoch_ != epoch || failed_; };
        if (opt_.barrier_timeout > 0.0) {
            if (!w.cv.wait_for(lk, std::chrono::duration<double>(opt_.barrier_timeout), done)) {
                failed_ = true;
                failure_ = "barrier timeout";
                for (auto& wp : workers_) wp->cv.notify_all();
            }
        } else {
            w.cv.wait(lk, done);
        }
        if (failed_) throw TimeoutExceeded(failure_);
        return wall_barrier_result_;
    }

    // wall-clock generation barrier
    const std::uint64_t epoch = barrier_epoch_;
    w.state = WorkerState::InBarrier;
    wall_barrier_collect_ = wall_barrier_collect_ && flag;
    std::size_t live = 0;
    std::size_t waiting = 0;
    for (const auto& wp : workers_) {
        if (wp->state == WorkerState::Finished) continue;
        ++live;
        if (wp->state == WorkerState::InBarrier) ++waiting;
    }
    if (waiting == live) {
        wall_barrier_result_ = wall_barrier_collect_;
        wall_barrier_collect_ = true;
        for (auto& wp : workers_) {
            if (wp->state == WorkerState::InBarrier) wp->state = WorkerState::Ready;
        }
        ++barrier_epoch_;
        wall_barrier_cv_.notify_all();
        return wall_barrier_result_;
    }
    auto done = [&] { return barrier_epoch_ != epoch || failed_; };
    if (opt_.barrier_timeout > 0.0) {
        if (!wall_barrier_cv_.wait_for(lk, std::chrono::duration<double>(opt_.barrier_timeout),
                                       done)) {
            failed_ = true;
            failure_ = "barrier timeout";
            wall_barrier_cv_.notify_all();
        }
    } else {
        wall_barrier_cv_.wait(lk, done);
    }
    if (failed_) throw TimeoutExceeded(failure_);
    return wall_barrier_result_;
}

double InProcessNet::now_for(int gid) const {
    std::lock_guard<std::mutex> lk(mu_);
    if (opt_.virtual_clock) return workers_[static_cast<std::size_t>(gid)]->clock;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
}

void InProcessNet::advance_for(int gid, double dt) {
    if (!opt_.virtual_clock) {
        if (dt > 0.0) std::this_thread::sleep_for(std::chrono::duration<double>(dt));
        return;
    }
    std::unique_lock<std::mutex> lk(mu_);
    Worker& w = *workers_[static_cast<std::size_t>(gid)];
    if (w.state == WorkerState::Finished) throw TransportClosed();
    wait_for_turn(lk, gid);
    w.clock += dt;
    running_ = -1;
    wait_for_turn(lk, gid);
}

void InProcessNet::close_for(int gid) {
    std::unique_lock<std::mutex> lk(mu_);
    Worker& w = *workers_[static_cast<std::size_t>(gid)];
    if (w.state == WorkerState::Finished) return;
    if (opt_.virtual_clock) {
        if (!failed_) wait_for_turn(lk, gid);
        w.state = WorkerState::Finished;
        if (running_ == gid) running_ = -1;
        check_progress_locked();
        schedule_locked();
        return;
    }
    w.state = WorkerState::Finished;
    // a shrinking worker set may release an in-progress barrier
    std::size_t live = 0;
    std::size_t waiting = 0;
    for (const auto& wp : workers_) {
        if (wp->state == WorkerState::Finished) continue;
        ++live;
        if (wp->state == WorkerState::InBarrier) ++waiting;
    }
    if (live > 0 && waiting == live) {
        wall_barrier_result_ = wall_barrier_collect_;
        wall_barrier_collect_ = true;
        for (auto& wp : workers_) {
            if (wp->state == WorkerState::InBarrier) wp->state = WorkerState::Ready;
        }
        ++barrier_epoch_;
        wall_barrier_cv_.notify_all();
    }
}

}  // namespace propulsion
