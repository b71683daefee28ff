#include <doctest.h>

#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <map>
#include <thread>
#include <tuple>

#include "propulsion/inprocess_transport.hpp"
#include "propulsion/mesh_transport.hpp"
#include "propulsion/reporting.hpp"

using namespace propulsion;

namespace {

Envelope tagged(Channel ch, const WorkerAddress& sender, int tag) {
    Envelope env;
    env.channel = ch;
    env.sender = sender;
    env.payload.genes = {GeneValue{static_cast<double>(tag)}};
    env.payload.loss = static_cast<double>(tag);
    env.payload.origin = {sender.island, sender.rank, tag};
    return env;
}

// Runs one scripted function per worker on its own thread and rethrows the
// first failure after joining.
void run_workers(InProcessNet& net, const std::function<void(Endpoint&, int)>& script) {
    const int total = net.layout().total_workers();
    std::vector<std::unique_ptr<Endpoint>> eps;
    for (int gid = 0; gid < total; ++gid) eps.push_back(net.endpoint(gid));
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(total));
    for (int gid = 0; gid < total; ++gid) {
        threads.emplace_back([&, gid] {
            try {
                script(*eps[static_cast<std::size_t>(gid)], gid);
            } catch (...) {
                errors[static_cast<std::size_t>(gid)] = std::current_exception();
            }
            try {
                eps[static_cast<std::size_t>(gid)]->close();
            } catch (...) {
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

int free_port() {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
    socklen_t len = sizeof(addr);
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    const int port = ntohs(addr.sin_port);
    ::close(fd);
    return port;
}

}  // namespace

TEST_CASE("envelope serialization round-trips bit-exactly") {
    RandomSource rng(8);
    for (int i = 0; i < 100; ++i) {
        Envelope env;
        env.channel = static_cast<Channel>(rng.uniform_index(3));
        env.sender = {static_cast<int>(rng.uniform_index(4)),
                      static_cast<int>(rng.uniform_index(4)),
                      static_cast<int>(rng.uniform_index(16))};
        env.pollination = rng.chance(0.5);
        env.coordinator_rank = static_cast<int>(rng.uniform_index(4)) - 1;
        env.payload.origin = {static_cast<int>(rng.uniform_index(4)),
                              static_cast<int>(rng.uniform_index(4)),
                              static_cast<int>(rng.uniform_index(1000))};
        env.payload.active = rng.chance(0.5);
        if (rng.chance(0.9)) env.payload.loss = rng.uniform(-1e9, 1e9);
        const int genes = static_cast<int>(rng.uniform_index(6));
        for (int gi = 0; gi < genes; ++gi) {
            if (rng.chance(0.5)) {
                env.payload.genes.emplace_back(rng.uniform(-1e6, 1e6));
            } else {
                env.payload.genes.emplace_back(rng.uniform_int(-1000, 1000));
            }
        }
        const auto bytes = encode_envelope(env);
        const Envelope back = decode_envelope(bytes.data(), bytes.size());
        CHECK(back.channel == env.channel);
        CHECK(back.sender == env.sender);
        CHECK(back.pollination == env.pollination);
        CHECK(back.coordinator_rank == env.coordinator_rank);
        CHECK(back.payload.origin == env.payload.origin);
        CHECK(back.payload.active == env.payload.active);
        CHECK(back.payload.loss == env.payload.loss);
        CHECK(back.payload.genes == env.payload.genes);
    }
}

TEST_CASE("loopback post to self") {
    InProcessNet net(IslandLayout({1}), {});
    run_workers(net, [](Endpoint& ep, int) {
        ep.post(ep.self(), tagged(Channel::IntraIsland, ep.self(), 42));
        const auto got = ep.poll(Channel::IntraIsland);
        REQUIRE(got.size() == 1);
        CHECK(got[0].payload.origin.generation == 42);
        CHECK(ep.poll(Channel::IntraIsland).empty());
        CHECK(ep.poll(Channel::Emigrant).empty());
    });
}

TEST_CASE("post after close raises TransportClosed") {
    InProcessNet net(IslandLayout({1}), {});
    auto ep = net.endpoint(0);
    ep->close();
    CHECK_THROWS_AS(ep->post(ep->self(), tagged(Channel::IntraIsland, ep->self(), 1)),
                    TransportClosed);
}

TEST_CASE("unknown destination is rejected") {
    InProcessNet net(IslandLayout({1}), {});
    run_workers(net, [](Endpoint& ep, int) {
        WorkerAddress bogus{5, 5, 17};
        CHECK_THROWS_AS(ep.post(bogus, tagged(Channel::IntraIsland, ep.self(), 1)),
                        UnknownDestination);
    });
}

TEST_CASE("per-pair FIFO holds even when later messages draw lower latency") {
    InProcessNet::Options opt;
    opt.latency_fn = [](int, int, Channel, std::uint64_t seq) {
        return seq == 0 ? 5.0 : 0.0;  // first message is slow
    };
    InProcessNet net(IslandLayout({2}), opt);
    run_workers(net, [](Endpoint& ep, int gid) {
        if (gid == 0) {
            const WorkerAddress dest = ep.layout().address(1);
            ep.post(dest, tagged(Channel::IntraIsland, ep.self(), 1));
            ep.post(dest, tagged(Channel::IntraIsland, ep.self(), 2));
        } else {
            ep.advance(10.0);
            const auto got = ep.poll(Channel::IntraIsland);
            REQUIRE(got.size() == 2);
            CHECK(got[0].payload.origin.generation == 1);
            CHECK(got[1].payload.origin.generation == 2);
        }
    });
}

TEST_CASE("a delayed message is invisible until its delivery time") {
    InProcessNet::Options opt;
    opt.latency_fn = [](int, int, Channel, std::uint64_t) { return 5.0; };
    InProcessNet net(IslandLayout({2}), opt);
    run_workers(net, [](Endpoint& ep, int gid) {
        if (gid == 0) {
            ep.post(ep.layout().address(1), tagged(Channel::IntraIsland, ep.self(), 7));
            ep.advance(1.0);
        } else {
            CHECK(ep.poll(Channel::IntraIsland).empty());  // still in flight
            ep.advance(6.0);
            CHECK(ep.poll(Channel::IntraIsland).size() == 1);
        }
    });
}

TEST_CASE("poll drains everything already delivered") {
    InProcessNet net(IslandLayout({2}), {});
    run_workers(net, [](Endpoint& ep, int gid) {
        if (gid == 0) {
            for (int i = 0; i < 3; ++i) {
                ep.post(ep.layout().address(1), tagged(Channel::Deactivate, ep.self(), i));
            }
        } else {
            ep.advance(1.0);
            CHECK(ep.poll(Channel::Deactivate).size() == 3);
            CHECK(ep.poll(Channel::Deactivate).empty());
        }
    });
}

TEST_CASE("single-worker barrier returns immediately") {
    InProcessNet net(IslandLayout({1}), {});
    run_workers(net, [](Endpoint& ep, int) {
        CHECK(ep.barrier(true));
        CHECK_FALSE(ep.barrier(false));
    });
}

TEST_CASE("messages posted before barrier entry are visible after exit") {
    InProcessNet::Options opt;
    opt.latency_fn = [](int, int, Channel, std::uint64_t) { return 100.0; };
    InProcessNet net(IslandLayout({2}), opt);
    run_workers(net, [](Endpoint& ep, int gid) {
        if (gid == 0) {
            ep.post(ep.layout().address(1), tagged(Channel::IntraIsland, ep.self(), 1));
            ep.barrier(true);
        } else {
            ep.barrier(true);
            CHECK(ep.poll(Channel::IntraIsland).size() == 1);
        }
    });
}

TEST_CASE("barrier carries the conjunction of worker flags") {
    InProcessNet net(IslandLayout({3}), {});
    run_workers(net, [](Endpoint& ep, int gid) {
        CHECK(ep.barrier(true) == true);
        CHECK(ep.barrier(gid != 1) == false);
        CHECK(ep.barrier(true) == true);
    });
}

TEST_CASE("a worker that never barriers times the others out") {
    InProcessNet::Options opt;
    opt.virtual_clock = false;
    opt.barrier_timeout = 0.2;
    InProcessNet net(IslandLayout({2}), opt);
    run_workers(net, [](Endpoint& ep, int gid) {
        if (gid == 0) {
            CHECK_THROWS_AS(ep.barrier(true), TimeoutExceeded);
        } else {
            std::this_thread::sleep_for(std::chrono::milliseconds(400));
        }
    });
}

TEST_CASE("virtual barrier honors the wall timeout") {
    InProcessNet::Options opt;
    opt.barrier_timeout = 0.2;
    InProcessNet net(IslandLayout({2}), opt);
    std::atomic<bool> timed_out{false};
    run_workers(net, [&](Endpoint& ep, int gid) {
        if (gid == 0) {
            try {
                ep.barrier(true);
            } catch (const TimeoutExceeded&) {
                timed_out = true;
            }
        } else {
            std::this_thread::sleep_for(std::chrono::milliseconds(500));
        }
    });
    CHECK(timed_out);
}

TEST_CASE("poll consumes no virtual time regardless of in-flight volume") {
    InProcessNet::Options opt;
    opt.latency_fn = [](int, int, Channel, std::uint64_t) { return 50.0; };
    InProcessNet net(IslandLayout({2}), opt);
    run_workers(net, [](Endpoint& ep, int gid) {
        if (gid == 0) {
            for (int i = 0; i < 1000; ++i) {
                ep.post(ep.layout().address(1), tagged(Channel::IntraIsland, ep.self(), i));
            }
        } else {
            ep.advance(1.0);
            const double before = ep.now();
            CHECK(ep.poll(Channel::IntraIsland).empty());
            CHECK(ep.now() == before);
        }
    });
}

TEST_CASE("reliability and FIFO under randomized schedules") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        InProcessNet::Options opt;
        opt.uniform_max_latency = 3.0;
        opt.latency_seed = seed;
        InProcessNet net(IslandLayout({2, 2}), opt);

        std::mutex log_mu;
        std::map<int, int> sent_totals;
        std::map<int, std::vector<Envelope>> got;

        run_workers(net, [&](Endpoint& ep, int gid) {
            RandomSource rng(1000 + static_cast<std::uint64_t>(gid) * 7 + seed);
            std::vector<Envelope> received;
            int tag = 0;
            for (int round = 0; round < 30; ++round) {
                const int burst = static_cast<int>(rng.uniform_index(4));
                for (int i = 0; i < burst; ++i) {
                    const int dest = static_cast<int>(rng.uniform_index(4));
                    const Channel ch = static_cast<Channel>(rng.uniform_index(3));
                    ep.post(ep.layout().address(dest), tagged(ch, ep.self(), tag++));
                }
                ep.advance(rng.uniform(0.0, 2.0));
                for (int c = 0; c < 3; ++c) {
                    for (Envelope& env : ep.poll(static_cast<Channel>(c))) {
                        received.push_back(std::move(env));
                    }
                }
            }
            ep.barrier(true);
            for (int c = 0; c < 3; ++c) {
                for (Envelope& env : ep.poll(static_cast<Channel>(c))) {
                    received.push_back(std::move(env));
                }
            }
            std::lock_guard<std::mutex> lk(log_mu);
            sent_totals[gid] = tag;
            got[gid] = std::move(received);
        });

        std::map<std::tuple<int, int, int>, int> last_tag;  // (sender, dest, channel)
        bool fifo_ok = true;
        int total_received = 0;
        for (auto& [gid, envs] : got) {
            for (const Envelope& env : envs) {
                ++total_received;
                const auto key = std::make_tuple(env.sender.global_id, gid,
                                                 static_cast<int>(env.channel));
                auto it = last_tag.find(key);
                if (it != last_tag.end() && env.payload.origin.generation < it->second) {
                    fifo_ok = false;
                }
                last_tag[key] = env.payload.origin.generation;
            }
        }
        int total_sent = 0;
        for (auto& [gid, n] : sent_totals) total_sent += n;
        CHECK(total_received == total_sent);
        CHECK(fifo_ok);
    }
}

TEST_CASE("virtual delivery order reproduces exactly for a given seed") {
    auto run_once = [](std::uint64_t seed) {
        InProcessNet::Options opt;
        opt.uniform_max_latency = 2.0;
        opt.latency_seed = seed;
        InProcessNet net(IslandLayout({3}), opt);
        std::mutex mu;
        std::map<int, std::vector<std::pair<double, int>>> trace;
        run_workers(net, [&](Endpoint& ep, int gid) {
            RandomSource rng(static_cast<std::uint64_t>(gid) + 1);
            std::vector<std::pair<double, int>> local;
            for (int round = 0; round < 20; ++round) {
                const int dest = static_cast<int>(rng.uniform_index(3));
                ep.post(ep.layout().address(dest),
                        tagged(Channel::IntraIsland, ep.self(), round * 10 + gid));
                ep.advance(rng.uniform(0.1, 1.0));
                for (Envelope& env : ep.poll(Channel::IntraIsland)) {
                    local.emplace_back(ep.now(), env.payload.origin.generation);
                }
            }
            ep.barrier(true);
            for (Envelope& env : ep.poll(Channel::IntraIsland)) {
                local.emplace_back(ep.now(), env.payload.origin.generation);
            }
            std::lock_guard<std::mutex> lk(mu);
            trace[gid] = std::move(local);
        });
        return trace;
    };
    const auto a = run_once(9);
    CHECK(a == run_once(9));
    CHECK(a != run_once(10));
}

TEST_CASE("drop filter removes exactly the matched messages") {
    InProcessNet::Options opt;
    opt.drop_fn = [](int, int, Channel ch, std::uint64_t) {
        return ch == Channel::Deactivate;
    };
    InProcessNet net(IslandLayout({2}), opt);
    run_workers(net, [](Endpoint& ep, int gid) {
        if (gid == 0) {
            ep.post(ep.layout().address(1), tagged(Channel::Deactivate, ep.self(), 1));
            ep.post(ep.layout().address(1), tagged(Channel::IntraIsland, ep.self(), 2));
        }
        ep.barrier(true);
        if (gid == 1) {
            CHECK(ep.poll(Channel::Deactivate).empty());
            CHECK(ep.poll(Channel::IntraIsland).size() == 1);
        }
    });
    CHECK(net.dropped_count() == 1);
}

TEST_CASE("mesh endpoints exchange messages and barriers on localhost") {
    const int port_a = free_port();
    const int port_b = free_port();
    const std::vector<RankEntry> ranks = {{0, 0, 0, "127.0.0.1", port_a},
                                          {1, 0, 1, "127.0.0.1", port_b}};

    std::exception_ptr errors[2];
    auto script = [&](int gid) {
        try {
            MeshEndpoint ep(ranks, gid, {});
            const WorkerAddress peer = ep.layout().address(1 - gid);
            for (int i = 0; i < 50; ++i) {
                ep.post(peer, tagged(Channel::IntraIsland, ep.self(), i));
            }
            ep.post(ep.self(), tagged(Channel::Emigrant, ep.self(), 99));  // loopback
            CHECK(ep.poll(Channel::Emigrant).size() == 1);
            CHECK_FALSE(ep.barrier(gid == 0));  // flag conjunction
            // everything sent before the peer's barrier entry must be here
            std::vector<Envelope> got = ep.poll(Channel::IntraIsland);
            REQUIRE(got.size() == 50);
            for (int i = 0; i < 50; ++i) {
                CHECK(got[static_cast<std::size_t>(i)].payload.origin.generation == i);
            }
            CHECK(ep.barrier(true));
            ep.close();
            CHECK_THROWS_AS(ep.post(peer, tagged(Channel::IntraIsland, ep.self(), 0)),
                            TransportClosed);
        } catch (...) {
            errors[gid] = std::current_exception();
        }
    };
    std::thread t0(script, 0);
    std::thread t1(script, 1);
    t0.join();
    t1.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

TEST_CASE("rank file parsing") {
    const std::string path = "/tmp/propulsion_test_ranks.txt";
    write_text_file(path, "1 0 1 127.0.0.1 1001\n0 0 0 127.0.0.1 1000\n2 1 0 127.0.0.1 1002\n");
    const auto ranks = parse_rank_file(path);
    REQUIRE(ranks.size() == 3);
    CHECK(ranks[0].global_id == 0);
    CHECK(ranks[2].island == 1);
    const IslandLayout layout = layout_from_ranks(ranks);
    CHECK(layout.n_islands() == 2);
    CHECK(layout.island_size(0) == 2);
    CHECK(layout.total_workers() == 3);
}
