#include "propulsion/mesh_transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

namespace propulsion {

namespace {

constexpr std::uint8_t kFrameData = 0;
constexpr std::uint8_t kFrameBarrier = 1;
constexpr std::uint8_t kFrameHello = 2;

bool read_exact(int fd, std::uint8_t* buf, std::size_t len) {
    std::size_t got = 0;
    while (got < len) {
        const ssize_t n = ::recv(fd, buf + got, len - got, 0);
        if (n == 0) return false;
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        got += static_cast<std::size_t>(n);
    }
    return true;
}

void write_exact(int fd, const std::uint8_t* buf, std::size_t len) {
    std::size_t sent = 0;
    while (sent < len) {
        const ssize_t n = ::send(fd, buf + sent, len - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw TransportClosed();
        }
        sent += static_cast<std::size_t>(n);
    }
}

std::uint32_t load_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void store_u32(std::uint8_t* p, std::uint32_t v) {
    p[0] = static_cast<std::uint8_t>(v);
    p[1] = static_cast<std::uint8_t>(v >> 8);
    p[2] = static_cast<std::uint8_t>(v >> 16);
    p[3] = static_cast<std::uint8_t>(v >> 24);
}

std::uint64_t load_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

void store_u64(std::uint8_t* p, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

int connect_with_retry(const std::string& host, int port, double timeout) {
    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::duration<double>(timeout);
    while (true) {
        addrinfo hints{};
        hints.ai_family = AF_INET;
        hints.ai_socktype = SOCK_STREAM;
        addrinfo* res = nullptr;
        const std::string port_str = std::to_string(port);
        if (::getaddrinfo(host.c_str(), port_str.c_str(), &hints, &res) == 0 && res) {
            const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
            if (fd >= 0) {
                if (::connect(fd, res->ai_addr, res->ai_addrlen) == 0) {
                    ::freeaddrinfo(res);
                    const int one = 1;
                    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
                    return fd;
                }
                ::close(fd);
            }
            ::freeaddrinfo(res);
        }
        if (std::chrono::steady_clock::now() >= deadline) {
            throw TimeoutExceeded("could not connect to " + host + ":" + port_str);
        }
        ::usleep(20 * 1000);
    }
}

}  // namespace

std::vector<RankEntry> parse_rank_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open rank file: " + path);
    std::vector<RankEntry> ranks;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        RankEntry e;
        if (!(ls >> e.global_id >> e.island >> e.rank >> e.host >> e.port)) {
            throw std::runtime_error("malformed rank file line: " + line);
        }
        ranks.push_back(std::move(e));
    }
    if (ranks.empty()) throw std::runtime_error("rank file is empty: " + path);
    std::sort(ranks.begin(), ranks.end(),
              [](const RankEntry& a, const RankEntry& b) { return a.global_id < b.global_id; });
    for (std::size_t i = 0; i < ranks.size(); ++i) {
        if (ranks[i].global_id != static_cast<int>(i)) {
            throw std::runtime_error("rank file global ids are not 0..N-1");
        }
    }
    return ranks;
}

IslandLayout layout_from_ranks(const std::vector<RankEntry>& ranks) {
    int n_islands = 0;
    for (const RankEntry& e : ranks) n_islands = std::max(n_islands, e.island + 1);
    std::vector<int> sizes(static_cast<std::size_t>(n_islands), 0);
    for (const RankEntry& e : ranks) {
        sizes[static_cast<std::size_t>(e.island)] =
            std::max(sizes[static_cast<std::size_t>(e.island)], e.rank + 1);
    }
    IslandLayout layout(sizes);
    for (const RankEntry& e : ranks) {
        const WorkerAddress& a = layout.address(e.global_id);
        if (a.island != e.island || a.rank != e.rank) {
            throw std::runtime_error("rank file is not ordered island-major");
        }
    }
    return layout;
}

int rank_from_environment() {
    const char* v = std::getenv("PROPULSION_RANK");
    if (!v) throw std::runtime_error("PROPULSION_RANK is not set");
    return std::atoi(v);
}

MeshEndpoint::MeshEndpoint(std::vector<RankEntry> ranks, int my_global_id, Options options)
    : ranks_(std::move(ranks)),
      layout_(layout_from_ranks(ranks_)),
      self_(layout_.address(my_global_id)),
      opt_(options),
      start_(std::chrono::steady_clock::now()) {
    const RankEntry& me = ranks_[static_cast<std::size_t>(my_global_id)];
    expected_incoming_ = ranks_.size() - 1;

    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw std::runtime_error("socket() failed");
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    addr.sin_port = htons(static_cast<std::uint16_t>(me.port));
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        throw std::runtime_error("bind failed on port " + std::to_string(me.port));
    }
    if (::listen(listen_fd_, static_cast<int>(ranks_.size()) + 8) != 0) {
        throw std::runtime_error("listen failed");
    }
    accept_thread_ = std::thread([this] { accept_loop(); });

    // outgoing side of the mesh
    for (const RankEntry& peer : ranks_) {
        if (peer.global_id == self_.global_id) continue;
        const int fd = connect_with_retry(peer.host, peer.port, opt_.connect_timeout);
        std::uint8_t hello[13];
        store_u32(hello, 9);
        hello[4] = kFrameHello;
        store_u64(hello + 5, static_cast<std::uint64_t>(self_.global_id));
        write_exact(fd, hello, sizeof(hello));
        std::lock_guard<std::mutex> lk(mu_);
        out_fds_[peer.global_id] = fd;
    }

    // wait until every peer has connected in
    std::unique_lock<std::mutex> lk(mu_);
    if (!cv_.wait_for(lk, std::chrono::duration<double>(opt_.connect_timeout),
                      [&] { return connected_incoming_ == expected_incoming_; })) {
        throw TimeoutExceeded("mesh bootstrap incomplete");
    }
}

MeshEndpoint::~MeshEndpoint() {
    close();
    if (accept_thread_.joinable()) accept_thread_.join();
    for (std::thread& t : readers_) {
        if (t.joinable()) t.join();
    }
}

void MeshEndpoint::accept_loop() {
    std::size_t accepted = 0;
    while (accepted < expected_incoming_) {
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (errno == EINTR) continue;
            return;  // listener closed during shutdown
        }
        std::uint8_t header[4];
        if (!read_exact(fd, header, 4)) {
            ::close(fd);
            continue;
        }
        const std::uint32_t len = load_u32(header);
        std::vector<std::uint8_t> body(len);
        if (!read_exact(fd, body.data(), len) || len != 9 || body[0] != kFrameHello) {
            ::close(fd);
            continue;
        }
        const int peer = static_cast<int>(load_u64(body.data() + 1));
        {
            std::lock_guard<std::mutex> lk(mu_);
            in_fds_.push_back(fd);
            readers_.emplace_back([this, fd, peer] { reader_loop(fd, peer); });
            ++connected_incoming_;
        }
        cv_.notify_all();
        ++accepted;
    }
}

void MeshEndpoint::reader_loop(int fd, int /*peer_gid*/) {
    while (true) {
        std::uint8_t header[4];
        if (!read_exact(fd, header, 4)) break;
        const std::uint32_t len = load_u32(header);
        std::vector<std::uint8_t> body(len);
        if (!read_exact(fd, body.data(), len)) break;
        if (body.empty()) continue;
        if (body[0] == kFrameData) {
            Envelope env = decode_envelope(body.data() + 1, body.size() - 1);
            std::lock_guard<std::mutex> lk(mu_);
            queues_[static_cast<std::size_t>(env.channel)].push_back(std::move(env));
        } else if (body[0] == kFrameBarrier && body.size() >= 10) {
            enqueue_barrier_token(load_u64(body.data() + 1), body[9] != 0);
        }
    }
    ::close(fd);
}

void MeshEndpoint::enqueue_barrier_token(std::uint64_t epoch, bool flag) {
    std::lock_guard<std::mutex> lk(mu_);
    auto& slot = barrier_votes_[epoch];
    slot.first += 1;
    slot.second = (slot.first == 1) ? flag : (slot.second && flag);
    cv_.notify_all();
}

void MeshEndpoint::send_frame(int fd, std::uint8_t type, const std::uint8_t* body,
                              std::size_t len) {
    std::lock_guard<std::mutex> lk(send_mu_);
    std::vector<std::uint8_t> frame(4 + 1 + len);
    store_u32(frame.data(), static_cast<std::uint32_t>(len + 1));
    frame[4] = type;
    if (len) std::memcpy(frame.data() + 5, body, len);
    write_exact(fd, frame.data(), frame.size());
}

void MeshEndpoint::post(const WorkerAddress& dest, Envelope env) {
    {
        std::lock_guard<std::mutex> lk(mu_);
        if (closed_) throw TransportClosed();
    }
    if (dest.global_id < 0 || dest.global_id >= layout_.total_workers() ||
        !(layout_.address(dest.global_id) == dest)) {
        throw UnknownDestination(dest.global_id);
    }
    if (dest.global_id == self_.global_id) {
        std::lock_guard<std::mutex> lk(mu_);
        queues_[static_cast<std::size_t>(env.channel)].push_back(std::move(env));
        return;
    }
    const std::vector<std::uint8_t> body = encode_envelope(env);
    int fd;
    {
        std::lock_guard<std::mutex> lk(mu_);
        auto it = out_fds_.find(dest.global_id);
        if (it == out_fds_.end()) throw UnknownDestination(dest.global_id);
        fd = it->second;
    }
    send_frame(fd, kFrameData, body.data(), body.size());
}

std::vector<Envelope> MeshEndpoint::poll(Channel channel) {
    std::lock_guard<std::mutex> lk(mu_);
    std::vector<Envelope> out;
    out.swap(queues_[static_cast<std::size_t>(channel)]);
    return out;
}

bool MeshEndpoint::barrier(bool flag) {
    if (ranks_.size() == 1) return flag;
    std::uint64_t epoch;
    {
        std::lock_guard<std::mutex> lk(mu_);
        if (closed_) throw TransportClosed();
        epoch = ++barrier_epoch_;
    }
    std::uint8_t body[9];
    store_u64(body, epoch);
    body[8] = flag ? 1 : 0;
    std::map<int, int> fds;
    {
        std::lock_guard<std::mutex> lk(mu_);
        fds = out_fds_;
    }
    for (const auto& [gid, fd] : fds) send_frame(fd, kFrameBarrier, body, sizeof(body));

    std::unique_lock<std::mutex> lk(mu_);
    const std::size_t need = ranks_.size() - 1;
    const bool ok = cv_.wait_for(lk, std::chrono::duration<double>(opt_.barrier_timeout), [&] {
        auto it = barrier_votes_.find(epoch);
        return it != barrier_votes_.end() &&
               static_cast<std::size_t>(it->second.first) == need;
    });
    if (!ok) throw TimeoutExceeded("mesh barrier timeout");
    const bool all = need == 0 ? flag : (flag && barrier_votes_[epoch].second);
    barrier_votes_.erase(epoch);
    return all;
}

double MeshEndpoint::now() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
}

void MeshEndpoint::advance(double dt) {
    if (dt > 0.0) ::usleep(static_cast<useconds_t>(dt * 1e6));
}

void MeshEndpoint::close() {
    std::map<int, int> fds;
    std::vector<int> ins;
    {
        std::lock_guard<std::mutex> lk(mu_);
        if (closed_) return;
        closed_ = true;
        fds.swap(out_fds_);
        ins.swap(in_fds_);
    }
    for (const auto& [gid, fd] : fds) {
        ::shutdown(fd, SHUT_RDWR);
        ::close(fd);
    }
    for (int fd : ins) ::shutdown(fd, SHUT_RDWR);
    if (listen_fd_ >= 0) {
        ::shutdown(listen_fd_, SHUT_RDWR);
        ::close(listen_fd_);
        listen_fd_ = -1;
    }
}

}  // namespace propulsion
