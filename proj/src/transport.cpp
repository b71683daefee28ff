#include "propulsion/transport.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

namespace propulsion {

namespace {

void put_u8(std::vector<std::uint8_t>& buf, std::uint8_t v) { buf.push_back(v); }

void put_i32(std::vector<std::uint8_t>& buf, std::int32_t v) {
    const auto u = static_cast<std::uint32_t>(v);
    buf.push_back(static_cast<std::uint8_t>(u));
    buf.push_back(static_cast<std::uint8_t>(u >> 8));
    buf.push_back(static_cast<std::uint8_t>(u >> 16));
    buf.push_back(static_cast<std::uint8_t>(u >> 24));
}

void put_u64(std::vector<std::uint8_t>& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& buf, double v) {
    put_u64(buf, std::bit_cast<std::uint64_t>(v));
}

struct Reader {
    const std::uint8_t* p;
    const std::uint8_t* end;

    void need(std::size_t n) const {
        if (static_cast<std::size_t>(end - p) < n)
            throw std::runtime_error("truncated envelope frame");
    }
    std::uint8_t u8() {
        need(1);
        return *p++;
    }
    std::int32_t i32() {
        need(4);
        std::uint32_t u = static_cast<std::uint32_t>(p[0]) |
                          (static_cast<std::uint32_t>(p[1]) << 8) |
                          (static_cast<std::uint32_t>(p[2]) << 16) |
                          (static_cast<std::uint32_t>(p[3]) << 24);
        p += 4;
        return static_cast<std::int32_t>(u);
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t u = 0;
        for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(p[i]) << (8 * i);
        p += 8;
        return u;
    }
    double f64() { return std::bit_cast<double>(u64()); }
};

constexpr std::uint8_t kGeneDouble = 0;
constexpr std::uint8_t kGeneInt = 1;

}  // namespace

std::vector<std::uint8_t> encode_envelope(const Envelope& env) {
    std::vector<std::uint8_t> buf;
    buf.reserve(48 + 9 * env.payload.genes.size());
    put_u8(buf, static_cast<std::uint8_t>(env.channel));
    put_i32(buf, env.sender.island);
    put_i32(buf, env.sender.rank);
    put_i32(buf, env.sender.global_id);
    put_i32(buf, env.payload.origin.island);
    put_i32(buf, env.payload.origin.rank);
    put_i32(buf, env.payload.origin.generation);
    put_u8(buf, env.payload.active ? 1 : 0);
    put_u8(buf, env.pollination ? 1 : 0);
    put_i32(buf, env.coordinator_rank);
    put_f64(buf, env.payload.loss.value_or(std::numeric_limits<double>::quiet_NaN()));
    put_i32(buf, static_cast<std::int32_t>(env.payload.genes.size()));
    for (const GeneValue& g : env.payload.genes) {
        if (const double* d = std::get_if<double>(&g)) {
            put_u8(buf, kGeneDouble);
            put_f64(buf, *d);
        } else {
            put_u8(buf, kGeneInt);
            put_u64(buf, static_cast<std::uint64_t>(std::get<std::int64_t>(g)));
        }
    }
    return buf;
}

Envelope decode_envelope(const std::uint8_t* data, std::size_t size) {
    Reader r{data, data + size};
    Envelope env;
    env.channel = static_cast<Channel>(r.u8());
    env.sender.island = r.i32();
    env.sender.rank = r.i32();
    env.sender.global_id = r.i32();
    env.payload.origin.island = r.i32();
    env.payload.origin.rank = r.i32();
    env.payload.origin.generation = r.i32();
    env.payload.active = r.u8() != 0;
    env.pollination = r.u8() != 0;
    env.coordinator_rank = r.i32();
    const double loss = r.f64();
    if (!std::isnan(loss)) env.payload.loss = loss;
    const std::int32_t n = r.i32();
    env.payload.genes.reserve(static_cast<std::size_t>(n));
    for (std::int32_t i = 0; i < n; ++i) {
        const std::uint8_t tag = r.u8();
        if (tag == kGeneDouble) {
            env.payload.genes.emplace_back(r.f64());
        } else {
            env.payload.genes.emplace_back(static_cast<std::int64_t>(r.u64()));
        }
    }
    return env;
}

}  // namespace propulsion
