#pragma once

#include <chrono>
#include <cstddef>
#include <string>
#include <string_view>

#include "exposcan/harvest.hpp"
#include "exposcan/net.hpp"
#include "exposcan/target.hpp"

namespace exposcan {

struct ProbeOptions {
    // Allows the single blank-password root login against MySQL.
    bool try_default_credentials = false;
};

// Per-target state shared by every connection a check or probe opens:
// the byte budget, the wall-clock deadline and the message counter.
class ProbeSession {
public:
    using Clock = std::chrono::steady_clock;

    ProbeSession(TargetRecord target, ProbeBudget budget, ProbeOptions options,
        Clock::time_point deadline);
    ProbeSession(const ProbeSession &) = delete;
    ProbeSession &operator=(const ProbeSession &) = delete;

    [[nodiscard]] const TargetRecord &target() const { return target_; }
    [[nodiscard]] const ProbeBudget &budget() const { return budget_; }
    [[nodiscard]] const ProbeOptions &options() const { return options_; }
    [[nodiscard]] Clock::time_point deadline() const { return deadline_; }

    // Opens a further connection to the target; throws NetError on failure.
    net::Stream open();
    net::Stream adopt(net::Socket socket);

    // Writes one application-layer message.
    void send(net::Stream &stream, ByteView message);
    void send(net::Stream &stream, std::string_view message) { send(stream, as_bytes(message)); }

    [[nodiscard]] std::size_t messages_sent() const { return messages_sent_; }
    net::ByteBudget &bytes() { return bytes_; }

private:
    TargetRecord target_;
    ProbeBudget budget_;
    ProbeOptions options_;
    Clock::time_point deadline_;
    net::ByteBudget bytes_;
    std::size_t messages_sent_ = 0;
};

// Handshake-level check over an already connected stream. Never throws.
ConnStatus check_handshake(ProbeSession &session, net::Stream &stream);

// Full read-only probe; opens its own connections. Never throws.
Harvest probe_service(ProbeSession &session);

Harvest probe_redis(ProbeSession &session);
Harvest probe_memcached(ProbeSession &session);
Harvest probe_mongodb(ProbeSession &session);
Harvest probe_elasticsearch(ProbeSession &session);
Harvest probe_couchdb(ProbeSession &session);
Harvest probe_cassandra(ProbeSession &session);
Harvest probe_mysql(ProbeSession &session);
Harvest probe_postgres(ProbeSession &session);

// Upper bound on round trips (each extra connection counts as one) for
// the handshake check and for the full probe.
std::size_t check_round_trips(ServiceKind service);
std::size_t probe_round_trips(ServiceKind service, const ProbeBudget &budget);

bool is_system_namespace(ServiceKind service, std::string_view name);

} // namespace exposcan
