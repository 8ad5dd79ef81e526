#pragma once

#include <atomic>
#include <functional>
#include <optional>
#include <random>
#include <string>

#include "exposcan/codec/bytes.hpp"
#include "exposcan/mockfleet.hpp"
#include "exposcan/net.hpp"

namespace exposcan::fleet::detail {

struct Context {
    std::size_t instance_id = 0;
    ServiceKind service = ServiceKind::Redis;
    Dataset data;
    Behavior behavior = Behavior::Normal;
    std::uint64_t seed = 0;
    std::function<void(ByteView raw, std::string parsed)> log;
    const std::atomic<bool> *stop = nullptr;
    net::Millis idle_timeout{30000};

    [[nodiscard]] std::vector<const DataNamespace *> visible() const;
    [[nodiscard]] const DataNamespace *find(std::string_view name) const;
};

// Ends the current connection.
struct Hangup {};

// Server side of one client connection. Behaviors that tamper with replies
// (garbage, tarpit, close_mid_handshake) are applied in send().
class Peer {
public:
    Peer(Context &ctx, net::Socket socket);

    // Reads the next message, logging it as describe(value). Returns nullopt
    // when the client leaves, the fleet stops, or the bytes cannot decode
    // (logged as "unparsed").
    template <typename Decode, typename Describe>
    auto next(Decode &&decode, Describe &&describe) -> std::optional<decltype(decode(ByteView{}).value)>
    {
        for (;;) {
            if (!buffer_.empty()) {
                try {
                    auto d = decode(ByteView(buffer_));
                    ByteView raw = ByteView(buffer_).first(d.consumed);
                    std::string text;
                    try {
                        text = describe(d.value);
                    } catch (const std::exception &) {
                        text = "unparsed";
                    }
                    ctx_.log(raw, std::move(text));
                    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(d.consumed));
                    return std::move(d.value);
                } catch (const DecodeError &e) {
                    if (!e.truncated()) {
                        reject();
                        return std::nullopt;
                    }
                }
            }
            if (!fill()) {
                if (!buffer_.empty()) {
                    reject();
                }
                return std::nullopt;
            }
        }
    }

    void send(ByteView data);
    void send(std::string_view data) { send(as_bytes(data)); }

    // Waits for the client to hang up (or the fleet to stop).
    void drain();

private:
    bool fill();
    void reject();
    void write(ByteView data);

    Context &ctx_;
    net::Socket socket_;
    Bytes buffer_;
    std::mt19937_64 rng_;
};

void serve_redis(Context &ctx, Peer &peer);
void serve_memcached(Context &ctx, Peer &peer);
void serve_mongodb(Context &ctx, Peer &peer);
void serve_elasticsearch(Context &ctx, Peer &peer);
void serve_couchdb(Context &ctx, Peer &peer);
void serve_cassandra(Context &ctx, Peer &peer);
void serve_mysql(Context &ctx, Peer &peer);
void serve_postgres(Context &ctx, Peer &peer);

// Record rendered as a JSON object, with "_key" dropped.
std::string record_json(const DataRecord &r);
// Plain value for key-value records, JSON text otherwise.
std::string record_value(const DataRecord &r);
bool is_plain(const DataRecord &r);

// Strips one level of "" or `` quoting.
std::string unquote(std::string_view ident);

// Upper-cased copy.
std::string upper(std::string_view s);

} // namespace exposcan::fleet::detail
