#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "exposcan/codec/bytes.hpp"

namespace exposcan::net {

using Millis = std::chrono::milliseconds;

class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    ~Socket() { reset(); }

    Socket(const Socket &) = delete;
    Socket &operator=(const Socket &) = delete;
    Socket(Socket &&other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
    Socket &operator=(Socket &&other) noexcept
    {
        if (this != &other) {
            reset();
            fd_ = std::exchange(other.fd_, -1);
        }
        return *this;
    }

    [[nodiscard]] int fd() const { return fd_; }
    explicit operator bool() const { return fd_ >= 0; }
    void reset();

private:
    int fd_ = -1;
};

enum class ConnectOutcome { Connected, Refused, TimedOut };

struct ConnectResult {
    ConnectOutcome outcome = ConnectOutcome::Refused;
    Socket socket;
    std::string error;
};

// Non-blocking connect bounded by `timeout`. Unreachable networks and
// resolution failures report Refused.
ConnectResult tcp_connect(const std::string &host, std::uint16_t port, Millis timeout);

class NetError : public std::runtime_error {
public:
    enum class Kind { Timeout, Closed, Reset, BudgetExhausted };

    NetError(Kind kind, const std::string &what) : std::runtime_error(what), kind_(kind) {}
    [[nodiscard]] Kind kind() const { return kind_; }

private:
    Kind kind_;
};

// Caps the bytes read across every connection a probe opens.
class ByteBudget {
public:
    explicit ByteBudget(std::uint64_t limit) : limit_(limit) {}
    [[nodiscard]] std::uint64_t limit() const { return limit_; }
    [[nodiscard]] std::uint64_t used() const { return used_; }
    [[nodiscard]] std::uint64_t remaining() const { return limit_ - used_; }
    void consume(std::uint64_t n) { used_ += n; }

private:
    std::uint64_t limit_;
    std::uint64_t used_ = 0;
};

class Stream {
public:
    Stream(Socket socket, Millis io_timeout, ByteBudget *budget = nullptr)
        : socket_(std::move(socket)), io_timeout_(io_timeout), budget_(budget)
    {}

    void write_all(ByteView data);
    void write_all(std::string_view data) { write_all(as_bytes(data)); }

    // Appends whatever arrives within io_timeout to the internal buffer.
    // Returns 0 on orderly shutdown by the peer.
    std::size_t fill();

    // Feeds the buffered bytes to `decode` until it stops reporting
    // Truncated, reading more as needed, and drops the consumed prefix.
    template <typename Fn> auto read_frame(Fn &&decode)
    {
        for (;;) {
            if (!buffer_.empty()) {
                try {
                    auto decoded = decode(ByteView(buffer_));
                    buffer_.erase(buffer_.begin(),
                        buffer_.begin() + static_cast<std::ptrdiff_t>(decoded.consumed));
                    return std::move(decoded.value);
                } catch (const DecodeError &e) {
                    if (!e.truncated()) {
                        throw;
                    }
                }
            }
            if (fill() == 0) {
                throw NetError(NetError::Kind::Closed, "peer closed the connection");
            }
        }
    }

    // Waits up to io_timeout for the peer to close or send more.
    bool wait_readable(Millis timeout);

    // Hard stop for the whole exchange, on top of the per-read timeout.
    void set_deadline(std::chrono::steady_clock::time_point at) { deadline_ = at; }

    Bytes &buffer() { return buffer_; }
    [[nodiscard]] std::uint64_t bytes_read() const { return bytes_read_; }
    [[nodiscard]] Millis io_timeout() const { return io_timeout_; }
    [[nodiscard]] int fd() const { return socket_.fd(); }
    void close() { socket_.reset(); }

private:
    Socket socket_;
    Millis io_timeout_;
    ByteBudget *budget_;
    Millis wait_time() const;

    Bytes buffer_;
    std::uint64_t bytes_read_ = 0;
    std::optional<std::chrono::steady_clock::time_point> deadline_;
};

bool is_loopback_address(std::string_view host);

// Every outbound connect attempt is recorded here so tests can assert that
// a run stayed on loopback.
struct ConnectAttempt {
    std::string host;
    std::uint16_t port = 0;
};

// Records a connection made outside tcp_connect (e.g. by an HTTP library).
void connect_audit_note(const std::string &host, std::uint16_t port);

std::vector<ConnectAttempt> connect_audit_log();
std::uint64_t non_loopback_connect_count();
void clear_connect_audit();

// Server-side helpers for the mock fleet.
Socket bind_tcp(const std::string &host, std::uint16_t port);
void start_listening(const Socket &socket, int backlog);
std::uint16_t local_port(const Socket &socket);
std::optional<Socket> accept_for(const Socket &listener, Millis wait);

} // namespace exposcan::net
