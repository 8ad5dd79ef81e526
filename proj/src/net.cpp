#include "exposcan/net.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <fcntl.h>
#include <algorithm>
#include <memory>
#include <mutex>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <system_error>
#include <unistd.h>

#include "exposcan/errors.hpp"

namespace exposcan::net {

namespace {

constexpr std::size_t kAuditCapacity = 65536;

struct Audit {
    std::mutex mutex;
    std::vector<ConnectAttempt> log;
    std::uint64_t non_loopback = 0;
};

Audit &audit()
{
    static Audit a;
    return a;
}

} // namespace

void connect_audit_note(const std::string &host, std::uint16_t port)
{
    Audit &a = audit();
    std::lock_guard lock(a.mutex);
    if (!is_loopback_address(host)) {
        ++a.non_loopback;
    }
    if (a.log.size() < kAuditCapacity) {
        a.log.push_back({host, port});
    }
}

namespace {

void set_nonblocking(int fd)
{
    int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

int poll_one(int fd, short events, Millis timeout)
{
    pollfd p{fd, events, 0};
    auto ms = static_cast<int>(std::max<Millis::rep>(0, timeout.count()));
    for (;;) {
        int rc = ::poll(&p, 1, ms);
        if (rc < 0 && errno == EINTR) {
            continue;
        }
        return rc < 0 ? rc : (rc == 0 ? 0 : p.revents);
    }
}

} // namespace

void Socket::reset()
{
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

bool is_loopback_address(std::string_view host)
{
    if (host == "localhost" || host == "::1") {
        return true;
    }
    in_addr v4{};
    std::string h(host);
    if (::inet_pton(AF_INET, h.c_str(), &v4) == 1) {
        return (ntohl(v4.s_addr) >> 24) == 127;
    }
    return false;
}

std::vector<ConnectAttempt> connect_audit_log()
{
    std::lock_guard lock(audit().mutex);
    return audit().log;
}

std::uint64_t non_loopback_connect_count()
{
    std::lock_guard lock(audit().mutex);
    return audit().non_loopback;
}

void clear_connect_audit()
{
    std::lock_guard lock(audit().mutex);
    audit().log.clear();
    audit().non_loopback = 0;
}

ConnectResult tcp_connect(const std::string &host, std::uint16_t port, Millis timeout)
{
    connect_audit_note(host, port);
    ConnectResult result;

    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo *info = nullptr;
    std::string service = std::to_string(port);
    if (int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &info); rc != 0) {
        result.error = ::gai_strerror(rc);
        return result;
    }
    std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(info, ::freeaddrinfo);

    Socket sock(::socket(info->ai_family, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!sock) {
        result.error = std::strerror(errno);
        return result;
    }
    set_nonblocking(sock.fd());
    int one = 1;
    ::setsockopt(sock.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));

    if (::connect(sock.fd(), info->ai_addr, info->ai_addrlen) == 0) {
        result.outcome = ConnectOutcome::Connected;
        result.socket = std::move(sock);
        return result;
    }
    if (errno != EINPROGRESS) {
        result.error = std::strerror(errno);
        return result;
    }

    int revents = poll_one(sock.fd(), POLLOUT, timeout);
    if (revents == 0) {
        result.outcome = ConnectOutcome::TimedOut;
        result.error = "connect timed out";
        return result;
    }
    int err = 0;
    socklen_t len = sizeof(err);
    ::getsockopt(sock.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
    if (revents < 0 || err != 0) {
        result.error = std::strerror(err != 0 ? err : errno);
        result.outcome = err == ETIMEDOUT ? ConnectOutcome::TimedOut : ConnectOutcome::Refused;
        return result;
    }
    result.outcome = ConnectOutcome::Connected;
    result.socket = std::move(sock);
    return result;
}

Millis Stream::wait_time() const
{
    if (!deadline_) {
        return io_timeout_;
    }
    auto left = std::chrono::duration_cast<Millis>(*deadline_ - std::chrono::steady_clock::now());
    if (left <= Millis(0)) {
        throw NetError(NetError::Kind::Timeout, "probe deadline reached");
    }
    return std::min(left, io_timeout_);
}

void Stream::write_all(ByteView data)
{
    std::size_t sent = 0;
    while (sent < data.size()) {
        ssize_t n = ::send(socket_.fd(), data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n > 0) {
            sent += static_cast<std::size_t>(n);
            continue;
        }
        if (n < 0 && errno == EINTR) {
            continue;
        }
        if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
            if (poll_one(socket_.fd(), POLLOUT, wait_time()) <= 0) {
                throw NetError(NetError::Kind::Timeout, "write timed out");
            }
            continue;
        }
        throw NetError(NetError::Kind::Reset, std::string("write failed: ") + std::strerror(errno));
    }
}

std::size_t Stream::fill()
{
    std::size_t want = 64 * 1024;
    if (budget_ != nullptr) {
        if (budget_->remaining() == 0) {
            throw NetError(NetError::Kind::BudgetExhausted, "byte budget exhausted");
        }
        want = static_cast<std::size_t>(std::min<std::uint64_t>(want, budget_->remaining()));
    }
    for (;;) {
        int revents = poll_one(socket_.fd(), POLLIN, wait_time());
        if (revents == 0) {
            throw NetError(NetError::Kind::Timeout, "read timed out");
        }
        std::size_t old = buffer_.size();
        buffer_.resize(old + want);
        ssize_t n = ::recv(socket_.fd(), buffer_.data() + old, want, 0);
        if (n < 0) {
            buffer_.resize(old);
            if (errno == EINTR || errno == EAGAIN || errno == EWOULDBLOCK) {
                continue;
            }
            throw NetError(NetError::Kind::Reset, std::string("read failed: ") + std::strerror(errno));
        }
        buffer_.resize(old + static_cast<std::size_t>(n));
        bytes_read_ += static_cast<std::uint64_t>(n);
        if (budget_ != nullptr) {
            budget_->consume(static_cast<std::uint64_t>(n));
        }
        return static_cast<std::size_t>(n);
    }
}

bool Stream::wait_readable(Millis timeout) { return poll_one(socket_.fd(), POLLIN, timeout) > 0; }

Socket bind_tcp(const std::string &host, std::uint16_t port)
{
    Socket sock(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (!sock) {
        throw std::system_error(errno, std::generic_category(), "socket");
    }
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        throw std::invalid_argument("not an IPv4 address: " + host);
    }
    if (::bind(sock.fd(), reinterpret_cast<sockaddr *>(&addr), sizeof(addr)) != 0) {
        if (errno == EADDRINUSE) {
            throw PortInUse("port " + std::to_string(port) + " is already in use");
        }
        throw std::system_error(errno, std::generic_category(), "bind");
    }
    return sock;
}

void start_listening(const Socket &socket, int backlog)
{
    if (::listen(socket.fd(), backlog) != 0) {
        throw std::system_error(errno, std::generic_category(), "listen");
    }
    set_nonblocking(socket.fd());
}

std::uint16_t local_port(const Socket &socket)
{
    sockaddr_in addr{};
    socklen_t len = sizeof(addr);
    ::getsockname(socket.fd(), reinterpret_cast<sockaddr *>(&addr), &len);
    return ntohs(addr.sin_port);
}

std::optional<Socket> accept_for(const Socket &listener, Millis wait)
{
    if (poll_one(listener.fd(), POLLIN, wait) <= 0) {
        return std::nullopt;
    }
    int fd = ::accept4(listener.fd(), nullptr, nullptr, SOCK_CLOEXEC | SOCK_NONBLOCK);
    if (fd < 0) {
        return std::nullopt;
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return Socket(fd);
}

} // namespace exposcan::net
