#include <poll.h>
#include <sys/socket.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdio>
#include <mutex>
#include <set>
#include <thread>

#include "emulator.hpp"
#include "exposcan/allowlist.hpp"
#include "exposcan/errors.hpp"

namespace exposcan::fleet {

namespace detail {

std::vector<const DataNamespace *> Context::visible() const
{
    std::vector<const DataNamespace *> out;
    for (const auto &ns : data.namespaces) {
        out.push_back(&ns);
    }
    return out;
}

const DataNamespace *Context::find(std::string_view name) const
{
    for (const auto &ns : data.namespaces) {
        if (ns.name == name) {
            return &ns;
        }
    }
    return nullptr;
}

Peer::Peer(Context &ctx, net::Socket socket)
    : ctx_(ctx), socket_(std::move(socket)), rng_(ctx.seed ^ 0x9e3779b97f4a7c15ULL)
{}

bool Peer::fill()
{
    auto idle_until = std::chrono::steady_clock::now() + ctx_.idle_timeout;
    std::uint8_t chunk[16384];
    for (;;) {
        if (ctx_.stop->load() || std::chrono::steady_clock::now() >= idle_until) {
            return false;
        }
        pollfd p{socket_.fd(), POLLIN, 0};
        int rc = ::poll(&p, 1, 100);
        if (rc < 0 && errno != EINTR) {
            return false;
        }
        if (rc <= 0) {
            continue;
        }
        ssize_t n = ::recv(socket_.fd(), chunk, sizeof(chunk), 0);
        if (n < 0 && (errno == EINTR || errno == EAGAIN || errno == EWOULDBLOCK)) {
            continue;
        }
        if (n <= 0) {
            return false;
        }
        buffer_.insert(buffer_.end(), chunk, chunk + n);
        return true;
    }
}

void Peer::reject()
{
    ctx_.log(ByteView(buffer_), std::string(kUnparsed));
    buffer_.clear();
}

void Peer::write(ByteView data)
{
    std::size_t sent = 0;
    while (sent < data.size()) {
        if (ctx_.stop->load()) {
            throw Hangup{};
        }
        ssize_t n = ::send(socket_.fd(), data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n > 0) {
            sent += static_cast<std::size_t>(n);
            continue;
        }
        if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR)) {
            pollfd p{socket_.fd(), POLLOUT, 0};
            ::poll(&p, 1, 100);
            continue;
        }
        throw Hangup{};
    }
}

void Peer::send(ByteView data)
{
    switch (ctx_.behavior) {
    case Behavior::Tarpit: return;
    case Behavior::Garbage: {
        Bytes junk(std::max<std::size_t>(data.size(), 24));
        for (auto &b : junk) {
            b = static_cast<std::uint8_t>(rng_());
        }
        junk[0] = 0x00;
        write(junk);
        throw Hangup{};
    }
    case Behavior::CloseMidHandshake:
        write(data.first(data.size() / 2));
        throw Hangup{};
    default: write(data);
    }
}

void Peer::drain()
{
    while (fill()) {
        buffer_.clear();
    }
}

std::string record_json(const DataRecord &r)
{
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto &[k, v] : r) {
        if (k != "_key") {
            j[k] = v;
        }
    }
    return j.dump();
}

bool is_plain(const DataRecord &r)
{
    return r.size() == 2 && r[0].first == "_key" && r[1].first == "value";
}

std::string record_value(const DataRecord &r) { return is_plain(r) ? r[1].second : record_json(r); }

std::string unquote(std::string_view ident)
{
    if (ident.size() >= 2 && (ident.front() == '"' || ident.front() == '`') && ident.back() == ident.front()) {
        std::string out;
        char q = ident.front();
        for (std::size_t i = 1; i + 1 < ident.size(); ++i) {
            out += ident[i];
            if (ident[i] == q && i + 2 < ident.size() && ident[i + 1] == q) {
                ++i;
            }
        }
        return out;
    }
    return std::string(ident);
}

std::string upper(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
        [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return out;
}

} // namespace detail

namespace {

using detail::Context;

void (*handler_for(ServiceKind s))(Context &, detail::Peer &)
{
    switch (s) {
    case ServiceKind::Redis: return detail::serve_redis;
    case ServiceKind::Memcached: return detail::serve_memcached;
    case ServiceKind::MongoDB: return detail::serve_mongodb;
    case ServiceKind::Elasticsearch: return detail::serve_elasticsearch;
    case ServiceKind::CouchDB: return detail::serve_couchdb;
    case ServiceKind::Cassandra: return detail::serve_cassandra;
    case ServiceKind::MySQL: return detail::serve_mysql;
    case ServiceKind::PostgreSQL: return detail::serve_postgres;
    }
    throw UnsupportedService("no emulator for this service");
}

std::string format_timestamp(std::chrono::system_clock::time_point t)
{
    auto secs = std::chrono::time_point_cast<std::chrono::seconds>(t);
    auto micros = std::chrono::duration_cast<std::chrono::microseconds>(t - secs).count();
    std::string base = format_iso8601(UtcTime(secs.time_since_epoch()));
    char frac[16];
    std::snprintf(frac, sizeof(frac), ".%06lld", static_cast<long long>(micros));
    return base.substr(0, base.size() - 1) + frac + "Z";
}

std::optional<std::chrono::system_clock::time_point> parse_timestamp(const std::string &text)
{
    auto dot = text.find('.');
    if (dot == std::string::npos || text.back() != 'Z' || text.size() != dot + 8) {
        return std::nullopt;
    }
    auto secs = parse_iso8601(text.substr(0, dot) + "Z");
    if (!secs) {
        return std::nullopt;
    }
    long long micros = 0;
    for (std::size_t i = dot + 1; i + 1 < text.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(text[i]))) {
            return std::nullopt;
        }
        micros = micros * 10 + (text[i] - '0');
    }
    return std::chrono::system_clock::time_point(secs->time_since_epoch()) + std::chrono::microseconds(micros);
}

} // namespace

struct FleetHandle::State {
    std::vector<FleetInstance> instances;
    UtcTime started_at{};
    std::atomic<bool> stop{false};
    std::vector<std::thread> threads;
    std::vector<net::Socket> reserved; // closed instances: bound, never listening

    std::mutex log_mutex;
    std::vector<CommandLogEntry> log;
    std::uint64_t sequence = 0;
    std::function<void(const CommandLogEntry &)> on_command;

    void record(std::size_t id, ServiceKind service, ByteView raw, std::string parsed)
    {
        std::lock_guard lock(log_mutex);
        CommandLogEntry e{id, service, std::chrono::system_clock::now(), sequence++, to_hex(raw), std::move(parsed)};
        if (on_command) {
            on_command(e);
        }
        log.push_back(std::move(e));
    }

    void shutdown()
    {
        stop = true;
        for (auto &t : threads) {
            if (t.joinable()) {
                t.join();
            }
        }
        threads.clear();
        reserved.clear();
    }
};

FleetHandle::FleetHandle() = default;
FleetHandle::FleetHandle(FleetHandle &&) noexcept = default;

FleetHandle &FleetHandle::operator=(FleetHandle &&other) noexcept
{
    if (this != &other) {
        stop();
        state_ = std::move(other.state_);
    }
    return *this;
}

FleetHandle::~FleetHandle() { stop(); }

const std::vector<FleetInstance> &FleetHandle::instances() const
{
    static const std::vector<FleetInstance> none;
    return state_ ? state_->instances : none;
}

UtcTime FleetHandle::started_at() const { return state_ ? state_->started_at : UtcTime{}; }

void FleetHandle::stop()
{
    if (state_) {
        state_->shutdown();
    }
}

FleetHandle spawn_fleet(const FleetConfig &config, const FleetOptions &options)
{
    std::set<std::uint16_t> fixed;
    for (const auto &c : config.instances) {
        if (c.port && !fixed.insert(*c.port).second) {
            throw PortInUse("port " + std::to_string(*c.port) + " is requested twice");
        }
        handler_for(c.service);
    }

    FleetHandle handle;
    handle.state_ = std::make_unique<FleetHandle::State>();
    auto &state = *handle.state_;
    state.started_at = std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now());
    state.on_command = options.on_command;

    std::vector<net::Socket> listeners;
    for (std::size_t i = 0; i < config.instances.size(); ++i) {
        const auto &c = config.instances[i];
        net::Socket sock = net::bind_tcp(options.host, c.port.value_or(0));
        FleetInstance inst{i, c, options.host, net::local_port(sock)};
        if (c.scenario == Scenario::Closed) {
            state.reserved.push_back(std::move(sock));
        } else {
            net::start_listening(sock, 64);
            listeners.push_back(std::move(sock));
        }
        state.instances.push_back(std::move(inst));
    }

    std::size_t next_listener = 0;
    for (const auto &inst : state.instances) {
        if (inst.config.scenario == Scenario::Closed) {
            continue;
        }
        auto ctx = std::make_shared<Context>();
        ctx->instance_id = inst.id;
        ctx->service = inst.config.service;
        ctx->data = instance_dataset(inst.config);
        ctx->behavior = instance_behavior(inst.config);
        ctx->seed = inst.config.seed;
        ctx->stop = &state.stop;
        ctx->idle_timeout = options.idle_timeout;
        ctx->log = [&state, id = inst.id, service = inst.config.service](ByteView raw, std::string parsed) {
            state.record(id, service, raw, std::move(parsed));
        };
        auto handler = handler_for(inst.config.service);
        state.threads.emplace_back([ctx, handler, &state, listener = std::move(listeners[next_listener++])] {
            while (!state.stop.load()) {
                auto client = net::accept_for(listener, net::Millis(100));
                if (!client) {
                    continue;
                }
                detail::Peer peer(*ctx, std::move(*client));
                try {
                    handler(*ctx, peer);
                } catch (const detail::Hangup &) {
                } catch (const std::exception &) {
                }
            }
        });
    }
    return handle;
}

std::vector<LabeledTarget> ground_truth(const FleetHandle &handle)
{
    std::vector<LabeledTarget> out;
    for (const auto &inst : handle.instances()) {
        TargetRecord t;
        t.address = inst.address;
        t.port = inst.port;
        t.service = inst.config.service;
        t.country = inst.config.country;
        t.source = TargetSource::File;
        t.discovered_at = handle.started_at();
        out.push_back({inst.id, t, expected_category(inst.config.scenario), inst.config.scenario});
    }
    return out;
}

std::vector<CommandLogEntry> command_log(const FleetHandle &handle)
{
    if (!handle.state_) {
        return {};
    }
    std::vector<CommandLogEntry> out;
    {
        std::lock_guard lock(handle.state_->log_mutex);
        out = handle.state_->log;
    }
    sort_log(out);
    return out;
}

void sort_log(std::vector<CommandLogEntry> &entries)
{
    std::sort(entries.begin(), entries.end(), [](const CommandLogEntry &a, const CommandLogEntry &b) {
        return std::tie(a.timestamp, a.instance_id, a.sequence) < std::tie(b.timestamp, b.instance_id, b.sequence);
    });
}

std::vector<Violation> audit_log(const std::vector<CommandLogEntry> &entries, bool logins_permitted)
{
    std::vector<Violation> out;
    for (const auto &e : entries) {
        if (!is_allowed(e.service, e.parsed_command)) {
            out.push_back({e, "not on the " + std::string(service_name(e.service)) + " allow-list"});
        } else if (!logins_permitted && is_credential_attempt(e.service, e.parsed_command)) {
            out.push_back({e, "credential attempt"});
        }
    }
    return out;
}

nlohmann::ordered_json to_json(const CommandLogEntry &e)
{
    nlohmann::ordered_json j;
    j["instance_id"] = e.instance_id;
    j["service"] = service_name(e.service);
    j["timestamp"] = format_timestamp(e.timestamp);
    j["sequence"] = e.sequence;
    j["raw_bytes"] = e.raw_hex;
    j["parsed_command"] = e.parsed_command;
    return j;
}

CommandLogEntry log_entry_from_json(const nlohmann::json &j)
{
    try {
        CommandLogEntry e;
        e.instance_id = j.at("instance_id").get<std::size_t>();
        auto service = parse_service(j.at("service").get<std::string>());
        auto ts = parse_timestamp(j.at("timestamp").get<std::string>());
        if (!service || !ts) {
            throw ParseError("bad service or timestamp in command log entry");
        }
        e.service = *service;
        e.timestamp = *ts;
        e.sequence = j.at("sequence").get<std::uint64_t>();
        e.raw_hex = j.at("raw_bytes").get<std::string>();
        e.parsed_command = j.at("parsed_command").get<std::string>();
        return e;
    } catch (const nlohmann::json::exception &ex) {
        throw ParseError(std::string("bad command log entry: ") + ex.what());
    }
}

nlohmann::ordered_json to_json(const LabeledTarget &t)
{
    auto j = to_json(t.target);
    j["instance_id"] = t.instance_id;
    j["scenario"] = scenario_name(t.scenario);
    j["expected_category"] = category_name(t.expected);
    return j;
}

LabeledTarget labeled_target_from_json(const nlohmann::json &j)
{
    LabeledTarget t;
    t.target = target_from_json(j);
    try {
        t.instance_id = j.at("instance_id").get<std::size_t>();
        auto scenario = parse_scenario(j.at("scenario").get<std::string>());
        auto category = parse_category(j.at("expected_category").get<std::string>());
        if (!scenario || !category) {
            throw ParseError("bad scenario or category in labeled target");
        }
        t.scenario = *scenario;
        t.expected = *category;
    } catch (const nlohmann::json::exception &ex) {
        throw ParseError(std::string("bad labeled target: ") + ex.what());
    }
    return t;
}

Blackhole::Blackhole()
{
    listener_ = net::bind_tcp("127.0.0.1", 0);
    net::start_listening(listener_, 0);
    port_ = net::local_port(listener_);
    for (int i = 0; i < 16; ++i) {
        auto r = net::tcp_connect("127.0.0.1", port_, net::Millis(200));
        if (r.outcome != net::ConnectOutcome::Connected) {
            break;
        }
        fillers_.push_back(std::move(r.socket));
    }
}

} // namespace exposcan::fleet
