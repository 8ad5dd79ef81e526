#include <gtest/gtest.h>

#include <fstream>
#include <functional>

#include "../support/generators.hpp"
#include "exposcan/codec/http.hpp"
#include "exposcan/codec/mongo_wire.hpp"

using namespace exposcan;

namespace {

constexpr int kRounds = 1000;

Bytes from_hex(const std::string &hex)
{
    Bytes out;
    for (std::size_t i = 0; i + 1 < hex.size(); i += 2) {
        out.push_back(static_cast<std::uint8_t>(std::stoi(hex.substr(i, 2), nullptr, 16)));
    }
    return out;
}

Bytes fixture_bytes(const std::string &name)
{
    std::ifstream in(std::string(EXPOSCAN_FIXTURES) + "/" + name);
    std::string hex;
    in >> hex;
    return from_hex(hex);
}

Bytes str_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

// Feeds random and mutated inputs to `decode`; only DecodeError may escape.
void fuzz(std::uint64_t seed, const std::vector<Bytes> &seeds, const std::function<void(ByteView)> &decode)
{
    gen::Rng rng(seed);
    for (int i = 0; i < kRounds; ++i) {
        Bytes input;
        if (!seeds.empty() && rng.coin()) {
            input = rng.pick(seeds);
            std::size_t flips = 1 + rng.below(4);
            for (std::size_t f = 0; f < flips && !input.empty(); ++f) {
                input[rng.below(input.size())] = static_cast<std::uint8_t>(rng.u64());
            }
            if (rng.coin()) {
                input.resize(rng.below(input.size() + 1));
            }
        } else {
            input = rng.bytes(256);
        }
        try {
            decode(input);
        } catch (const DecodeError &) {
        } catch (const std::exception &e) {
            ADD_FAILURE() << "non-structured error " << e.what() << " on " << to_hex(input);
            return;
        }
    }
}

} // namespace

TEST(Resp, KnownEncodings)
{
    EXPECT_EQ(resp::encode(resp::command({"PING"})), "*1\r\n$4\r\nPING\r\n");
    EXPECT_EQ(resp::encode(resp::Value::simple("OK")), "+OK\r\n");
    EXPECT_EQ(resp::encode(resp::Value::number(-7)), ":-7\r\n");
    EXPECT_EQ(resp::encode(resp::Value::null()), "$-1\r\n");
    auto d = resp::decode(as_bytes("*2\r\n$3\r\nfoo\r\n$-1\r\nextra"));
    EXPECT_EQ(d.consumed, 18u);
    EXPECT_EQ(d.value, resp::Value::array({resp::Value::bulk("foo"), resp::Value::null()}));
}

TEST(Resp, TruncatedAndMalformed)
{
    try {
        resp::decode(as_bytes("$10\r\nabc"));
        FAIL();
    } catch (const DecodeError &e) {
        EXPECT_TRUE(e.truncated());
    }
    try {
        resp::decode(as_bytes("?what\r\n"));
        FAIL();
    } catch (const DecodeError &e) {
        EXPECT_FALSE(e.truncated());
    }
}

TEST(Resp, RoundTripProperty)
{
    gen::Rng rng(11);
    for (int i = 0; i < kRounds; ++i) {
        auto v = gen::resp_value(rng);
        std::string wire = resp::encode(v);
        auto d = resp::decode(as_bytes(wire));
        ASSERT_EQ(d.value, v);
        ASSERT_EQ(d.consumed, wire.size());
    }
}

TEST(Resp, FuzzYieldsStructuredErrors)
{
    gen::Rng rng(12);
    std::vector<Bytes> seeds;
    for (int i = 0; i < 32; ++i) {
        seeds.push_back(str_bytes(resp::encode(gen::resp_value(rng))));
    }
    fuzz(13, seeds, [](ByteView b) { resp::decode(b); });
}

TEST(Bson, KnownEncoding)
{
    // {"hello": "world"}
    Bytes expected = {0x16, 0x00, 0x00, 0x00, 0x02, 'h', 'e', 'l', 'l', 'o', 0x00, 0x06, 0x00, 0x00, 0x00, 'w',
        'o', 'r', 'l', 'd', 0x00, 0x00};
    bson::Document doc = {{"hello", std::string("world")}};
    EXPECT_EQ(bson::encode(doc), expected);
    EXPECT_EQ(bson::decode(expected).value, doc);
}

TEST(Bson, RoundTripProperty)
{
    gen::Rng rng(21);
    for (int i = 0; i < kRounds; ++i) {
        auto doc = gen::bson_document(rng);
        Bytes wire = bson::encode(doc);
        auto d = bson::decode(wire);
        ASSERT_EQ(d.value, doc);
        ASSERT_EQ(d.consumed, wire.size());
    }
}

TEST(Bson, FuzzYieldsStructuredErrors)
{
    gen::Rng rng(22);
    std::vector<Bytes> seeds;
    for (int i = 0; i < 32; ++i) {
        seeds.push_back(bson::encode(gen::bson_document(rng)));
    }
    fuzz(23, seeds, [](ByteView b) { bson::decode(b); });
}

TEST(MongoWire, RoundTripProperty)
{
    gen::Rng rng(31);
    for (int i = 0; i < kRounds; ++i) {
        mongo::Message m;
        m.request_id = static_cast<std::int32_t>(rng.u64());
        m.response_to = static_cast<std::int32_t>(rng.u64());
        switch (rng.below(3)) {
        case 0: {
            mongo::OpMsg msg;
            msg.body = gen::bson_document(rng);
            if (rng.coin()) {
                msg.sequences.push_back({"documents", {gen::bson_document(rng), gen::bson_document(rng)}});
            }
            m.body = std::move(msg);
            break;
        }
        case 1:
            m.body = mongo::OpQuery{0, "admin.$cmd", 0, -1, gen::bson_document(rng)};
            break;
        default:
            m.body = mongo::OpReply{8, 0, 0, {gen::bson_document(rng)}};
            break;
        }
        Bytes wire = mongo::encode(m);
        auto d = mongo::decode(wire);
        ASSERT_EQ(d.value, m);
        ASSERT_EQ(d.consumed, wire.size());
    }
}

TEST(MongoWire, FuzzYieldsStructuredErrors)
{
    gen::Rng rng(32);
    std::vector<Bytes> seeds;
    for (int i = 0; i < 16; ++i) {
        mongo::Message m;
        m.body = mongo::OpMsg{0, gen::bson_document(rng), {}};
        seeds.push_back(mongo::encode(m));
    }
    fuzz(33, seeds, [](ByteView b) { mongo::decode(b); });
}

TEST(Cql, KnownOptionsFrame)
{
    cql::Frame f;
    f.opcode = static_cast<std::uint8_t>(cql::Opcode::Options);
    EXPECT_EQ(cql::encode(f), (Bytes{0x04, 0x00, 0x00, 0x00, 0x05, 0x00, 0x00, 0x00, 0x00}));
}

TEST(Cql, RoundTripProperty)
{
    gen::Rng rng(41);
    for (int i = 0; i < kRounds; ++i) {
        auto f = gen::cql_frame(rng);
        Bytes wire = cql::encode(f);
        auto d = cql::decode(wire);
        ASSERT_EQ(d.value, f);
        ASSERT_EQ(d.consumed, wire.size());
    }
}

TEST(Cql, BodyRoundTrips)
{
    gen::Rng rng(42);
    for (int i = 0; i < 200; ++i) {
        cql::StringMap m;
        for (std::size_t k = rng.below(4); k > 0; --k) {
            m.emplace_back(rng.word(1, 10), rng.text(16, gen::kPrintable));
        }
        EXPECT_EQ(cql::decode_string_map(cql::encode_string_map(m)), m);

        cql::QueryBody q{rng.text(60, gen::kPrintable), static_cast<std::uint16_t>(rng.below(11)), 0};
        EXPECT_EQ(cql::decode_query(cql::encode_query(q)), q);

        cql::ErrorBody e{static_cast<std::int32_t>(rng.u64()), rng.text(40, gen::kPrintable)};
        EXPECT_EQ(cql::decode_error(cql::encode_error(e)), e);

        cql::Result r;
        r.kind = cql::ResultKind::Rows;
        r.rows.keyspace = rng.word(1, 8);
        r.rows.table = rng.word(1, 8);
        std::size_t cols = 1 + rng.below(3);
        for (std::size_t c = 0; c < cols; ++c) {
            r.rows.columns.push_back({rng.word(1, 6), static_cast<std::uint16_t>(cql::ColumnType::Varchar)});
        }
        for (std::size_t n = rng.below(4); n > 0; --n) {
            std::vector<cql::Cell> row;
            for (std::size_t c = 0; c < cols; ++c) {
                row.push_back(rng.chance(0.2) ? cql::Cell{} : cql::text_cell(rng.text(12, gen::kPrintable)));
            }
            r.rows.rows.push_back(std::move(row));
        }
        EXPECT_EQ(cql::decode_result(cql::encode_result(r)), r);
    }
}

TEST(Cql, FuzzYieldsStructuredErrors)
{
    gen::Rng rng(43);
    std::vector<Bytes> seeds;
    for (int i = 0; i < 16; ++i) {
        seeds.push_back(cql::encode(gen::cql_frame(rng)));
    }
    fuzz(44, seeds, [](ByteView b) { cql::decode(b); });
    fuzz(45, {}, [](ByteView b) { cql::decode_result(b); });
    fuzz(46, {}, [](ByteView b) { cql::decode_string_multimap(b); });
}

TEST(Mysql, PublishedHandshakeFixture)
{
    Bytes wire = fixture_bytes("mysql_handshake.hex");
    auto packet = mysql::decode_packet(wire);
    EXPECT_EQ(packet.consumed, wire.size());
    EXPECT_EQ(packet.value.sequence_id, 0);
    auto h = mysql::decode_handshake(packet.value.payload);
    EXPECT_EQ(h.protocol_version, 10);
    EXPECT_EQ(h.server_version, "5.5.2-m2");
    EXPECT_EQ(h.connection_id, 82u);
    EXPECT_EQ(h.capability_flags, 0xc00fffffu);
    EXPECT_EQ(h.character_set, 8);
    EXPECT_EQ(h.status_flags, 2);
    EXPECT_EQ(h.auth_plugin_name, "mysql_native_password");
    EXPECT_EQ(to_string(h.auth_plugin_data), "\"=NP)u9V+yD&/ZZ305ZG");
    EXPECT_EQ(mysql::encode_handshake(h), packet.value.payload);
}

TEST(Mysql, HandshakeRoundTripProperty)
{
    gen::Rng rng(51);
    for (int i = 0; i < kRounds; ++i) {
        auto h = gen::mysql_handshake(rng);
        mysql::Packet p{static_cast<std::uint8_t>(rng.u64()), mysql::encode_handshake(h)};
        Bytes wire = mysql::encode_packet(p);
        auto d = mysql::decode_packet(wire);
        ASSERT_EQ(d.value, p);
        ASSERT_EQ(mysql::decode_handshake(d.value.payload), h);
    }
}

TEST(Mysql, ErrPacketAndQuery)
{
    mysql::ErrPacket e{1045, "28000", "Access denied for user 'root'@'localhost' (using password: NO)"};
    Bytes wire = mysql::encode_err(e);
    EXPECT_TRUE(mysql::is_err(wire));
    EXPECT_EQ(mysql::decode_err(wire), e);
    EXPECT_EQ(mysql::decode_com_query(mysql::encode_com_query("SHOW DATABASES")), "SHOW DATABASES");
}

TEST(Mysql, FuzzYieldsStructuredErrors)
{
    gen::Rng rng(52);
    std::vector<Bytes> seeds = {fixture_bytes("mysql_handshake.hex")};
    for (int i = 0; i < 16; ++i) {
        seeds.push_back(mysql::encode_handshake(gen::mysql_handshake(rng)));
    }
    fuzz(53, seeds, [](ByteView b) { mysql::decode_handshake(b); });
    fuzz(54, seeds, [](ByteView b) { mysql::decode_packet(b); });
    fuzz(55, {}, [](ByteView b) { mysql::decode_err(b); });
    fuzz(56, {}, [](ByteView b) { mysql::decode_handshake_response(b); });
}

TEST(Pg, ErrorResponseFixture)
{
    Bytes wire = fixture_bytes("pg_error_response.hex");
    auto d = pg::decode(wire);
    EXPECT_EQ(d.consumed, wire.size());
    EXPECT_EQ(d.value.type, 'E');
    pg::Fields expected = {{'S', "FATAL"}, {'V', "FATAL"}, {'C', "28P01"},
        {'M', "password authentication failed for user \"postgres\""}};
    EXPECT_EQ(pg::parse_error(d.value), expected);
    EXPECT_EQ(pg::encode(pg::make_error(expected)), wire);
}

TEST(Pg, MessageRoundTripProperty)
{
    gen::Rng rng(61);
    for (int i = 0; i < kRounds; ++i) {
        auto m = gen::pg_message(rng);
        Bytes wire = pg::encode(m);
        auto d = pg::decode(wire);
        ASSERT_EQ(d.value, m);
        ASSERT_EQ(d.consumed, wire.size());
    }
}

TEST(Pg, StartupAndRowsRoundTrip)
{
    gen::Rng rng(62);
    for (int i = 0; i < 200; ++i) {
        pg::Startup s;
        for (std::size_t k = 1 + rng.below(3); k > 0; --k) {
            s.params.emplace_back(rng.word(1, 10), rng.word(0, 10));
        }
        Bytes wire = pg::encode_startup(s);
        auto d = pg::decode_startup(wire);
        EXPECT_EQ(d.value, s);
        EXPECT_EQ(d.consumed, wire.size());

        std::vector<pg::Column> cols;
        pg::Row row;
        for (std::size_t c = 1 + rng.below(3); c > 0; --c) {
            cols.push_back({rng.word(1, 8), 25});
            row.push_back(rng.chance(0.2) ? std::nullopt : std::optional(rng.text(10, gen::kPrintable)));
        }
        EXPECT_EQ(pg::parse_row_description(pg::make_row_description(cols)), cols);
        EXPECT_EQ(pg::parse_data_row(pg::make_data_row(row)), row);
    }
}

TEST(Pg, FuzzYieldsStructuredErrors)
{
    gen::Rng rng(63);
    std::vector<Bytes> seeds = {fixture_bytes("pg_error_response.hex")};
    for (int i = 0; i < 16; ++i) {
        seeds.push_back(pg::encode(gen::pg_message(rng)));
    }
    fuzz(64, seeds, [](ByteView b) { pg::decode(b); });
    fuzz(65, {}, [](ByteView b) { pg::decode_startup(b); });
    fuzz(66, {}, [](ByteView b) { pg::parse_error(pg::Message{'E', Bytes(b.begin(), b.end())}); });
    fuzz(67, {}, [](ByteView b) { pg::parse_data_row(pg::Message{'D', Bytes(b.begin(), b.end())}); });
}

TEST(Memcached, KnownLines)
{
    auto d = memcached::decode_line(as_bytes("VALUE user:1 0 5 42\r\nhello\r\nEND\r\n"));
    EXPECT_EQ(d.consumed, 21u);
    EXPECT_EQ(d.value.kind, memcached::Line::Kind::Value);
    EXPECT_EQ(d.value.key, "user:1");
    EXPECT_EQ(d.value.bytes, 5u);
    EXPECT_EQ(d.value.cas, 42u);
    auto block = memcached::decode_data_block(as_bytes("hello\r\nEND\r\n"), 5);
    EXPECT_EQ(block.value, "hello");
    EXPECT_EQ(block.consumed, 7u);
}

TEST(Memcached, ResponseRoundTripProperty)
{
    gen::Rng rng(71);
    for (int i = 0; i < kRounds; ++i) {
        auto l = gen::memcached_line(rng);
        std::string wire = memcached::encode_line(l);
        auto d = memcached::decode_line(as_bytes(wire));
        ASSERT_EQ(d.value, l) << wire;
        ASSERT_EQ(d.consumed, wire.size());

        Bytes data = rng.bytes(64);
        std::string block(data.begin(), data.end());
        auto b = memcached::decode_data_block(as_bytes(block + "\r\n"), block.size());
        ASSERT_EQ(b.value, block);
    }
}

TEST(Memcached, FuzzYieldsStructuredErrors)
{
    gen::Rng rng(72);
    std::vector<Bytes> seeds;
    for (int i = 0; i < 32; ++i) {
        seeds.push_back(str_bytes(memcached::encode_line(gen::memcached_line(rng))));
    }
    fuzz(73, seeds, [](ByteView b) { memcached::decode_line(b); });
}

TEST(Http, ResponseDecoding)
{
    std::string wire = "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: 2\r\n\r\n{}";
    auto d = http::decode_response(as_bytes(wire));
    EXPECT_EQ(d.value.status, 200);
    EXPECT_EQ(d.value.body, "{}");
    EXPECT_EQ(http::header(d.value.headers, "content-type"), "application/json");

    std::string chunked = "HTTP/1.1 200 OK\r\nTransfer-Encoding: chunked\r\n\r\n3\r\nabc\r\n2\r\nde\r\n0\r\n\r\n";
    EXPECT_EQ(http::decode_response(as_bytes(chunked)).value.body, "abcde");

    EXPECT_EQ(http::url_decode(http::url_encode("a b/c?d")), "a b/c?d");
}

TEST(Http, RoundTripProperty)
{
    gen::Rng rng(81);
    for (int i = 0; i < kRounds; ++i) {
        http::Request req;
        req.target = "/" + rng.word(1, 8) + "/_search?size=" + std::to_string(rng.below(50));
        req.headers = {{"Host", "127.0.0.1"}, {"Accept", "application/json"}};
        auto dreq = http::decode_request(as_bytes(http::encode(req)));
        ASSERT_EQ(dreq.value.target, req.target);

        http::Response resp;
        // 1xx, 204 and 304 never carry a body
        static const std::vector<int> statuses = {200, 201, 400, 401, 403, 404, 405, 429, 500, 503};
        resp.status = rng.pick(statuses);
        resp.reason = http::reason_phrase(resp.status);
        resp.body = rng.text(200, gen::kPrintable);
        resp.headers = {{"Content-Length", std::to_string(resp.body.size())}};
        auto dresp = http::decode_response(as_bytes(http::encode(resp)));
        ASSERT_EQ(dresp.value.status, resp.status);
        ASSERT_EQ(dresp.value.body, resp.body);
    }
}

TEST(Http, FuzzYieldsStructuredErrors)
{
    std::vector<Bytes> seeds = {str_bytes("HTTP/1.1 200 OK\r\nContent-Length: 5\r\n\r\nhello"),
        str_bytes("HTTP/1.1 200 OK\r\nTransfer-Encoding: chunked\r\n\r\n5\r\nhello\r\n0\r\n\r\n")};
    fuzz(91, seeds, [](ByteView b) { http::decode_response(b, true); });
    fuzz(92, {str_bytes("GET / HTTP/1.1\r\nHost: x\r\n\r\n")}, [](ByteView b) { http::decode_request(b); });
}
