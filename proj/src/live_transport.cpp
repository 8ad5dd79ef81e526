#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "exposcan/discovery.hpp"
#include "exposcan/net.hpp"

namespace exposcan {

namespace {

class LiveTransport : public HttpTransport {
public:
    HttpResponse get(const std::string &host, const std::string &path_and_query,
        const std::map<std::string, std::string> &headers) override
    {
        net::connect_audit_note(host, 443);
        httplib::SSLClient client(host, 443);
        client.set_connection_timeout(10, 0);
        client.set_read_timeout(30, 0);
        httplib::Headers h(headers.begin(), headers.end());
        auto res = client.Get(path_and_query, h);
        if (!res) {
            return {0, httplib::to_string(res.error())};
        }
        return {res->status, res->body};
    }
};

} // namespace

std::unique_ptr<HttpTransport> make_live_transport() { return std::make_unique<LiveTransport>(); }

} // namespace exposcan
