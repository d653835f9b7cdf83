#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>

namespace causalfair::service {

struct Response {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

struct ServiceConfig {
    /// When set, every successful mutating call writes <dir>/<session>.json
    /// holding the session's configuration and edit log.
    std::optional<std::string> snapshot_dir;
    std::size_t max_rows = 50000;
    std::size_t max_cols = 40;
    /// Worker threads for discovery and model fitting; 0 = hardware concurrency.
    unsigned threads = 1;
};

struct Session;

/// JSON-over-HTTP session API. Requests on one session are serialised by
/// that session's mutex; distinct sessions proceed concurrently.
///
/// Every mutating request body carries an integer "revision" that must be
/// larger than the last accepted one for the session (409 otherwise).
class SessionService {
public:
    explicit SessionService(ServiceConfig cfg = {});
    ~SessionService();

    /// `params` are the decoded query parameters.
    Response handle(std::string_view method, std::string_view path, const std::map<std::string, std::string>& params,
                    std::string_view body);
    /// `target` may carry a percent-encoded query string.
    Response handle(std::string_view method, std::string_view target, std::string_view body);

    std::size_t session_count() const;

private:
    std::shared_ptr<Session> find(const std::string& id) const;

    ServiceConfig cfg_;
    mutable std::shared_mutex mu_;
    std::map<std::string, std::shared_ptr<Session>> sessions_;
    std::uint64_t counter_ = 0;
};

/// Blocking HTTP server on host:port.
void serve(SessionService& service, const std::string& host, int port);

}  // namespace causalfair::service
