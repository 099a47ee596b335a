#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <string>

namespace knac {

struct ServiceOptions {
    std::filesystem::path data_dir;
    std::string ui_dir;  // static bundle mounted at "/" when non-empty
    std::size_t max_upload_bytes = 50u * 1024u * 1024u;
    std::size_t max_rows = 200000;
};

/// JSON-over-HTTP front end for review sessions. Every mutation goes through
/// a per-session writer lock and is persisted before the response is sent;
/// reads serve the last committed snapshot without taking that lock.
class Service {
public:
    explicit Service(ServiceOptions options);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    bool listen(const std::string& host, int port);
    /// Binds to an ephemeral port and returns it (-1 on failure).
    int bind_to_any_port(const std::string& host);
    bool listen_after_bind();
    void wait_until_ready() const;
    void stop();

    /// Takes the writer lock of a session the way a running iterate would.
    std::unique_lock<std::mutex> hold_writer(const std::string& id);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace knac
