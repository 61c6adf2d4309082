#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "backend.hpp"
#include "framing.hpp"
#include "query.hpp"
#include "response.hpp"

namespace pws {

struct HelloInfo {
    std::string model_id;
    Capabilities capabilities;
    int protocol_version = 0;
};

// One framed-protocol session against a remote server. Chunks carry strictly
// increasing ids; submission pipelines a bounded window ahead of results. On
// a dropped connection, remote_run reconnects once and resubmits the chunks
// that were never acknowledged, then fails listing the missing indices.
class RemoteTransport {
public:
    RemoteTransport(std::string host, int port, std::string client_name = "promptws-client",
                    int read_timeout_ms = 60000);
    ~RemoteTransport();

    RemoteTransport(const RemoteTransport&) = delete;
    RemoteTransport& operator=(const RemoteTransport&) = delete;

    const HelloInfo& info();

    std::vector<Response> remote_run(std::span<const Query> queries,
                                     std::size_t chunk_size = 1024);

    // One STATUS round-trip; returns the server's status payload.
    Json status();

    void close();

private:
    void ensure_connected();
    void connect_session();
    void send_chunk(std::int64_t chunk_id, std::span<const Query> queries);
    Frame read_reply();

    std::string host_;
    int port_;
    std::string client_name_;
    int read_timeout_ms_;
    int fd_ = -1;
    std::int64_t next_chunk_id_ = 1;
    HelloInfo info_;
    bool connected_ = false;
    std::mutex mutex_;
};

// Backend adapter over a remote session: capabilities and model id from the
// handshake, batches shipped as chunks.
class RemoteBackend : public Backend {
public:
    RemoteBackend(std::string host, int port, std::size_t chunk_size = 1024);

    std::string model_id() const override { return info_.model_id; }
    Capabilities capabilities() const override { return info_.capabilities; }
    std::vector<Response> run_batch(std::span<const Query> batch) override;

private:
    std::shared_ptr<RemoteTransport> transport_;
    HelloInfo info_;
    std::size_t chunk_size_;
};

// Splits host:port; host defaults to 127.0.0.1 when empty.
std::pair<std::string, int> parse_endpoint(const std::string& endpoint);

}  // namespace pws
