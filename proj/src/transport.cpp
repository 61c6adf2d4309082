#include "transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <unordered_map>

#include "error.hpp"

namespace pws {

std::pair<std::string, int> parse_endpoint(const std::string& endpoint) {
    const auto colon = endpoint.rfind(':');
    if (colon == std::string::npos)
        throw Error(ErrorCode::Config, "endpoint must be host:port, got: " + endpoint);
    std::string host = endpoint.substr(0, colon);
    if (host.empty()) host = "127.0.0.1";
    int port = 0;
    try {
        port = std::stoi(endpoint.substr(colon + 1));
    } catch (const std::exception&) {
        throw Error(ErrorCode::Config, "invalid port in endpoint: " + endpoint);
    }
    if (port <= 0 || port > 65535)
        throw Error(ErrorCode::Config, "invalid port in endpoint: " + endpoint);
    return {host, port};
}

RemoteTransport::RemoteTransport(std::string host, int port, std::string client_name,
                                 int read_timeout_ms)
    : host_(std::move(host)), port_(port), client_name_(std::move(client_name)),
      read_timeout_ms_(read_timeout_ms) {}

RemoteTransport::~RemoteTransport() { close(); }

void RemoteTransport::close() {
    std::lock_guard<std::mutex> lock(mutex_);
    if (fd_ >= 0) {
        ::shutdown(fd_, SHUT_RDWR);
        ::close(fd_);
        fd_ = -1;
    }
    connected_ = false;
}

void RemoteTransport::connect_session() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
    connected_ = false;

    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* result = nullptr;
    const std::string port_str = std::to_string(port_);
    if (::getaddrinfo(host_.c_str(), port_str.c_str(), &hints, &result) != 0 || !result)
        throw TransportError("cannot resolve " + host_ + ":" + port_str);

    int fd = -1;
    for (addrinfo* ai = result; ai; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(result);
    if (fd < 0)
        throw TransportError("cannot connect to " + host_ + ":" + port_str + ": " +
                             std::strerror(errno));
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    fd_ = fd;

    Frame hello;
    hello.type = FrameType::hello;
    hello.payload["protocol_version"] = kProtocolVersion;
    hello.payload["client_name"] = client_name_;
    write_frame(fd_, hello);

    Frame ack;
    if (!read_frame(fd_, ack, read_timeout_ms_))
        throw TransportError("server closed the connection during handshake");
    if (ack.type == FrameType::error)
        throw Error(ErrorCode::Transport,
                    "handshake rejected: " + ack.payload.value("message", std::string()));
    if (ack.type != FrameType::hello_ack)
        throw Error(ErrorCode::Transport, "unexpected handshake reply");
    info_.model_id = ack.payload.at("model_id").get<std::string>();
    info_.capabilities =
        Capabilities::from_names(ack.payload.at("capabilities").get<std::vector<std::string>>());
    info_.protocol_version = ack.payload.at("protocol_version").get<int>();
    next_chunk_id_ = 1;
    connected_ = true;
}

void RemoteTransport::ensure_connected() {
    if (!connected_) connect_session();
}

const HelloInfo& RemoteTransport::info() {
    std::lock_guard<std::mutex> lock(mutex_);
    ensure_connected();
    return info_;
}

void RemoteTransport::send_chunk(std::int64_t chunk_id, std::span<const Query> queries) {
    Frame f;
    f.type = FrameType::run_chunk;
    f.payload["chunk_id"] = chunk_id;
    Json arr = Json::array();
    for (const Query& q : queries) arr.push_back(query_to_json(q));
    f.payload["queries"] = std::move(arr);
    write_frame(fd_, f);
}

Frame RemoteTransport::read_reply() {
    Frame f;
    if (!read_frame(fd_, f, read_timeout_ms_))
        throw TransportError("server closed the connection");
    return f;
}

Json RemoteTransport::status() {
    std::lock_guard<std::mutex> lock(mutex_);
    ensure_connected();
    Frame f;
    f.type = FrameType::status;
    f.payload = Json::object();
    write_frame(fd_, f);
    Frame reply = read_reply();
    if (reply.type != FrameType::status)
        throw Error(ErrorCode::Transport, "unexpected STATUS reply");
    return reply.payload;
}

std::vector<Response> RemoteTransport::remote_run(std::span<const Query> queries,
                                                  std::size_t chunk_size) {
    if (chunk_size < 1) throw Error(ErrorCode::InvalidArgument, "chunk_size must be >= 1");
    std::lock_guard<std::mutex> lock(mutex_);
    ensure_connected();

    // partition into ceil(n / chunk_size) chunks of query index ranges
    struct Chunk {
        std::size_t begin;
        std::size_t end;
        bool acknowledged = false;
    };
    std::vector<Chunk> chunks;
    for (std::size_t begin = 0; begin < queries.size(); begin += chunk_size)
        chunks.push_back({begin, std::min(queries.size(), begin + chunk_size), false});

    std::vector<Response> out(queries.size());
    if (chunks.empty()) return out;

    constexpr std::size_t kPipelineWindow = 2;
    bool retried = false;

    auto submit_round = [&]() {
        // map chunk_id -> position of pending (unacknowledged) chunks
        std::vector<std::size_t> pending;
        for (std::size_t c = 0; c < chunks.size(); ++c)
            if (!chunks[c].acknowledged) pending.push_back(c);
        std::unordered_map<std::int64_t, std::size_t> in_flight;
        std::size_t next_to_send = 0;
        std::size_t completed = 0;
        while (completed < pending.size()) {
            while (next_to_send < pending.size() && in_flight.size() < kPipelineWindow) {
                const Chunk& chunk = chunks[pending[next_to_send]];
                const std::int64_t id = next_chunk_id_++;
                send_chunk(id, queries.subspan(chunk.begin, chunk.end - chunk.begin));
                in_flight.emplace(id, pending[next_to_send]);
                ++next_to_send;
            }
            Frame reply = read_reply();
            if (reply.type == FrameType::error) {
                const std::string message = reply.payload.value("message", std::string());
                throw Error(ErrorCode::Backend, "server error: " + message);
            }
            if (reply.type != FrameType::chunk_result)
                throw Error(ErrorCode::Transport, "unexpected frame while awaiting results");
            const std::int64_t id = reply.payload.at("chunk_id").get<std::int64_t>();
            auto it = in_flight.find(id);
            if (it == in_flight.end())
                throw Error(ErrorCode::Transport,
                            "result for unknown chunk_id " + std::to_string(id));
            Chunk& chunk = chunks[it->second];
            const Json& responses = reply.payload.at("responses");
            if (responses.size() != chunk.end - chunk.begin)
                throw Error(ErrorCode::Transport, "response count mismatch for chunk " +
                                                      std::to_string(id));
            for (std::size_t k = 0; k < responses.size(); ++k)
                out[chunk.begin + k] = response_from_json(responses[k]);
            chunk.acknowledged = true;
            in_flight.erase(it);
            ++completed;
        }
    };

    while (true) {
        try {
            submit_round();
            return out;
        } catch (const TransportError&) {
            connected_ = false;
            if (retried) break;
            retried = true;
            try {
                connect_session();  // fresh session, resubmit unacknowledged chunks
            } catch (const TransportError&) {
                break;
            }
        }
    }

    std::vector<std::size_t> missing;
    for (const Chunk& c : chunks)
        if (!c.acknowledged)
            for (std::size_t i = c.begin; i < c.end; ++i) missing.push_back(i);
    throw TransportError("connection lost; responses missing for " +
                             std::to_string(missing.size()) + " queries",
                         missing);
}

RemoteBackend::RemoteBackend(std::string host, int port, std::size_t chunk_size)
    : transport_(std::make_shared<RemoteTransport>(std::move(host), port)),
      chunk_size_(chunk_size) {
    info_ = transport_->info();
}

std::vector<Response> RemoteBackend::run_batch(std::span<const Query> batch) {
    return transport_->remote_run(batch, chunk_size_);
}

}  // namespace pws
