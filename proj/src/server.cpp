#include "server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "error.hpp"

namespace pws {

namespace {

// "host:port" with host optional (defaults to 127.0.0.1)
std::pair<std::string, int> parse_bind_address(const std::string& addr) {
    const auto colon = addr.rfind(':');
    if (colon == std::string::npos)
        throw Error(ErrorCode::Config, "bind address must be host:port, got: " + addr);
    std::string host = addr.substr(0, colon);
    if (host.empty()) host = "127.0.0.1";
    int port = 0;
    try {
        port = std::stoi(addr.substr(colon + 1));
    } catch (const std::exception&) {
        throw Error(ErrorCode::Config, "invalid port in bind address: " + addr);
    }
    if (port < 0 || port > 65535)
        throw Error(ErrorCode::Config, "invalid port in bind address: " + addr);
    return {host, port};
}

}  // namespace

Server::Session::~Session() {
    if (fd >= 0) ::close(fd);
}

Server::Server(std::shared_ptr<Backend> backend, const std::string& bind_address,
               ServerConfig config)
    : backend_(std::move(backend)), config_(config) {
    if (!backend_) throw Error(ErrorCode::InvalidArgument, "server needs a backend");
    auto [host, port] = parse_bind_address(bind_address);

    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw Error(ErrorCode::Io, std::string("socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);

    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &sa.sin_addr) != 1) {
        ::close(listen_fd_);
        throw Error(ErrorCode::Config, "invalid bind host: " + host);
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&sa), sizeof sa) < 0) {
        const std::string msg = std::strerror(errno);
        ::close(listen_fd_);
        throw Error(ErrorCode::Io, "bind " + bind_address + ": " + msg);
    }
    if (::listen(listen_fd_, 64) < 0) {
        const std::string msg = std::strerror(errno);
        ::close(listen_fd_);
        throw Error(ErrorCode::Io, "listen: " + msg);
    }
    sockaddr_in bound{};
    socklen_t len = sizeof bound;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.sin_port);
    char buf[INET_ADDRSTRLEN] = {};
    ::inet_ntop(AF_INET, &bound.sin_addr, buf, sizeof buf);
    bound_address_ = std::string(buf) + ":" + std::to_string(port_);

    executor_thread_ = std::thread([this] { executor_loop(); });
    accept_thread_ = std::thread([this] { accept_loop(); });
}

Server::~Server() { stop(); }

void Server::stop() {
    bool expected = false;
    if (!stopping_.compare_exchange_strong(expected, true)) return;
    if (listen_fd_ >= 0) {
        ::shutdown(listen_fd_, SHUT_RDWR);
        ::close(listen_fd_);
        listen_fd_ = -1;
    }
    {
        // unblock session readers stuck in read_frame
        std::lock_guard<std::mutex> lock(sessions_mutex_);
        for (auto& weak : sessions_) {
            if (auto s = weak.lock()) {
                s->open = false;
                ::shutdown(s->fd, SHUT_RDWR);
            }
        }
    }
    queue_cv_.notify_all();
    if (accept_thread_.joinable()) accept_thread_.join();
    if (executor_thread_.joinable()) executor_thread_.join();
    std::vector<std::thread> threads;
    {
        std::lock_guard<std::mutex> lock(sessions_mutex_);
        threads.swap(session_threads_);
    }
    for (auto& t : threads)
        if (t.joinable()) t.join();
}

void Server::wait() {
    if (accept_thread_.joinable()) accept_thread_.join();
}

void Server::accept_loop() {
    while (!stopping_) {
        sockaddr_in peer{};
        socklen_t len = sizeof peer;
        const int fd = ::accept(listen_fd_, reinterpret_cast<sockaddr*>(&peer), &len);
        if (fd < 0) {
            if (errno == EINTR) continue;
            break;  // listen socket closed
        }
        int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        auto session = std::make_shared<Session>();
        session->fd = fd;
        session->id = next_session_id_++;
        std::lock_guard<std::mutex> lock(sessions_mutex_);
        sessions_.push_back(session);
        session_threads_.emplace_back([this, session] { session_loop(session); });
    }
}

void Server::send_frame(Session& session, const Frame& frame) {
    std::lock_guard<std::mutex> lock(session.write_mutex);
    if (!session.open) return;
    try {
        write_frame(session.fd, frame);
    } catch (const Error&) {
        session.open = false;
    }
}

void Server::send_error(Session& session, int code, const std::string& message,
                        std::int64_t chunk_id) {
    Frame f;
    f.type = FrameType::error;
    f.payload["code"] = code;
    f.payload["message"] = message;
    if (chunk_id >= 0) f.payload["chunk_id"] = chunk_id;
    send_frame(session, f);
}

void Server::session_loop(std::shared_ptr<Session> session) {
    bool greeted = false;
    while (!stopping_ && session->open) {
        Frame frame;
        try {
            if (!read_frame(session->fd, frame, config_.read_timeout_ms)) break;  // peer closed
        } catch (const Error& e) {
            // malformed frame or broken stream
            if (dynamic_cast<const TransportError*>(&e) == nullptr) {
                send_error(*session, kWireMalformed, e.what());
                continue;  // framing intact, session survives
            }
            break;
        }

        if (!greeted) {
            if (frame.type != FrameType::hello) {
                send_error(*session, kWireProtocol, "expected HELLO");
                break;
            }
            int version = -1;
            if (frame.payload.contains("protocol_version") &&
                frame.payload["protocol_version"].is_number_integer())
                version = frame.payload["protocol_version"].get<int>();
            if (version != kProtocolVersion) {
                send_error(*session, kWireProtocol,
                           "protocol version mismatch: server speaks " +
                               std::to_string(kProtocolVersion));
                break;
            }
            Frame ack;
            ack.type = FrameType::hello_ack;
            ack.payload["model_id"] = backend_->model_id();
            ack.payload["capabilities"] = backend_->capabilities().names();
            ack.payload["protocol_version"] = kProtocolVersion;
            send_frame(*session, ack);
            greeted = true;
            continue;
        }

        bool close_session = false;
        handle_frame(session, frame, close_session);
        if (close_session) break;
    }
    session->open = false;
    ::shutdown(session->fd, SHUT_RDWR);  // fd closes with the last session reference
}

void Server::handle_frame(const std::shared_ptr<Session>& session, const Frame& frame,
                          bool& close_session) {
    switch (frame.type) {
        case FrameType::run_chunk: {
            std::int64_t chunk_id = -1;
            std::vector<Query> queries;
            try {
                chunk_id = frame.payload.at("chunk_id").get<std::int64_t>();
                for (const Json& jq : frame.payload.at("queries")) {
                    Query q = query_from_json(jq);
                    validate(q);
                    queries.push_back(std::move(q));
                }
            } catch (const std::exception& e) {
                send_error(*session, kWireMalformed,
                           std::string("bad RUN_CHUNK payload: ") + e.what(),
                           chunk_id >= 0 ? chunk_id : -1);
                return;
            }
            if (chunk_id <= session->last_chunk_id) {
                send_error(*session, kWireProtocol,
                           "chunk_id " + std::to_string(chunk_id) + " is not increasing",
                           chunk_id);
                return;
            }
            session->last_chunk_id = chunk_id;
            const Capabilities caps = backend_->capabilities();
            for (std::size_t i = 0; i < queries.size(); ++i) {
                if (!caps.supports(queries[i])) {
                    send_error(*session, kWireCapability,
                               "query " + std::to_string(i) + " is outside backend capabilities",
                               chunk_id);
                    return;
                }
            }
            {
                std::lock_guard<std::mutex> lock(queue_mutex_);
                queue_.push_back(Job{session, chunk_id, std::move(queries)});
            }
            queue_cv_.notify_one();
            return;
        }
        case FrameType::status: {
            Frame out;
            out.type = FrameType::status;
            {
                std::lock_guard<std::mutex> lock(queue_mutex_);
                out.payload["queue_depth"] = queue_.size();
            }
            out.payload["chunks_executed"] = chunks_executed_.load();
            out.payload["model_id"] = backend_->model_id();
            send_frame(*session, out);
            return;
        }
        case FrameType::hello:
            send_error(*session, kWireProtocol, "duplicate HELLO");
            close_session = true;
            return;
        default:
            send_error(*session, kWireProtocol,
                       "unexpected frame type " + std::to_string(static_cast<int>(frame.type)));
            return;
    }
}

std::vector<Response> Server::execute_chunk(const std::vector<Query>& queries) {
    const auto lengths = query_token_lengths(queries, backend_.get());
    const BatchPlan p = plan(lengths, config_.token_budget, config_.max_batch);
    if (auto* enc = dynamic_cast<EncoderBackend*>(backend_.get())) {
        BatchFn fn = [this, enc](std::span<const Query> batch) {
            return enc->run_batch_with_encoder(
                batch, [this, enc](Modality m, const std::string& content) {
                    return repr_cache_.get_or_encode(
                        m, content, [enc](Modality mm, const std::string& cc) {
                            return enc->encode(mm, cc);
                        });
                });
        };
        return execute(fn, queries, p);
    }
    return execute(*backend_, queries, p);
}

void Server::executor_loop() {
    while (true) {
        Job job;
        {
            std::unique_lock<std::mutex> lock(queue_mutex_);
            queue_cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
            if (stopping_ && queue_.empty()) return;
            job = std::move(queue_.front());
            queue_.pop_front();
        }
        try {
            std::vector<Response> responses = execute_chunk(job.queries);
            Frame result;
            result.type = FrameType::chunk_result;
            result.payload["chunk_id"] = job.chunk_id;
            Json arr = Json::array();
            for (const Response& r : responses) arr.push_back(response_to_json(r));
            result.payload["responses"] = std::move(arr);
            chunks_executed_ += 1;
            send_frame(*job.session, result);
        } catch (const Error& e) {
            // failure scoped to the chunk; the session survives
            send_error(*job.session, kWireBackend, e.what(), job.chunk_id);
        } catch (const std::exception& e) {
            send_error(*job.session, kWireInternal, e.what(), job.chunk_id);
        }
    }
}

std::unique_ptr<Server> serve(std::shared_ptr<Backend> backend, const std::string& bind_address,
                              ServerConfig config) {
    return std::make_unique<Server>(std::move(backend), bind_address, config);
}

}  // namespace pws
